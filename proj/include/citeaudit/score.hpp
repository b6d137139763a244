#pragma once

// Component similarities, the 0-100 composite confidence score, verdict
// tiers, and the typology bands used for failed matches.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "citeparse.hpp"
#include "unicode.hpp"
#include "works.hpp"

namespace citeaudit::score {

// Half-open in spirit, stored inclusive: band covers [lo, hi].
struct TypologyBand {
    std::string label;
    int lo = 0;
    int hi = 0;
};

inline std::vector<TypologyBand> default_typology_bands() {
    return {
        {"probable_real", 65, 79},
        {"near_miss", 50, 64},
        {"distant_chimera", 30, 49},
        {"fabrication", 0, 29},
    };
}

struct ScoringConfig {
    double weight_title = 0.6;
    double weight_author = 0.2;
    double weight_year = 0.2;
    int threshold_confirmed = 80;
    int threshold_probable = 65;
    std::vector<TypologyBand> typology_bands = default_typology_bands();
    int reference_year = 2025;
    // Off by default: +-1 year still earns half credit (metadata drift).
    bool year_exact_only = false;
};

// Throws std::invalid_argument on the first violated invariant.
inline void validate(const ScoringConfig& cfg) {
    if (cfg.weight_title < 0.0 || cfg.weight_author < 0.0 || cfg.weight_year < 0.0)
        throw std::invalid_argument("scoring weights must be non-negative");
    double sum = cfg.weight_title + cfg.weight_author + cfg.weight_year;
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("scoring weights must sum to 1.0");
    if (!(0 < cfg.threshold_probable && cfg.threshold_probable < cfg.threshold_confirmed &&
          cfg.threshold_confirmed <= 100))
        throw std::invalid_argument("thresholds must satisfy 0 < probable < confirmed <= 100");

    // Bands must partition [0, threshold_confirmed) exactly.
    std::vector<int> owner(static_cast<size_t>(cfg.threshold_confirmed), -1);
    for (size_t i = 0; i < cfg.typology_bands.size(); ++i) {
        const auto& b = cfg.typology_bands[i];
        if (b.label.empty()) throw std::invalid_argument("typology band label must be non-empty");
        for (size_t j = 0; j < i; ++j)
            if (cfg.typology_bands[j].label == b.label)
                throw std::invalid_argument("duplicate typology band label: " + b.label);
        if (b.lo > b.hi || b.lo < 0 || b.hi >= cfg.threshold_confirmed)
            throw std::invalid_argument("typology band out of range: " + b.label);
        for (int s = b.lo; s <= b.hi; ++s) {
            if (owner[static_cast<size_t>(s)] != -1)
                throw std::invalid_argument("typology bands overlap at score " + std::to_string(s));
            owner[static_cast<size_t>(s)] = static_cast<int>(i);
        }
    }
    for (int s = 0; s < cfg.threshold_confirmed; ++s)
        if (owner[static_cast<size_t>(s)] == -1)
            throw std::invalid_argument("typology bands leave score " + std::to_string(s) +
                                        " uncovered");
}

namespace detail {

inline std::unordered_set<std::string> title_token_set(std::string_view s) {
    std::string key = citeparse::canonical_title_key(s).key;
    std::unordered_set<std::string> out;
    size_t start = 0;
    while (start < key.size()) {
        size_t sp = key.find(' ', start);
        if (sp == std::string::npos) sp = key.size();
        if (sp > start) out.insert(key.substr(start, sp - start));
        start = sp + 1;
    }
    return out;
}

inline std::string normalize_last_name(std::string_view raw) {
    std::string s = uni::lower(uni::nfkc_fold(std::string(raw)));
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t.");
    if (e == std::string::npos || e < b) return {};
    return s.substr(b, e - b + 1);
}

inline bool is_et_al_token(const std::string& normalized) {
    std::string bare;
    for (char c : normalized)
        if (c != '.' && c != ' ') bare += c;
    return bare == "et" || bare == "al" || bare == "etal" || bare == "others";
}

inline std::unordered_set<std::string> author_name_set(const std::vector<std::string>& names) {
    std::unordered_set<std::string> out;
    for (const auto& n : names) {
        std::string norm = normalize_last_name(n);
        if (!norm.empty() && !is_et_al_token(norm)) out.insert(norm);
    }
    return out;
}

} // namespace detail

// Token Jaccard over canonicalized titles. Both empty -> 0.
inline double title_similarity(std::string_view a, std::string_view b) {
    auto sa = detail::title_token_set(a);
    auto sb = detail::title_token_set(b);
    if (sa.empty() && sb.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& t : sa)
        if (sb.count(t)) ++inter;
    size_t uni_size = sa.size() + sb.size() - inter;
    if (uni_size == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni_size);
}

// Case-insensitive last-name set intersection over the citation's own author
// count, so a first-author-only citation matching a long author list scores
// 1.0. "et al." tokens never count on either side.
inline double author_overlap(const std::vector<std::string>& parsed,
                             const std::vector<std::string>& record) {
    auto ps = detail::author_name_set(parsed);
    if (ps.empty()) return 0.0;
    auto rs = detail::author_name_set(record);
    size_t inter = 0;
    for (const auto& n : ps)
        if (rs.count(n)) ++inter;
    return static_cast<double>(inter) / static_cast<double>(ps.size());
}

// 1.0 exact, 0.5 one year off, 0.0 otherwise or when either side is missing.
inline double year_agreement(std::optional<int> cited, std::optional<int> record,
                             bool exact_only = false) {
    if (!cited || !record) return 0.0;
    int delta = *cited - *record;
    if (delta == 0) return 1.0;
    if (!exact_only && (delta == 1 || delta == -1)) return 0.5;
    return 0.0;
}

// Round-half-up happens here and only here; components stay full precision.
inline int composite_score(double title_sim, double author_ov, double year_ag,
                           const ScoringConfig& cfg = {}) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(title_sim) || !in_unit(author_ov) || !in_unit(year_ag))
        throw std::invalid_argument("score components must lie in [0,1]");
    double weighted = cfg.weight_title * title_sim + cfg.weight_author * author_ov +
                      cfg.weight_year * year_ag;
    int scored = static_cast<int>(std::floor(100.0 * weighted + 0.5));
    return std::clamp(scored, 0, 100);
}

enum class Tier { confirmed, probable, hallucinated };

constexpr const char* to_string(Tier t) {
    switch (t) {
        case Tier::confirmed: return "confirmed";
        case Tier::probable: return "probable";
        case Tier::hallucinated: return "hallucinated";
    }
    return "hallucinated";
}

inline Tier tier_from_string(std::string_view name) {
    if (name == "confirmed") return Tier::confirmed;
    if (name == "probable") return Tier::probable;
    if (name == "hallucinated") return Tier::hallucinated;
    throw std::invalid_argument("unknown tier: " + std::string(name));
}

inline Tier tier_for(int composite, const ScoringConfig& cfg = {}) {
    if (composite >= cfg.threshold_confirmed) return Tier::confirmed;
    if (composite >= cfg.threshold_probable) return Tier::probable;
    return Tier::hallucinated;
}

// Band label for scores below the confirmed threshold; nullopt at/above it.
inline std::optional<std::string> typology_for(int composite, const ScoringConfig& cfg = {}) {
    if (composite >= cfg.threshold_confirmed) return std::nullopt;
    for (const auto& b : cfg.typology_bands)
        if (composite >= b.lo && composite <= b.hi) return b.label;
    throw std::logic_error("no typology band covers score " + std::to_string(composite));
}

enum class ResolutionStatus { resolved, unresolved };

constexpr const char* to_string(ResolutionStatus s) {
    return s == ResolutionStatus::resolved ? "resolved" : "unresolved";
}

inline ResolutionStatus resolution_status_from_string(std::string_view name) {
    if (name == "resolved") return ResolutionStatus::resolved;
    if (name == "unresolved") return ResolutionStatus::unresolved;
    throw std::invalid_argument("unknown resolution status: " + std::string(name));
}

struct ResolutionOutcome {
    std::string citation_id;
    std::optional<MatchCandidate> best_candidate;
    double title_sim = 0.0;
    double author_overlap = 0.0;
    double year_agree = 0.0;
    int composite = 0;
    std::vector<Source> sources_consulted;
    std::optional<BibliometricMetadata> bibliometrics;
    ResolutionStatus status = ResolutionStatus::resolved;
};

struct Verdict {
    std::string citation_id;
    Tier tier = Tier::hallucinated;
    std::optional<std::string> typology; // present iff best_score < confirmed
    int best_score = 0;
};

// Unresolved outcomes never receive a verdict; callers keep them separate
// from hallucinated counts.
inline Verdict classify_verdict(const ResolutionOutcome& outcome, const ScoringConfig& cfg = {}) {
    if (outcome.status != ResolutionStatus::resolved)
        throw std::invalid_argument("cannot classify an unresolved outcome");
    Verdict v;
    v.citation_id = outcome.citation_id;
    v.best_score = outcome.composite;
    v.tier = tier_for(outcome.composite, cfg);
    v.typology = typology_for(outcome.composite, cfg);
    return v;
}

// Convenience: score one candidate against a parsed citation.
inline ResolutionOutcome score_candidate(const citeparse::CitationRecord& record,
                                         const MatchCandidate& candidate,
                                         const ScoringConfig& cfg = {}) {
    std::vector<std::string> parsed_last;
    parsed_last.reserve(record.authors.size());
    for (const auto& a : record.authors) parsed_last.push_back(a.last_name);
    ResolutionOutcome out;
    out.citation_id = record.citation_id;
    out.title_sim = title_similarity(record.title, candidate.record_title);
    out.author_overlap = author_overlap(parsed_last, candidate.record_authors);
    out.year_agree = year_agreement(record.year, candidate.record_year, cfg.year_exact_only);
    out.composite = composite_score(out.title_sim, out.author_overlap, out.year_agree, cfg);
    out.best_candidate = candidate;
    out.status = ResolutionStatus::resolved;
    return out;
}

} // namespace citeaudit::score
