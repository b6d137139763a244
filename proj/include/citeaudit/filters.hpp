#pragma once

// Cross-model consensus, replication repetition, candidate-pool compliance,
// and the staged verification pipeline that orders prescreen -> consensus ->
// resolution so cheap checks absorb load before any network lookup.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "citeparse.hpp"
#include "classify.hpp"
#include "features.hpp"
#include "score.hpp"
#include "unicode.hpp"

namespace citeaudit::filters {

struct UnknownPrompt : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingReplications : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SlotId {
    std::string model_id;
    std::string prompt_id;
    int replication = 1;
    auto operator<=>(const SlotId&) const = default;
};

struct CorpusEntry {
    SlotId slot;
    citeparse::CitationRecord record;
};

// Citation identity is the canonical title key, except that records sharing
// a DOI are the same work even when their titles drift; a union pass picks
// the lexicographically smallest key of each DOI-connected class.
class CitationCorpus {
  public:
    std::map<SlotId, std::set<citeparse::CanonicalKey>> slots;
    std::map<citeparse::CanonicalKey, std::vector<citeparse::CitationRecord>> backing;
    std::set<std::string> models;
    std::set<std::string> prompts;

    citeparse::CanonicalKey unified_key(const citeparse::CitationRecord& record) const {
        std::string base = base_key(record);
        if (auto it = rep_.find(base); it != rep_.end()) return it->second;
        if (record.doi) {
            if (auto it = doi_rep_.find(*record.doi); it != doi_rep_.end()) return it->second;
        }
        return citeparse::CanonicalKey{base};
    }

    // key set for one model across all prompts and replications
    std::set<citeparse::CanonicalKey> model_keys(const std::string& model_id) const {
        std::set<citeparse::CanonicalKey> out;
        for (const auto& [slot, keys] : slots)
            if (slot.model_id == model_id) out.insert(keys.begin(), keys.end());
        return out;
    }

    static std::string base_key(const citeparse::CitationRecord& record) {
        std::string key = citeparse::canonical_title_key(record.title).key;
        if (!key.empty()) return key;
        if (record.doi) return "doi:" + *record.doi;
        return "id:" + record.citation_id;
    }

    friend CitationCorpus build_corpus(const std::vector<CorpusEntry>&,
                                       const std::vector<SlotId>&);

  private:
    std::map<std::string, citeparse::CanonicalKey> rep_;     // base key -> class key
    std::map<std::string, citeparse::CanonicalKey> doi_rep_; // doi -> class key
};

inline CitationCorpus build_corpus(const std::vector<CorpusEntry>& entries,
                                   const std::vector<SlotId>& empty_slots = {}) {
    // union-find over base keys, connected through shared DOIs
    std::map<std::string, std::string> parent;
    auto find = [&](std::string k) {
        while (parent[k] != k) {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        return k;
    };
    auto ensure = [&](const std::string& k) {
        if (!parent.count(k)) parent[k] = k;
    };

    std::map<std::string, std::string> doi_first; // doi -> first base key seen
    for (const auto& e : entries) {
        std::string base = CitationCorpus::base_key(e.record);
        ensure(base);
        if (e.record.doi) {
            auto [it, fresh] = doi_first.emplace(*e.record.doi, base);
            if (!fresh) {
                ensure(it->second);
                parent[find(base)] = find(it->second);
            }
        }
    }

    // class representative: smallest member key
    std::map<std::string, std::string> smallest;
    for (const auto& [k, _] : parent) {
        std::string root = find(k);
        auto [it, fresh] = smallest.emplace(root, k);
        if (!fresh && k < it->second) it->second = k;
    }

    CitationCorpus corpus;
    for (const auto& [k, _] : parent)
        corpus.rep_[k] = citeparse::CanonicalKey{smallest[find(k)]};
    for (const auto& [doi, base] : doi_first)
        corpus.doi_rep_[doi] = corpus.rep_[base];

    for (const auto& s : empty_slots) {
        corpus.slots[s];
        corpus.models.insert(s.model_id);
        corpus.prompts.insert(s.prompt_id);
    }
    for (const auto& e : entries) {
        auto key = corpus.rep_[CitationCorpus::base_key(e.record)];
        corpus.slots[e.slot].insert(key);
        corpus.backing[key].push_back(e.record);
        corpus.models.insert(e.slot.model_id);
        corpus.prompts.insert(e.slot.prompt_id);
    }
    return corpus;
}

// Convenience: join parsed citations to their source responses.
inline CitationCorpus build_corpus(const std::vector<citeparse::RawResponse>& responses,
                                   const std::vector<citeparse::CitationRecord>& records) {
    std::map<std::string, SlotId> by_response;
    std::vector<SlotId> all_slots;
    for (const auto& r : responses) {
        SlotId slot{r.model_id, r.prompt_id, r.replication};
        if (!by_response.emplace(r.response_id, slot).second)
            throw std::invalid_argument("duplicate response_id: " + r.response_id);
        all_slots.push_back(slot);
    }
    std::vector<CorpusEntry> entries;
    entries.reserve(records.size());
    for (const auto& rec : records) {
        auto it = by_response.find(rec.source_response);
        if (it == by_response.end())
            throw std::invalid_argument("citation " + rec.citation_id +
                                        " references unknown response " + rec.source_response);
        entries.push_back({it->second, rec});
    }
    return build_corpus(entries, all_slots);
}

// ---- consensus --------------------------------------------------------------

// Distinct models citing the key for this prompt; replications dedupe.
inline std::map<citeparse::CanonicalKey, int> consensus_counts(const CitationCorpus& corpus,
                                                               const std::string& prompt_id) {
    if (!corpus.prompts.count(prompt_id)) throw UnknownPrompt("unknown prompt: " + prompt_id);
    std::map<citeparse::CanonicalKey, std::set<std::string>> models_per_key;
    for (const auto& [slot, keys] : corpus.slots) {
        if (slot.prompt_id != prompt_id) continue;
        for (const auto& k : keys) models_per_key[k].insert(slot.model_id);
    }
    std::map<citeparse::CanonicalKey, int> counts;
    for (const auto& [k, ms] : models_per_key) counts[k] = static_cast<int>(ms.size());
    return counts;
}

inline std::set<citeparse::CanonicalKey> consensus_filter(const CitationCorpus& corpus,
                                                          const std::string& prompt_id, int k) {
    if (k < 1) throw std::invalid_argument("consensus k must be at least 1");
    if (static_cast<size_t>(k) > corpus.models.size())
        throw std::invalid_argument("consensus k exceeds the number of models");
    std::set<citeparse::CanonicalKey> retained;
    for (const auto& [key, count] : consensus_counts(corpus, prompt_id))
        if (count >= k) retained.insert(key);
    return retained;
}

// ---- repetition ---------------------------------------------------------------

// In how many of the model's first n replication sets does each key appear?
inline std::map<citeparse::CanonicalKey, int> repetition_counts(const CitationCorpus& corpus,
                                                                const std::string& model_id,
                                                                const std::string& prompt_id,
                                                                int n) {
    std::map<citeparse::CanonicalKey, int> counts;
    for (int rep = 1; rep <= n; ++rep) {
        auto it = corpus.slots.find(SlotId{model_id, prompt_id, rep});
        if (it == corpus.slots.end())
            throw MissingReplications("missing replication " + std::to_string(rep) + " of " +
                                      std::to_string(n) + " for " + model_id + "/" + prompt_id);
        for (const auto& k : it->second) counts[k]++;
    }
    return counts;
}

inline std::set<citeparse::CanonicalKey> repetition_filter(const CitationCorpus& corpus,
                                                           const std::string& model_id,
                                                           const std::string& prompt_id, int r,
                                                           int n) {
    if (r < 1 || r > n) throw std::invalid_argument("need 1 <= r <= n");
    std::set<citeparse::CanonicalKey> retained;
    for (const auto& [key, count] : repetition_counts(corpus, model_id, prompt_id, n))
        if (count >= r) retained.insert(key);
    return retained;
}

// ---- model agreement -------------------------------------------------------------

struct AgreementMatrix {
    std::vector<std::string> models; // sorted
    std::vector<std::vector<double>> jaccard;
};

inline double jaccard_of(const std::set<citeparse::CanonicalKey>& a,
                         const std::set<citeparse::CanonicalKey>& b) {
    if (a.empty() && b.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& k : a) inter += b.count(k);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline AgreementMatrix jaccard_agreement(const CitationCorpus& corpus) {
    if (corpus.models.size() < 2)
        throw std::invalid_argument("agreement matrix needs at least 2 models");
    AgreementMatrix out;
    out.models.assign(corpus.models.begin(), corpus.models.end());
    std::vector<std::set<citeparse::CanonicalKey>> sets;
    sets.reserve(out.models.size());
    for (const auto& m : out.models) sets.push_back(corpus.model_keys(m));
    const size_t n = out.models.size();
    out.jaccard.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i; j < n; ++j) {
            double v = i == j ? (sets[i].empty() ? 0.0 : 1.0) : jaccard_of(sets[i], sets[j]);
            out.jaccard[i][j] = v;
            out.jaccard[j][i] = v;
        }
    return out;
}

// ---- candidate-pool compliance ------------------------------------------------------

struct SelectionCheck {
    std::vector<std::string> selected;   // candidate titles found in the response
    std::vector<std::string> violations; // canonical keys cited beyond the pool
};

inline SelectionCheck constrained_selection_check(const std::string& response_text,
                                                  const std::vector<std::string>& candidates,
                                                  const citeparse::Lexicon& lex =
                                                      citeparse::default_lexicon()) {
    if (candidates.empty()) throw std::invalid_argument("candidate pool must be non-empty");

    std::map<std::string, size_t> candidate_keys;
    for (size_t i = 0; i < candidates.size(); ++i)
        candidate_keys.emplace(citeparse::canonical_title_key(candidates[i]).key, i);

    // keys asserted by the response: parsed citations plus quoted title spans
    std::set<std::string> asserted;
    for (const auto& raw :
         citeparse::extract_reference_strings(response_text, citeparse::ExtractionMode::standard,
                                              lex)) {
        if (auto rec = citeparse::try_parse_citation(raw, "selection", lex);
            rec && !rec->title.empty())
            asserted.insert(citeparse::canonical_title_key(rec->title).key);
    }
    const std::string folded = uni::nfkc_fold(response_text);
    for (auto it = std::sregex_iterator(folded.begin(), folded.end(),
                                        citeparse::detail::re_quoted_span());
         it != std::sregex_iterator(); ++it) {
        std::string key = citeparse::canonical_title_key(it->str(1)).key;
        if (!key.empty()) asserted.insert(key);
    }

    // plain lines count toward selection (models often echo bare titles) but
    // never toward violations, so prose cannot false-alarm
    std::set<std::string> line_keys;
    for (const auto& line : citeparse::detail::split_lines(folded)) {
        std::string plain = citeparse::detail::strip_emphasis(
            citeparse::detail::strip_list_marker(citeparse::detail::trim(line)));
        std::string key = citeparse::canonical_title_key(plain).key;
        if (!key.empty()) line_keys.insert(key);
    }

    SelectionCheck out;
    std::vector<bool> picked(candidates.size(), false);
    for (const auto& key : asserted)
        if (auto it = candidate_keys.find(key); it != candidate_keys.end())
            picked[it->second] = true;
    for (const auto& key : line_keys)
        if (auto it = candidate_keys.find(key); it != candidate_keys.end())
            picked[it->second] = true;
    for (size_t i = 0; i < candidates.size(); ++i)
        if (picked[i]) out.selected.push_back(candidates[i]);

    for (const auto& key : asserted)
        if (!candidate_keys.count(key)) out.violations.push_back(key);
    return out;
}

// ---- staged pipeline -----------------------------------------------------------------

enum class Stage { prescreen, consensus, resolution };

constexpr const char* to_string(Stage s) {
    switch (s) {
        case Stage::prescreen: return "prescreen";
        case Stage::consensus: return "consensus";
        case Stage::resolution: return "resolution";
    }
    return "prescreen";
}

inline Stage stage_from_string(std::string_view name) {
    if (name == "prescreen") return Stage::prescreen;
    if (name == "consensus") return Stage::consensus;
    if (name == "resolution") return Stage::resolution;
    throw std::invalid_argument("unknown stage: " + std::string(name));
}

struct StageOutcome {
    Stage stage = Stage::prescreen;
    std::string decision; // "pass", "reject", "unresolved"
    double value = 0.0;   // probability, count, or composite score
};

struct StageTrace {
    std::string citation_id;
    std::vector<StageOutcome> outcomes;
    std::optional<score::Verdict> verdict; // present iff resolution completed
    std::optional<Stage> rejected_at;
    bool unresolved = false;
};

struct StagedConfig {
    double prescreen_threshold = 0.5; // 1.0 or above disables the stage
    int consensus_k = 1;              // 1 keeps every key that appears at all
    int repetition_r = 1;             // within-model replication support
    int repetition_n = 1;
};

// Cross-model context for the consensus stage. The batch being screened is
// one model's output for one prompt; the corpus holds everyone's.
struct CorpusContext {
    const CitationCorpus* corpus = nullptr;
    std::string model_id;
    std::string prompt_id;
};

using Resolver = std::function<score::ResolutionOutcome(const citeparse::CitationRecord&)>;

// Rejected records never reach the resolver; resolver failures surface as
// unresolved, which is a distinct final state from rejection. A null model
// skips the prescreen stage entirely (no outcome recorded for it).
inline std::vector<StageTrace> staged_pipeline(const std::vector<citeparse::CitationRecord>& records,
                                               const classify::TrainedModel* model,
                                               const Resolver& resolver, const StagedConfig& cfg,
                                               const score::ScoringConfig& scoring = {},
                                               const CorpusContext& ctx = {}) {
    if (cfg.consensus_k < 1) throw std::invalid_argument("consensus k must be at least 1");
    if (cfg.repetition_r < 1 || cfg.repetition_r > cfg.repetition_n)
        throw std::invalid_argument("need 1 <= r <= n");

    const bool use_corpus = ctx.corpus != nullptr && !ctx.prompt_id.empty();
    std::map<citeparse::CanonicalKey, int> cross, support;
    if (use_corpus) {
        cross = consensus_counts(*ctx.corpus, ctx.prompt_id);
        if (cfg.repetition_r > 1)
            support =
                repetition_counts(*ctx.corpus, ctx.model_id, ctx.prompt_id, cfg.repetition_n);
    }
    auto count_in = [](const std::map<citeparse::CanonicalKey, int>& m,
                       const citeparse::CanonicalKey& k) {
        auto it = m.find(k);
        return it == m.end() ? 0 : it->second;
    };

    std::vector<StageTrace> traces;
    traces.reserve(records.size());
    for (const auto& rec : records) {
        StageTrace trace;
        trace.citation_id = rec.citation_id;

        if (model) {
            double p = classify::predict(*model, features::extract_features(rec, scoring));
            bool prescreen_pass = cfg.prescreen_threshold >= 1.0 || p < cfg.prescreen_threshold;
            trace.outcomes.push_back({Stage::prescreen, prescreen_pass ? "pass" : "reject", p});
            if (!prescreen_pass) {
                trace.rejected_at = Stage::prescreen;
                traces.push_back(std::move(trace));
                continue;
            }
        }

        if (use_corpus) {
            auto key = ctx.corpus->unified_key(rec);
            bool pass = true;
            double value = count_in(cross, key);
            if (value < cfg.consensus_k) pass = false;
            if (pass && cfg.repetition_r > 1) {
                int sup = count_in(support, key);
                if (sup < cfg.repetition_r) {
                    pass = false;
                    value = sup; // the quantity that failed
                }
            }
            trace.outcomes.push_back({Stage::consensus, pass ? "pass" : "reject", value});
            if (!pass) {
                trace.rejected_at = Stage::consensus;
                traces.push_back(std::move(trace));
                continue;
            }
        }

        auto outcome = resolver(rec);
        if (outcome.status == score::ResolutionStatus::unresolved) {
            trace.outcomes.push_back({Stage::resolution, "unresolved", -1.0});
            trace.unresolved = true;
        } else {
            trace.outcomes.push_back(
                {Stage::resolution, "pass", static_cast<double>(outcome.composite)});
            trace.verdict = score::classify_verdict(outcome, scoring);
        }
        traces.push_back(std::move(trace));
    }
    return traces;
}

inline std::vector<StageTrace> staged_pipeline(const std::vector<citeparse::CitationRecord>& records,
                                               const classify::TrainedModel& model,
                                               const Resolver& resolver, const StagedConfig& cfg,
                                               const score::ScoringConfig& scoring = {},
                                               const CorpusContext& ctx = {}) {
    return staged_pipeline(records, &model, resolver, cfg, scoring, ctx);
}

} // namespace citeaudit::filters
