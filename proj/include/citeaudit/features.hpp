#pragma once

// The 26-dimension text feature vector the pre-screen classifier runs on.
// Everything here is computable offline from the parsed citation alone;
// cross-model counts are deliberately kept out of the vector.

#include <array>
#include <charconv>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "citeparse.hpp"
#include "score.hpp"
#include "unicode.hpp"

namespace citeaudit::features {

inline constexpr const char* kSchemaVersion = "fv26.v1";
inline constexpr size_t kFeatureCount = 26;

struct FeatureName {
    const char* name;
    const char* category;
};

inline const std::array<FeatureName, kFeatureCount>& schema() {
    static const std::array<FeatureName, kFeatureCount> names = {{
        {"t_word_count", "title"},
        {"t_char_count", "title"},
        {"t_has_colon", "title"},
        {"t_has_question", "title"},
        {"t_has_digit", "title"},
        {"t_has_acronym", "title"},
        {"t_cap_ratio", "title"},
        {"t_leading_article", "title"},
        {"t_template_pattern", "title"},
        {"t_toward_prefix", "title"},
        {"a_count", "author"},
        {"a_char_len", "author"},
        {"a_has_etal", "author"},
        {"a_initial_diversity", "author"},
        {"y_round", "year"},
        {"y_future", "year"},
        {"y_missing", "year"},
        {"y_recency", "year"},
        {"j_word_count", "journal"},
        {"j_char_count", "journal"},
        {"j_generic_name", "journal"},
        {"j_has_international", "journal"},
        {"j_empty", "journal"},
        {"d_present", "doi"},
        {"d_format_valid", "doi"},
        {"d_char_len", "doi"},
    }};
    return names;
}

inline size_t feature_index(std::string_view name) {
    const auto& s = schema();
    for (size_t i = 0; i < s.size(); ++i)
        if (name == s[i].name) return i;
    throw std::invalid_argument("unknown feature: " + std::string(name));
}

enum class Label { real = 0, hallucinated = 1 };

constexpr const char* to_string(Label l) {
    return l == Label::real ? "real" : "hallucinated";
}

inline Label label_from_string(std::string_view name) {
    if (name == "real") return Label::real;
    if (name == "hallucinated") return Label::hallucinated;
    throw std::invalid_argument("unknown label: " + std::string(name));
}

struct FeatureVector {
    std::string citation_id;
    std::array<double, kFeatureCount> values{};
    std::optional<Label> label;
};

// Pattern and venue lists ship as versioned data files so the schema stays
// reproducible; the compiled defaults below mirror those files exactly.
struct FeatureLexicon {
    std::string templates_version;
    std::vector<std::string> title_template_patterns;
    std::string generic_version;
    std::vector<std::string> generic_journals;

    // built members
    std::vector<std::regex> compiled_templates;
    std::set<std::string> generic_keys;

    void finalize() {
        compiled_templates.clear();
        for (const auto& p : title_template_patterns)
            compiled_templates.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
        generic_keys.clear();
        for (const auto& g : generic_journals)
            generic_keys.insert(citeparse::canonical_title_key(g).key);
    }
};

inline FeatureLexicon build_feature_lexicon(std::vector<std::string> templates,
                                            std::vector<std::string> generics,
                                            std::string templates_version,
                                            std::string generic_version) {
    FeatureLexicon lex;
    lex.title_template_patterns = std::move(templates);
    lex.generic_journals = std::move(generics);
    lex.templates_version = std::move(templates_version);
    lex.generic_version = std::move(generic_version);
    lex.finalize();
    return lex;
}

inline std::vector<std::string> default_title_templates() {
    return {
        R"(\b((a|an|the)\s+)?(survey|review|framework|study|approach|analysis|overview)\s+(of|on|for)\b)",
        R"(\b(a|an)\s+(novel|new|comprehensive|unified|systematic|holistic)\s+(approach|framework|method|model|survey|review|study|analysis)\b)",
        R"(:\s*(a|an)\s+(systematic\s+)?(survey|review|overview|meta-analysis|case\s+study)\b)",
        R"(\b(the\s+)?role\s+of\b[^:]*\bin\b)",
        R"(\bapplications?\s+of\b.*\b(in|to|for)\b)",
        R"(\b(machine|deep)\s+learning\s+(approaches?|methods?|techniques?)\s+(for|in|to)\b)",
        R"(\b(challenges|opportunities|trends|advances|perspectives)\s+(in|of|for)\b)",
    };
}

inline std::vector<std::string> default_generic_journals() {
    return {
        "Journal of Medicine",
        "Journal of Medical Research",
        "International Journal of Medical Research",
        "Journal of Advanced Research",
        "International Journal of Advanced Research",
        "Journal of Applied Sciences",
        "Journal of Science",
        "Journal of Research",
        "Journal of Scientific Research",
        "International Journal of Scientific Research",
        "International Journal of Science and Research",
        "International Journal of Research",
        "Research Journal",
        "Journal of Clinical Research",
        "Journal of Environmental Studies",
        "Journal of Educational Research",
        "Journal of Social Sciences",
        "Journal of Engineering",
        "Journal of Management",
        "Journal of Computer Science",
        "International Journal of Computer Science",
        "Journal of Modern Science",
        "Journal of Interdisciplinary Studies",
        "American Journal of Research",
        "Global Journal of Research",
        "World Journal of Research",
    };
}

inline const FeatureLexicon& default_feature_lexicon() {
    static const FeatureLexicon lex =
        build_feature_lexicon(default_title_templates(), default_generic_journals(),
                              "templates.v1", "generic-journals.v1");
    return lex;
}

namespace detail {

inline std::vector<std::string> ws_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline size_t codepoint_count(std::string_view s) { return uni::decode_utf8(s).size(); }

inline bool has_acronym_token(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
        int run = 0;
        for (char c : t) {
            if (c >= 'A' && c <= 'Z') {
                if (++run >= 2) return true;
            } else {
                run = 0;
            }
        }
    }
    return false;
}

inline bool cp_is_letter(uint32_t cp) {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    return !uni::is_punct_cp(cp) && !(cp >= '0' && cp <= '9');
}

inline bool cp_is_upper(uint32_t cp) { return uni::lower_cp(cp) != cp; }

// fraction of words starting with a letter whose first letter is uppercase
inline double cap_ratio(const std::vector<std::string>& tokens) {
    size_t alpha_words = 0, capped = 0;
    for (const auto& t : tokens) {
        auto cps = uni::decode_utf8(t);
        size_t i = 0;
        while (i < cps.size() && !cp_is_letter(cps[i])) ++i;  // skip quotes etc.
        if (i == cps.size()) continue;
        ++alpha_words;
        if (cp_is_upper(cps[i])) ++capped;
    }
    if (alpha_words == 0) return 0.0;
    return static_cast<double>(capped) / static_cast<double>(alpha_words);
}

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline bool first_token_in(const std::vector<std::string>& tokens,
                           std::initializer_list<const char*> words) {
    if (tokens.empty()) return false;
    std::string head = lower_ascii(tokens.front());
    while (!head.empty() && !((head.back() >= 'a' && head.back() <= 'z') ||
                              (head.back() >= '0' && head.back() <= '9')))
        head.pop_back();
    while (!head.empty() && !((head.front() >= 'a' && head.front() <= 'z') ||
                              (head.front() >= '0' && head.front() <= '9')))
        head.erase(head.begin());
    for (const char* w : words)
        if (head == w) return true;
    return false;
}

inline bool raw_mentions_etal(std::string_view raw) {
    static const std::regex re(R"(\bet\s+al\b)", std::regex::icase);
    return std::regex_search(raw.begin(), raw.end(), re);
}

inline bool contains_ci(std::string_view hay, std::string_view needle) {
    std::string h = lower_ascii(hay), n = lower_ascii(needle);
    return h.find(n) != std::string::npos;
}

inline const std::regex& doi_shape() {
    static const std::regex re(R"(^10\.\d{4,9}/\S+$)");
    return re;
}

} // namespace detail

inline FeatureVector extract_features(const citeparse::CitationRecord& record,
                                      const score::ScoringConfig& config = {},
                                      const FeatureLexicon& lex = default_feature_lexicon()) {
    FeatureVector fv;
    fv.citation_id = record.citation_id;
    auto& v = fv.values;
    size_t k = 0;

    // title
    auto t_tokens = detail::ws_tokens(record.title);
    v[k++] = static_cast<double>(t_tokens.size());
    v[k++] = static_cast<double>(detail::codepoint_count(record.title));
    v[k++] = record.title.find(':') != std::string::npos ? 1.0 : 0.0;
    v[k++] = record.title.find('?') != std::string::npos ? 1.0 : 0.0;
    bool digit = false;
    for (char c : record.title)
        if (c >= '0' && c <= '9') digit = true;
    v[k++] = digit ? 1.0 : 0.0;
    v[k++] = detail::has_acronym_token(t_tokens) ? 1.0 : 0.0;
    v[k++] = detail::cap_ratio(t_tokens);
    v[k++] = detail::first_token_in(t_tokens, {"a", "an", "the"}) ? 1.0 : 0.0;
    bool templ = false;
    for (const auto& re : lex.compiled_templates)
        if (std::regex_search(record.title, re)) templ = true;
    v[k++] = templ ? 1.0 : 0.0;
    v[k++] = detail::first_token_in(t_tokens, {"toward", "towards"}) ? 1.0 : 0.0;

    // authors
    v[k++] = static_cast<double>(record.authors.size());
    std::string joined;
    for (const auto& a : record.authors) {
        if (!joined.empty()) joined += ", ";
        joined += a.full;
    }
    v[k++] = static_cast<double>(detail::codepoint_count(joined));
    v[k++] = detail::raw_mentions_etal(record.raw) ? 1.0 : 0.0;
    std::set<uint32_t> initials;
    for (const auto& a : record.authors) {
        auto cps = uni::decode_utf8(uni::nfkc_fold(a.last_name));
        if (!cps.empty()) initials.insert(uni::lower_cp(cps.front()));
    }
    v[k++] = static_cast<double>(initials.size());

    // year
    if (record.year) {
        int y = *record.year;
        v[k++] = (y % 5 == 0) ? 1.0 : 0.0;
        v[k++] = (y > config.reference_year) ? 1.0 : 0.0;
        v[k++] = 0.0;
        v[k++] = static_cast<double>(config.reference_year - y);
    } else {
        v[k++] = 0.0;
        v[k++] = 0.0;
        v[k++] = 1.0;
        v[k++] = 0.0;
    }

    // journal
    auto j_tokens = detail::ws_tokens(record.venue);
    v[k++] = static_cast<double>(j_tokens.size());
    v[k++] = static_cast<double>(detail::codepoint_count(record.venue));
    v[k++] = lex.generic_keys.count(citeparse::canonical_title_key(record.venue).key) ? 1.0 : 0.0;
    v[k++] = detail::contains_ci(record.venue, "international") ? 1.0 : 0.0;
    v[k++] = record.venue.empty() ? 1.0 : 0.0;

    // doi
    bool present = record.doi.has_value() && !record.doi->empty();
    v[k++] = present ? 1.0 : 0.0;
    v[k++] = (present && std::regex_match(*record.doi, detail::doi_shape())) ? 1.0 : 0.0;
    v[k++] = present ? static_cast<double>(detail::codepoint_count(*record.doi)) : 0.0;

    return fv;
}

// Number of distinct models whose output contains the key. Lives here so the
// consensus filter can use it, but it is never part of FeatureVector: the
// classifier must stay blind to cross-model signal.
inline int cross_model_count(
    const citeparse::CanonicalKey& key,
    const std::map<std::string, std::set<citeparse::CanonicalKey>>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("cross_model_count needs a non-empty corpus");
    int n = 0;
    for (const auto& [model, keys] : corpus)
        if (keys.count(key)) ++n;
    return n;
}

// ---- CSV serialization ----------------------------------------------------
// Header: citation_id[,model_id],<26 schema names>[,label].

namespace detail {

inline std::string format_value(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::logic_error("feature value formatting failed");
    return std::string(buf, p);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

struct FeatureTable {
    std::vector<FeatureVector> rows;
    std::vector<std::string> model_ids; // empty when the file had no model_id column
    bool has_labels = false;
};

inline void write_features_csv(std::ostream& os, const std::vector<FeatureVector>& rows,
                               const std::vector<std::string>* model_ids = nullptr) {
    if (model_ids && model_ids->size() != rows.size())
        throw std::invalid_argument("model_ids size must match rows");
    bool labeled = !rows.empty();
    for (const auto& r : rows)
        if (!r.label) labeled = false;

    os << "citation_id";
    if (model_ids) os << ",model_id";
    for (const auto& f : schema()) os << ',' << f.name;
    if (labeled) os << ",label";
    os << '\n';

    for (size_t i = 0; i < rows.size(); ++i) {
        os << rows[i].citation_id;
        if (model_ids) os << ',' << (*model_ids)[i];
        for (double v : rows[i].values) os << ',' << detail::format_value(v);
        if (labeled) os << ',' << to_string(*rows[i].label);
        os << '\n';
    }
}

inline FeatureTable read_features_csv(std::istream& is, std::string_view source = "<csv>") {
    FeatureTable table;
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error(std::string(source) + ": empty feature file");
    auto header = detail::split_csv_line(line);

    size_t col = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error(std::string(source) + ": " + msg);
    };
    if (header.empty() || header[col] != "citation_id") fail("first column must be citation_id");
    ++col;
    bool has_model = col < header.size() && header[col] == "model_id";
    if (has_model) ++col;
    for (const auto& f : schema()) {
        if (col >= header.size() || header[col] != f.name)
            fail(std::string("expected feature column ") + f.name);
        ++col;
    }
    bool has_label = col < header.size() && header[col] == "label";
    if (has_label) ++col;
    if (col != header.size()) fail("unexpected trailing columns");
    table.has_labels = has_label;

    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            fail("line " + std::to_string(lineno) + ": wrong column count");
        size_t c = 0;
        FeatureVector fv;
        fv.citation_id = cells[c++];
        if (has_model) table.model_ids.push_back(cells[c++]);
        for (size_t i = 0; i < kFeatureCount; ++i) {
            const std::string& cell = cells[c++];
            double value = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || p != cell.data() + cell.size())
                fail("line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            fv.values[i] = value;
        }
        if (has_label) fv.label = label_from_string(cells[c++]);
        table.rows.push_back(std::move(fv));
    }
    return table;
}

// ---- versioned line-list data files ---------------------------------------
// Format: '# version: <tag>' header, then one entry per line; '#' comments
// and blank lines ignored.

struct LineList {
    std::string version;
    std::vector<std::string> entries;
};

inline LineList load_line_list(std::istream& is, std::string_view source = "<list>") {
    LineList out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        size_t b = trimmed.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        size_t e = trimmed.find_last_not_of(" \t");
        trimmed = trimmed.substr(b, e - b + 1);
        if (trimmed[0] == '#') {
            const std::string tag = "# version:";
            if (trimmed.rfind(tag, 0) == 0 && out.version.empty()) {
                std::string v = trimmed.substr(tag.size());
                size_t vb = v.find_first_not_of(" \t");
                if (vb != std::string::npos) out.version = v.substr(vb);
            }
            continue;
        }
        out.entries.push_back(trimmed);
    }
    if (out.version.empty())
        throw std::runtime_error(std::string(source) + ": missing '# version:' header");
    return out;
}

} // namespace citeaudit::features
