#pragma once
// Two-stage reference extraction and normalization.
//
// Stage one finds reference-like substrings in free text (numbered
// bibliography entries, author-year reference lines, DOI/URL-bearing lines,
// inline parenthetical citations). A conservative mode post-filters the
// standard extractions by requiring at least two independent bibliographic
// signals, so conservative output is a subset of standard output by
// construction.
//
// Stage two normalizes one extracted string into a structured record:
// authors (with surname extraction), title, venue, 4-digit year, DOI,
// volume/pages. Fields the string does not contain stay empty; nothing is
// invented.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "citeaudit/unicode.hpp"

namespace citeaudit::citeparse {

enum class Condition { parametric, candidate_pool, unprompted };
enum class Framing { recent, seminal, none };

inline const char* to_string(Condition c) {
    switch (c) {
        case Condition::parametric: return "parametric";
        case Condition::candidate_pool: return "candidate_pool";
        default: return "unprompted";
    }
}
inline const char* to_string(Framing f) {
    switch (f) {
        case Framing::recent: return "recent";
        case Framing::seminal: return "seminal";
        default: return "none";
    }
}

inline Condition condition_from_string(const std::string& s) {
    if (s == "parametric") return Condition::parametric;
    if (s == "candidate_pool") return Condition::candidate_pool;
    if (s == "unprompted") return Condition::unprompted;
    throw std::invalid_argument("unknown condition: " + s);
}

inline Framing framing_from_string(const std::string& s) {
    if (s == "recent") return Framing::recent;
    if (s == "seminal") return Framing::seminal;
    if (s == "none") return Framing::none;
    throw std::invalid_argument("unknown framing: " + s);
}

struct RawResponse {
    std::string response_id;
    std::string model_id;
    std::string prompt_id;
    Condition condition = Condition::parametric;
    Framing framing = Framing::none;
    std::string domain;
    int replication = 1;
    std::string text;
};

struct Author {
    std::string full;
    std::string last_name;
};

struct CitationRecord {
    std::string citation_id;
    std::string source_response;
    std::string raw;
    std::vector<Author> authors;
    std::string title;
    std::string venue;
    std::optional<int> year;
    std::optional<std::string> doi;
    std::optional<std::string> volume_pages;
};

struct CanonicalKey {
    std::string key;
    bool operator==(const CanonicalKey&) const = default;
    auto operator<=>(const CanonicalKey&) const = default;
};

struct ParseFailure : std::runtime_error {
    explicit ParseFailure(const std::string& what) : std::runtime_error(what) {}
};

enum class ExtractionMode { standard, conservative };

// ---------------------------------------------------------------------------
// Lexicon: venue names and cue words used by the venue detector. The same
// lists ship under data/ for inspection; a test keeps them in sync.

struct Lexicon {
    std::string version;
    std::vector<std::string> known_venues;  // matched case-insensitively on word boundaries
    std::vector<std::string> venue_cues;    // words that mark a journal/conference phrase
};

inline const Lexicon& default_lexicon() {
    static const Lexicon lex = [] {
        Lexicon l;
        l.version = "lexicon.v1";
        l.known_venues = {
            "Advances in Neural Information Processing Systems",
            "Proceedings of the National Academy of Sciences",
            "IEEE Transactions on Pattern Analysis and Machine Intelligence",
            "International Conference on Machine Learning",
            "International Conference on Learning Representations",
            "New England Journal of Medicine",
            "Journal of Machine Learning Research",
            "Communications of the ACM",
            "ACM Computing Surveys",
            "Nature Machine Intelligence",
            "Nature Communications",
            "Nature Climate Change",
            "Nature Neuroscience",
            "Nature Medicine",
            "Nature Methods",
            "Nature",
            "Science",
            "Cell",
            "The Lancet",
            "Lancet",
            "NEJM",
            "N Engl J Med",
            "Nat Med",
            "Nat Commun",
            "Sci Rep",
            "Sci Data",
            "Scientific Data",
            "Proc Natl Acad Sci",
            "JAMA",
            "BMJ",
            "PNAS",
            "PLOS ONE",
            "PLoS ONE",
            "Scientific Reports",
            "Bioinformatics",
            "Nucleic Acids Research",
            "Neural Computation",
            "Computational Linguistics",
            "Annalen der Physik",
            "Econometrica",
            "Psychological Science",
            "NeurIPS",
            "NIPS",
            "ICML",
            "ICLR",
            "AAAI",
            "IJCAI",
            "ACL",
            "EMNLP",
            "NAACL",
            "CVPR",
            "ICCV",
            "ECCV",
            "KDD",
            "SIGIR",
            "JMLR",
            "arXiv",
            "bioRxiv",
            "medRxiv",
            "IEEE Access",
            "Engineering Structures",
            "Journal of Structural Engineering",
            "Earthquake Engineering & Structural Dynamics",
            "Construction and Building Materials",
            "Automation in Construction",
            "Computers & Structures",
            "Renewable and Sustainable Energy Reviews",
            "Environmental Science & Technology",
            "Global Change Biology",
            "Climatic Change",
            "Water Research",
            "Journal of Cleaner Production",
            "Science of the Total Environment",
            "Remote Sensing of Environment",
            "Applied Energy",
            "Energy and Buildings",
        };
        l.venue_cues = {"Journal",  "Proceedings", "Transactions", "Conference", "Letters",
                        "Review",   "Reviews",     "Reports",      "Annals",     "Bulletin",
                        "Magazine", "Quarterly",   "Advances",     "Symposium",  "Workshop",
                        "Surveys",  "Research"};
        return l;
    }();
    return lex;
}

inline constexpr const char* kExtractionPatternVersion = "patterns.v1";

// ---------------------------------------------------------------------------
// small helpers

namespace detail {

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '\n') {
            std::string line = s.substr(start, i - start);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            out.push_back(std::move(line));
            start = i + 1;
        }
    }
    return out;
}

inline std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string hex16(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

// pattern sources shared with the shipped inventory file, so the data dir
// stays in lockstep with the code
inline constexpr const char* kPatDoi = R"(10\.\d{4,9}/[^\s"'<>]+)";
inline constexpr const char* kPatUrl = R"((https?://|www\.)[^\s"'<>)]+)";
inline constexpr const char* kPatNumberedMarker = R"(^\s*(\[\d{1,3}\]|\(\d{1,3}\)|\d{1,3}\.)\s+)";
inline constexpr const char* kPatParenYear = R"(\((1[5-9]\d{2}|20\d{2})[a-z]?\))";
inline constexpr const char* kPatAuthorYear =
    R"(([A-Z][A-Za-z'\-]+|al\.?)[,.]?\s{0,2}\((1[5-9]\d{2}|20\d{2})[a-z]?\))";
inline constexpr const char* kPatAuthorYearFlat =
    R"([A-Z][A-Za-z'\-]+,\s*([A-Z]\.[\s-]*)+,?\s*(1[5-9]\d{2}|20\d{2})\b)";
inline constexpr const char* kPatInlineParen =
    R"(\(\s*[A-Z][A-Za-z'\-]+(\s+(et\s+al\.?|&\s*[A-Z][A-Za-z'\-]+|and\s+[A-Z][A-Za-z'\-]+))?\s*,\s*(1[5-9]\d{2}|20\d{2})[a-z]?(\s*;[^()]{0,80})?\s*\))";
inline constexpr const char* kPatVolumePages =
    R"((\bvol\.?\s*\d+(,\s*no\.?\s*\d+)?(,\s*pp?\.\s*\d+\s*-+\s*\d+)?)|(\d{1,4}\s*\(\d{1,5}\)\s*[,:]\s*\d+(\s*-+\s*\d+)?)|(\bpp?\.\s*\d+\s*-+\s*\d+)|(\b(?!(1[5-9]\d\d|20\d\d)\b)\d{1,4}\s*,\s*\d{1,5}\s*-+\s*\d{1,5}\b)|(\b(?!(1[5-9]\d\d|20\d\d)\b)\d{1,4}\s*:\s*\d{1,5}\s*-+\s*\d{1,5}\b)|(\b(?!(1[5-9]\d\d|20\d\d)\b)\d{1,4}\s*,\s*\d{5,7}(?![\d-])))";
inline constexpr const char* kPatBoldSpan = R"(\*\*([^*]{4,240})\*\*)";
inline constexpr const char* kPatQuotedSpan = "\"([^\"]{4,240})\"";

// regexes compiled once; all input has been nfkc-folded, so typographic
// quotes and dashes are already ASCII
inline const std::regex& re_doi() {
    static const std::regex re(kPatDoi);
    return re;
}
inline const std::regex& re_url() {
    static const std::regex re(kPatUrl);
    return re;
}
inline const std::regex& re_numbered_marker() {
    static const std::regex re(kPatNumberedMarker);
    return re;
}
inline const std::regex& re_paren_year() {
    static const std::regex re(kPatParenYear);
    return re;
}
// capitalized token or "al." directly before a parenthesized year
inline const std::regex& re_author_year() {
    static const std::regex re(kPatAuthorYear);
    return re;
}
// "Surname, F., 2020" style without parentheses
inline const std::regex& re_author_year_flat() {
    static const std::regex re(kPatAuthorYearFlat);
    return re;
}
// inline parenthetical citation: (Smith, 2017) / (Smith et al., 2017; Lee, 2019)
inline const std::regex& re_inline_paren() {
    static const std::regex re(kPatInlineParen);
    return re;
}
inline const std::regex& re_volume_pages() {
    // longest combinations first; bare 4-digit years are excluded from the
    // volume slot so "2017, 5998-6008" is not mistaken for volume/pages
    static const std::regex re(kPatVolumePages);
    return re;
}
inline const std::regex& re_bold_span() {
    static const std::regex re(kPatBoldSpan);
    return re;
}
inline const std::regex& re_quoted_span() {
    static const std::regex re(kPatQuotedSpan);
    return re;
}

inline bool has_year_token(const std::string& s) {
    // token-wise scan so page ranges and DOI fragments do not count
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < n && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) {
            std::string tok = s.substr(i, j - i);
            if (tok.find('/') == std::string::npos && tok.find("10.") != 0 &&
                tok.find("http") == std::string::npos) {
                std::string digits;
                bool clean = true;
                for (char c : tok) {
                    if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
                    else if (!std::ispunct(static_cast<unsigned char>(c))) { clean = false; break; }
                }
                if (clean && digits.size() == 4) {
                    int y = std::stoi(digits);
                    if (y >= 1500 && y <= 2100) return true;
                }
            }
        }
        i = j;
    }
    return false;
}

inline std::optional<std::string> find_doi(const std::string& s) {
    std::smatch m;
    if (!std::regex_search(s, m, re_doi())) return std::nullopt;
    std::string doi = m.str(0);
    while (!doi.empty() && (doi.back() == '.' || doi.back() == ',' || doi.back() == ';' ||
                            doi.back() == ')' || doi.back() == ']' || doi.back() == '"' ||
                            doi.back() == '\''))
        doi.pop_back();
    for (char& c : doi) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return doi;
}

inline std::string strip_list_marker(const std::string& line) {
    std::string s = trim(line);
    // a bullet is -, * or + followed by whitespace; bold ** spans survive
    while (s.size() >= 2 && (s[0] == '-' || s[0] == '*' || s[0] == '+') &&
           (s[1] == ' ' || s[1] == '\t'))
        s = trim(s.substr(2));
    if (s == "-" || s == "*" || s == "+") return "";
    std::smatch m;
    if (std::regex_search(s, m, re_numbered_marker()) && m.position(0) == 0)
        s = trim(s.substr(static_cast<size_t>(m.length(0))));
    return s;
}

inline std::string strip_emphasis(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (c != '*' && c != '_') out.push_back(c);
    return out;
}

inline std::string strip_edge_punct(std::string w) {
    while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back())) && w.back() != '-')
        w.pop_back();
    while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.front())) && w.front() != '-')
        w.erase(w.begin());
    return w;
}

inline bool is_capitalized_word(const std::string& w) {
    if (w.empty()) return false;
    unsigned char c = static_cast<unsigned char>(w[0]);
    return (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline bool is_connector_word(const std::string& w) {
    static const std::vector<std::string> conn = {"of",  "the", "and", "on",  "in",
                                                  "for", "der", "de",  "del", "da"};
    return std::find(conn.begin(), conn.end(), w) != conn.end();
}

inline bool is_all_digits(const std::string& w) {
    if (w.empty()) return false;
    for (char c : w)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

// case-insensitive word-boundary search; returns position or npos
inline size_t find_word_ci(const std::string& haystack, const std::string& needle) {
    if (needle.empty() || haystack.size() < needle.size()) return std::string::npos;
    auto lower = [](unsigned char c) { return static_cast<char>(std::tolower(c)); };
    const auto is_word = [](unsigned char c) { return std::isalnum(c) != 0; };
    for (size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool ok = true;
        for (size_t k = 0; k < needle.size(); ++k) {
            if (lower(static_cast<unsigned char>(haystack[i + k])) !=
                lower(static_cast<unsigned char>(needle[k]))) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        if (i > 0 && is_word(static_cast<unsigned char>(haystack[i - 1]))) continue;
        size_t end = i + needle.size();
        if (end < haystack.size() && is_word(static_cast<unsigned char>(haystack[end]))) continue;
        return i;
    }
    return std::string::npos;
}

// Venue detection. Two passes: (1) the known-venue list, longest hit wins;
// (2) a cue word (Journal, Proceedings, ...) expanded left and right over
// capitalized/connector words -- commas are crossed going right so
// "Conference on Fairness, Accountability, and Transparency" survives, but
// never going left. The longer of the two candidates is returned.
inline std::string detect_venue(const std::string& text, const Lexicon& lex) {
    const std::string s = strip_emphasis(text);

    std::string from_list;
    {
        size_t best_pos = std::string::npos, best_len = 0;
        for (const auto& v : lex.known_venues) {
            size_t pos = find_word_ci(s, v);
            if (pos != std::string::npos && v.size() > best_len) {
                best_pos = pos;
                best_len = v.size();
            }
        }
        if (best_pos != std::string::npos) from_list = s.substr(best_pos, best_len);
    }

    std::string from_cue;
    {
        const auto words = split_words(s);
        for (size_t i = 0; i < words.size() && from_cue.empty(); ++i) {
            const std::string w = strip_edge_punct(words[i]);
            bool is_cue = false;
            for (const auto& cue : lex.venue_cues)
                if (w == cue) is_cue = true;
            if (!is_cue) continue;

            size_t lo = i, hi = i;
            // left: capitalized words only, stop at punctuation-ending
            // predecessors and at "In"
            while (lo > 0) {
                const std::string& prev = words[lo - 1];
                const std::string pc = strip_edge_punct(prev);
                if (pc.empty() || pc == "In" || pc == "in") break;
                if (!is_capitalized_word(pc) && !is_connector_word(pc)) break;
                char back = prev.back();
                if (back == ',' || back == ';' || back == '.' || back == ':' || back == '-') break;
                --lo;
            }
            // right: capitalized/connector words; digits allowed when a
            // capitalized word follows (conference years); a word ending in
            // sentence punctuation is included and ends the span
            while (hi + 1 < words.size()) {
                char back = words[hi].back();
                if (back == '.' || back == ';' || back == ':') break;
                const std::string& next = words[hi + 1];
                const std::string nc = strip_edge_punct(next);
                if (nc.empty()) break;
                if (is_all_digits(nc)) {
                    std::string after =
                        hi + 2 < words.size() ? strip_edge_punct(words[hi + 2]) : std::string{};
                    if (!after.empty() && is_capitalized_word(after) && !is_all_digits(after) &&
                        next.back() != '.' && next.back() != ';') {
                        ++hi;
                        continue;
                    }
                    break;
                }
                if (!is_capitalized_word(nc) && !is_connector_word(nc)) break;
                ++hi;
            }
            std::vector<std::string> phrase;
            for (size_t k = lo; k <= hi; ++k) {
                std::string pw = strip_edge_punct(words[k]);
                if (!pw.empty()) phrase.push_back(pw);
            }
            while (!phrase.empty() && is_connector_word(phrase.back())) phrase.pop_back();
            while (!phrase.empty() &&
                   (is_connector_word(phrase.front()) || phrase.front() == "In" ||
                    phrase.front() == "in"))
                phrase.erase(phrase.begin());
            if (phrase.size() < 2) continue;
            std::string joined;
            for (size_t k = 0; k < phrase.size(); ++k) {
                if (k) joined.push_back(' ');
                joined += phrase[k];
            }
            from_cue = joined;
        }
    }

    return from_cue.size() > from_list.size() ? from_cue : from_list;
}

inline bool looks_like_initials(const std::string& tok) {
    std::string t;
    for (char c : tok)
        if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
    if (t.empty() || t.size() > 9) return false;
    int letters = 0;
    for (char c : t) {
        if (c >= 'A' && c <= 'Z') ++letters;
        else if (c == '.' || c == '-') continue;
        else return false;
    }
    return letters >= 1 && letters <= 4;
}

struct AuthorListResult {
    std::vector<Author> authors;
    bool et_al = false;
    bool plausible = false;
};

inline std::string last_alpha_word(const std::string& name) {
    auto words = split_words(name);
    for (auto it = words.rbegin(); it != words.rend(); ++it) {
        std::string w = strip_edge_punct(*it);
        if (w.empty()) continue;
        bool alpha = false;
        for (char c : w)
            if (std::isalpha(static_cast<unsigned char>(c)) ||
                static_cast<unsigned char>(c) >= 0x80)
                alpha = true;
        if (alpha && !looks_like_initials(w)) return w;
        if (alpha && words.size() == 1) return w;
    }
    return words.empty() ? std::string{} : strip_edge_punct(words.back());
}

// Surname heuristic: "Last, F." takes the token before the comma; "F. Last"
// and "First Last" take the final non-initial token; hyphenated surnames
// stay intact. Organisations ("OpenAI") pass through whole.
inline AuthorListResult parse_author_list(const std::string& segment) {
    AuthorListResult res;
    std::string s = trim(strip_emphasis(segment));
    if (s.rfind("by ", 0) == 0 || s.rfind("By ", 0) == 0) s = trim(s.substr(3));

    static const std::regex re_etal(R"(\bet\s+al\b\.?)");
    std::smatch m;
    if (std::regex_search(s, m, re_etal)) {
        res.et_al = true;
        s = trim(s.substr(0, static_cast<size_t>(m.position(0))));
    }
    static const std::regex re_and(R"(\s+(and|&)\s+)");
    const bool had_conjunction = std::regex_search(s, re_and);
    s = std::regex_replace(s, re_and, ", ");
    while (!s.empty() && (s.back() == ',' || s.back() == ';' || s.back() == '.')) {
        if (s.back() == '.' && s.size() >= 2 &&
            std::isupper(static_cast<unsigned char>(s[s.size() - 2])))
            break;  // keep a trailing initial's period
        s.pop_back();
    }

    std::vector<std::string> tokens;
    {
        std::string cur;
        for (char c : s) {
            if (c == ',' || c == ';') {
                tokens.push_back(trim(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        tokens.push_back(trim(cur));
    }
    std::vector<std::string> nonempty;
    for (auto& t : tokens)
        if (!t.empty()) nonempty.push_back(t);

    // "Marcus, Gary" / "Vaswani, Ashish": a lone Last, First pair (no
    // conjunction anywhere) is one person, not two surnames
    if (nonempty.size() == 2 && !had_conjunction && split_words(nonempty[0]).size() == 1 &&
        split_words(nonempty[1]).size() == 1 && is_capitalized_word(nonempty[0]) &&
        is_capitalized_word(nonempty[1]) && !looks_like_initials(nonempty[0]) &&
        !looks_like_initials(nonempty[1])) {
        Author a;
        a.full = nonempty[0] + ", " + nonempty[1];
        a.last_name = strip_edge_punct(nonempty[0]);
        res.authors.push_back(std::move(a));
        res.plausible = true;
        return res;
    }

    int bad = 0, good = 0;
    bool pending_surname = false;
    for (const auto& tok : nonempty) {
        if (looks_like_initials(tok)) {
            if (pending_surname && !res.authors.empty()) {
                res.authors.back().full += ", " + tok;
                pending_surname = false;
                ++good;
            }
            continue;
        }
        auto words = split_words(tok);
        if (words.empty() || words.size() > 4) {
            ++bad;
            pending_surname = false;
            continue;
        }
        bool name_like = true;
        for (const auto& word : words) {
            std::string w = word;
            while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back())) &&
                   w.back() != '-' && w.back() != '.')
                w.pop_back();
            if (w.empty()) continue;
            if (!is_capitalized_word(w) && !looks_like_initials(w) && !is_connector_word(w) &&
                !(w == "van" || w == "von" || w == "den" || w == "al" || w == "bin"))
                name_like = false;
        }
        if (!name_like) {
            ++bad;
            pending_surname = false;
            continue;
        }
        Author a;
        a.full = tok;
        a.last_name = last_alpha_word(tok);
        if (a.last_name.empty()) {
            ++bad;
            continue;
        }
        pending_surname = words.size() == 1 && !looks_like_initials(words[0]);
        res.authors.push_back(std::move(a));
        ++good;
        if (res.authors.size() >= 25) break;
    }
    res.plausible = !res.authors.empty() && bad <= good;
    if (!res.plausible) res.authors.clear();
    return res;
}

inline std::optional<int> pick_year(const std::string& s) {
    std::smatch m;
    if (std::regex_search(s, m, re_paren_year())) return std::stoi(m.str(1));
    // Vancouver "2017;542(...)" glues the year to the volume
    static const std::regex re_vanc_year(R"((^|[\s.(])(1[5-9]\d{2}|20\d{2})\s*;\s*\d)");
    if (std::regex_search(s, m, re_vanc_year)) return std::stoi(m.str(2));
    // otherwise the last standalone year-shaped token
    std::optional<int> found;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) {
            std::string tok = s.substr(i, j - i);
            if (tok.find('/') == std::string::npos && tok.find("10.") != 0 &&
                tok.find("http") == std::string::npos) {
                std::string digits;
                bool clean = true;
                for (char c : tok) {
                    if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
                    else if (!std::ispunct(static_cast<unsigned char>(c))) { clean = false; break; }
                }
                if (clean && digits.size() == 4) {
                    int y = std::stoi(digits);
                    if (y >= 1500 && y <= 2100) found = y;
                }
            }
        }
        i = j;
    }
    return found;
}

// first sentence-like run of a reference fragment; stops at ". " (unless the
// period closes an initial or a common abbreviation) or at " - "
inline std::string first_sentence(const std::string& s) {
    static const std::vector<std::string> abbrev = {"st", "vs", "no", "vol",  "fig", "al",
                                                    "eg", "ie", "dr", "mr",   "mrs", "jr",
                                                    "sr", "ed", "eds", "proc", "etc"};
    for (size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i] == '.' && s[i + 1] == ' ') {
            if (i >= 1 && std::isupper(static_cast<unsigned char>(s[i - 1])) &&
                (i < 2 || !std::isalpha(static_cast<unsigned char>(s[i - 2]))))
                continue;  // "J. " style initial
            size_t w = i;
            while (w > 0 && std::isalpha(static_cast<unsigned char>(s[w - 1]))) --w;
            std::string word = s.substr(w, i - w);
            for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            if (std::find(abbrev.begin(), abbrev.end(), word) != abbrev.end()) continue;
            return trim(s.substr(0, i));
        }
        if (s[i] == '-' && i > 0 && s[i - 1] == ' ' && i + 1 < s.size() && s[i + 1] == ' ')
            return trim(s.substr(0, i - 1));
        if ((s[i] == '?' || s[i] == '!') && s[i + 1] == ' ') return trim(s.substr(0, i + 1));
    }
    return trim(s);
}

inline std::string tidy_title(std::string t) {
    t = trim(t);
    while (!t.empty() && (t.back() == ',' || t.back() == ';' || t.back() == ':')) t.pop_back();
    if (!t.empty() && t.back() == '.') t.pop_back();
    while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.erase(t.begin());
    while (!t.empty() && (t.back() == '"' || t.back() == '\'')) t.pop_back();
    return trim(t);
}

inline std::string remove_urls(const std::string& s) {
    std::string out = std::regex_replace(s, re_url(), " ");
    return std::regex_replace(out, re_doi(), " ");
}

}  // namespace detail

// The stage-one pattern inventory, keyed by signal name. The shipped
// patterns file mirrors this map so the extraction rules stay auditable.
inline const std::map<std::string, std::string>& extraction_patterns() {
    static const std::map<std::string, std::string> inv = {
        {"doi", detail::kPatDoi},
        {"url", detail::kPatUrl},
        {"numbered_marker", detail::kPatNumberedMarker},
        {"paren_year", detail::kPatParenYear},
        {"author_year", detail::kPatAuthorYear},
        {"author_year_flat", detail::kPatAuthorYearFlat},
        {"inline_paren", detail::kPatInlineParen},
        {"volume_pages", detail::kPatVolumePages},
        {"bold_span", detail::kPatBoldSpan},
        {"quoted_span", detail::kPatQuotedSpan},
    };
    return inv;
}

// ---------------------------------------------------------------------------
// canonical title key: lowercase, punctuation removed, whitespace collapsed

inline CanonicalKey canonical_title_key(std::string_view title) {
    const std::string folded = uni::nfkc_fold(title);
    auto cps = uni::decode_utf8(folded);
    std::string out;
    out.reserve(folded.size());
    bool pending_space = false;
    for (char32_t cp : cps) {
        cp = uni::lower_cp(cp);
        if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v') {
            pending_space = true;
            continue;
        }
        if (uni::is_punct_cp(cp)) continue;
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        uni::append_utf8(out, cp);
    }
    return CanonicalKey{out};
}

// ---------------------------------------------------------------------------
// stage one: extraction

inline std::vector<std::string> extract_reference_strings(const std::string& text,
                                                          ExtractionMode mode,
                                                          const Lexicon& lex = default_lexicon()) {
    using namespace detail;
    std::vector<std::string> results;
    if (text.empty()) return results;

    const std::string folded = uni::nfkc_fold(text);
    const auto lines = split_lines(folded);

    for (const auto& line : lines) {
        const std::string bare = trim(line);
        if (bare.empty()) continue;

        std::smatch m;
        const bool numbered =
            std::regex_search(bare, m, re_numbered_marker()) && m.position(0) == 0;
        const std::string stripped = strip_list_marker(bare);
        if (stripped.empty()) continue;

        if (numbered && stripped.size() >= 30 &&
            (has_year_token(stripped) || find_doi(stripped).has_value())) {
            results.push_back(stripped);
            continue;
        }
        if (find_doi(stripped).has_value()) {
            results.push_back(stripped);
            continue;
        }
        const std::string plain = strip_emphasis(stripped);
        if (plain.empty()) continue;
        bool is_ref_line = false;
        std::smatch ay;
        if (std::regex_search(plain, ay, re_author_year()) && ay.position(0) <= 3)
            is_ref_line = true;
        if (!is_ref_line && std::regex_search(plain, ay, re_author_year_flat()) &&
            ay.position(0) <= 3)
            is_ref_line = true;
        // title-first lines: quoted or bold title at line start plus a year
        if (!is_ref_line && (stripped[0] == '"' || stripped.rfind("**", 0) == 0)) {
            if (std::regex_search(plain, ay, re_author_year()) || has_year_token(plain))
                is_ref_line = true;
        }
        if (is_ref_line) {
            results.push_back(stripped);
            continue;
        }
        // prose line: pull inline parenthetical citations
        auto begin = std::sregex_iterator(stripped.begin(), stripped.end(), re_inline_paren());
        for (auto it = begin; it != std::sregex_iterator(); ++it) results.push_back(it->str(0));
    }

    if (mode == ExtractionMode::standard) return results;

    // conservative: require >= 2 of {author-year format, venue name, DOI or
    // volume-page combination}
    std::vector<std::string> kept;
    for (const auto& s : results) {
        const std::string plain = strip_emphasis(s);
        int signals = 0;
        if (std::regex_search(plain, re_author_year()) ||
            std::regex_search(plain, re_author_year_flat()) ||
            std::regex_search(plain, re_inline_paren()))
            ++signals;
        if (!detail::detect_venue(s, lex).empty()) ++signals;
        if (detail::find_doi(plain).has_value() || std::regex_search(plain, re_volume_pages()))
            ++signals;
        if (signals >= 2) kept.push_back(s);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// stage two: normalization

inline std::string make_citation_id(const std::string& source_response, const std::string& raw) {
    return detail::hex16(detail::fnv1a64(source_response + '\x1f' + raw));
}

namespace detail {

// author clause after a quoted/bold title: "by X", "- X (year)", ", X et al."
inline AuthorListResult authors_from_post_clause(const std::string& post, const Lexicon& lex) {
    std::string p = trim(post);
    while (!p.empty() && (p[0] == ',' || p[0] == '-' || p[0] == ';')) p = trim(p.substr(1));

    size_t by = p.rfind("by ", 0) == 0 ? 0 : p.find(" by ");
    std::string clause;
    if (by != std::string::npos) {
        clause = p.substr(by == 0 ? 3 : by + 4);
    } else {
        clause = p;
    }
    // trim the clause at the year parenthesis or a dash separator
    size_t cut = clause.find('(');
    size_t dash = clause.find(" - ");
    if (dash != std::string::npos && (cut == std::string::npos || dash < cut)) cut = dash;
    std::string head = cut == std::string::npos ? clause : clause.substr(0, cut);

    AuthorListResult al = parse_author_list(head);
    if (!al.plausible && cut != std::string::npos && clause[cut] == '(') {
        // "(Deng et al., 2009, CVPR)" -- authors live inside the parens
        size_t close = clause.find(')', cut);
        std::string inner = clause.substr(cut + 1, close == std::string::npos
                                                       ? std::string::npos
                                                       : close - cut - 1);
        size_t digit = inner.find_first_of("0123456789");
        if (digit != std::string::npos) inner = inner.substr(0, digit);
        al = parse_author_list(inner);
    }
    // a lone capitalized token that is really a venue is not an author
    if (al.plausible && al.authors.size() == 1 &&
        !detect_venue(al.authors[0].full, lex).empty()) {
        al.authors.clear();
        al.plausible = false;
    }
    return al;
}

}  // namespace detail

inline CitationRecord parse_citation(const std::string& raw, const std::string& source_response,
                                     const Lexicon& lex = default_lexicon()) {
    using namespace detail;
    if (trim(raw).empty()) throw ParseFailure("empty reference string");

    CitationRecord rec;
    rec.raw = raw;
    rec.source_response = source_response;
    rec.citation_id = make_citation_id(source_response, raw);

    const std::string folded = strip_list_marker(uni::nfkc_fold(raw));
    rec.doi = find_doi(folded);
    const std::string work = trim(remove_urls(folded));
    rec.year = pick_year(work);

    // quoted span first, then a markdown-bold span
    std::string title, pre, post;
    {
        std::smatch m;
        if (std::regex_search(work, m, re_quoted_span())) {
            title = tidy_title(m.str(1));
            pre = trim(work.substr(0, static_cast<size_t>(m.position(0))));
            post = trim(work.substr(static_cast<size_t>(m.position(0) + m.length(0))));
        } else if (std::regex_search(work, m, re_bold_span())) {
            title = tidy_title(m.str(1));
            pre = trim(work.substr(0, static_cast<size_t>(m.position(0))));
            post = trim(work.substr(static_cast<size_t>(m.position(0) + m.length(0))));
        }
    }

    const std::string plain = trim(strip_emphasis(work));

    if (!title.empty()) {
        AuthorListResult al = parse_author_list(pre);
        if (!al.plausible) al = authors_from_post_clause(post, lex);
        rec.authors = al.authors;
        rec.venue = detect_venue(post.empty() ? pre : post, lex);
    } else {
        bool done = false;
        // authors (year). Title. Venue.
        std::smatch ym;
        if (std::regex_search(plain, ym, re_paren_year())) {
            std::string before = trim(plain.substr(0, static_cast<size_t>(ym.position(0))));
            std::string after =
                trim(plain.substr(static_cast<size_t>(ym.position(0) + ym.length(0))));
            while (!after.empty() && (after[0] == '.' || after[0] == ':' || after[0] == ','))
                after = trim(after.substr(1));
            AuthorListResult al = parse_author_list(before);
            if (al.plausible && !after.empty()) {
                rec.authors = al.authors;
                const std::string fs = first_sentence(after);
                title = tidy_title(fs);
                std::string rest = trim(after.substr(std::min(after.size(), fs.size())));
                while (!rest.empty() && (rest[0] == '.' || rest[0] == ','))
                    rest = trim(rest.substr(1));
                rec.venue = detect_venue(rest, lex);
                done = !title.empty();
            }
        }
        if (!done) {
            // leading author run "Surname, F., Surname, F., ..." then title
            static const std::regex re_author_group(
                R"(^([A-Z][A-Za-z'\-]+(\s+[A-Z][A-Za-z'\-]+)?),\s*((([A-Z]\.)[\s-]*)+)\s*[,;]?\s*(and\s+|&\s*)?)");
            std::string rest = plain;
            std::vector<Author> run;
            while (true) {
                std::smatch gm;
                if (!std::regex_search(rest, gm, re_author_group) || gm.position(0) != 0) {
                    static const std::regex re_etal_head(R"(^et\s+al\.?,?\s*)");
                    std::smatch em;
                    if (std::regex_search(rest, em, re_etal_head) && !run.empty())
                        rest = trim(rest.substr(static_cast<size_t>(em.length(0))));
                    break;
                }
                Author a;
                a.full = trim(gm.str(1)) + ", " + trim(gm.str(3));
                a.last_name = last_alpha_word(gm.str(1));
                run.push_back(std::move(a));
                rest = trim(rest.substr(static_cast<size_t>(gm.length(0))));
                if (run.size() >= 25) break;
            }
            if (run.empty()) {
                // Vancouver run: "Esteva A, Kuprel B, Novoa RA."
                static const std::regex re_vanc_group(
                    R"(^([A-Z][A-Za-z'\-]+)\s+([A-Z]{1,3})([,.])\s+)");
                static const std::vector<std::string> stop = {"The", "A",   "An",    "In", "On",
                                                              "As",  "See", "Figure", "Table",
                                                              "From"};
                std::string vrest = plain;
                std::vector<Author> vrun;
                while (true) {
                    std::smatch gm;
                    if (!std::regex_search(vrest, gm, re_vanc_group) || gm.position(0) != 0) {
                        static const std::regex re_etal_head(R"(^et\s+al\.?,?\s*)");
                        std::smatch em;
                        if (std::regex_search(vrest, em, re_etal_head) && !vrun.empty()) {
                            vrest = trim(vrest.substr(static_cast<size_t>(em.length(0))));
                        }
                        break;
                    }
                    if (std::find(stop.begin(), stop.end(), gm.str(1)) != stop.end()) break;
                    Author a;
                    a.full = gm.str(1) + " " + gm.str(2);
                    a.last_name = gm.str(1);
                    vrun.push_back(std::move(a));
                    const bool final_sep = gm.str(3) == ".";
                    vrest = trim(vrest.substr(static_cast<size_t>(gm.length(0))));
                    if (final_sep || vrun.size() >= 25) break;
                }
                if (!vrun.empty() && (vrun.size() >= 2 || vrest != plain)) {
                    run = std::move(vrun);
                    rest = vrest;
                }
            }
            if (!run.empty()) {
                rec.authors = run;
                // a leading bare year belongs to the citation, not the title
                static const std::regex re_year_head(R"(^(1[5-9]\d{2}|20\d{2})[a-z]?[.,]?\s*)");
                std::smatch yh;
                if (std::regex_search(rest, yh, re_year_head))
                    rest = trim(rest.substr(static_cast<size_t>(yh.length(0))));
                const std::string fs = first_sentence(rest);
                title = tidy_title(fs);
                std::string tail = trim(rest.substr(std::min(rest.size(), fs.size())));
                while (!tail.empty() && (tail[0] == '.' || tail[0] == ','))
                    tail = trim(tail.substr(1));
                rec.venue = detect_venue(tail.empty() ? rest : tail, lex);
                done = !title.empty();
            }
        }
        if (!done) {
            // "Title - Authors, Venue Year"
            size_t dash = plain.find(" - ");
            if (dash != std::string::npos) {
                std::string left = trim(plain.substr(0, dash));
                std::string right = trim(plain.substr(dash + 3));
                AuthorListResult lal = parse_author_list(left);
                if (!lal.plausible && split_words(left).size() >= 3) {
                    title = tidy_title(left);
                    AuthorListResult ral = authors_from_post_clause(right, lex);
                    rec.authors = ral.authors;
                    rec.venue = detect_venue(right, lex);
                    done = !title.empty();
                }
            }
        }
    }

    rec.title = title;
    if (rec.venue.empty() && !title.empty()) {
        std::string without_title = plain;
        size_t tp = without_title.find(title);
        if (tp != std::string::npos) without_title.erase(tp, title.size());
        rec.venue = detect_venue(without_title, lex);
    }
    {
        std::smatch vp;
        std::string region = plain;
        if (!title.empty()) {
            size_t tp = region.find(title);
            if (tp != std::string::npos) region = region.substr(tp + title.size());
        }
        if (std::regex_search(region, vp, re_volume_pages()))
            rec.volume_pages = trim(vp.str(0));
    }

    if (rec.title.empty() && !rec.doi.has_value())
        throw ParseFailure("no title candidate and no DOI in: " + raw.substr(0, 80));
    return rec;
}

inline std::optional<CitationRecord> try_parse_citation(const std::string& raw,
                                                        const std::string& source_response,
                                                        const Lexicon& lex = default_lexicon()) {
    try {
        return parse_citation(raw, source_response, lex);
    } catch (const ParseFailure&) {
        return std::nullopt;
    }
}

}  // namespace citeaudit::citeparse
