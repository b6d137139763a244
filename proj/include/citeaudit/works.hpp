#pragma once

// Bibliographic source identifiers and the record shapes they return.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace citeaudit {

// Cascade order is fixed: crossref (1) -> openalex (2) -> semanticscholar (3).
enum class Source { crossref = 1, openalex = 2, semanticscholar = 3 };

constexpr int source_priority(Source s) { return static_cast<int>(s); }

constexpr const char* to_string(Source s) {
    switch (s) {
        case Source::crossref: return "crossref";
        case Source::openalex: return "openalex";
        case Source::semanticscholar: return "semanticscholar";
    }
    return "crossref";
}

inline Source source_from_string(std::string_view name) {
    if (name == "crossref") return Source::crossref;
    if (name == "openalex") return Source::openalex;
    if (name == "semanticscholar") return Source::semanticscholar;
    throw std::invalid_argument("unknown source: " + std::string(name));
}

inline const std::vector<Source>& all_sources() {
    static const std::vector<Source> order{Source::crossref, Source::openalex,
                                           Source::semanticscholar};
    return order;
}

// One work returned by a source's search or DOI endpoint, reduced to the
// fields the matcher compares against.
struct MatchCandidate {
    Source source = Source::crossref;
    std::string record_title;                // never empty
    std::vector<std::string> record_authors; // last names
    std::optional<int> record_year;
    std::optional<std::string> record_doi;
    std::string external_id;                 // source-native id, never empty
};

// Citedness and venue metadata attached to confirmed matches (OpenAlex).
struct BibliometricMetadata {
    long long cited_by = 0; // >= 0
    bool open_access = false;
    std::string publisher;  // empty when the source does not know it
    std::string journal;
    int pub_year = 0;
};

} // namespace citeaudit
