#pragma once
// JSONL (de)serialization for the corpus types. nlohmann::json keeps object
// keys sorted, so emitted files are byte-stable across runs. Readers fail
// fast with 1-based line numbers.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "citeaudit/citeparse.hpp"
#include "citeaudit/score.hpp"

namespace citeaudit::jsonl {

using json = nlohmann::json;
using citeparse::Author;
using citeparse::CitationRecord;
using citeparse::Condition;
using citeparse::Framing;
using citeparse::RawResponse;

using citeparse::condition_from_string;
using citeparse::framing_from_string;

inline json to_json(const RawResponse& r) {
    return json{{"response_id", r.response_id},
                {"model_id", r.model_id},
                {"prompt_id", r.prompt_id},
                {"condition", citeparse::to_string(r.condition)},
                {"framing", citeparse::to_string(r.framing)},
                {"domain", r.domain},
                {"replication", r.replication},
                {"text", r.text}};
}

inline RawResponse response_from_json(const json& j) {
    RawResponse r;
    r.response_id = j.at("response_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.condition = condition_from_string(j.at("condition").get<std::string>());
    r.framing = framing_from_string(j.at("framing").get<std::string>());
    r.domain = j.value("domain", std::string{});
    r.replication = j.value("replication", 1);
    r.text = j.at("text").get<std::string>();
    if (r.replication < 1) throw std::invalid_argument("replication must be >= 1");
    if (r.condition == Condition::unprompted && r.framing != Framing::none)
        throw std::invalid_argument("framing must be none for unprompted responses");
    return r;
}

inline json to_json(const CitationRecord& c) {
    json authors = json::array();
    for (const auto& a : c.authors)
        authors.push_back(json{{"full", a.full}, {"last_name", a.last_name}});
    json j{{"citation_id", c.citation_id},
           {"source_response", c.source_response},
           {"raw", c.raw},
           {"authors", authors},
           {"title", c.title},
           {"venue", c.venue}};
    j["year"] = c.year ? json(*c.year) : json(nullptr);
    j["doi"] = c.doi ? json(*c.doi) : json(nullptr);
    j["volume_pages"] = c.volume_pages ? json(*c.volume_pages) : json(nullptr);
    return j;
}

inline CitationRecord citation_from_json(const json& j) {
    CitationRecord c;
    c.citation_id = j.at("citation_id").get<std::string>();
    c.source_response = j.at("source_response").get<std::string>();
    c.raw = j.at("raw").get<std::string>();
    for (const auto& a : j.at("authors")) {
        Author au;
        au.full = a.at("full").get<std::string>();
        au.last_name = a.at("last_name").get<std::string>();
        c.authors.push_back(std::move(au));
    }
    c.title = j.at("title").get<std::string>();
    c.venue = j.at("venue").get<std::string>();
    if (j.contains("year") && !j.at("year").is_null()) c.year = j.at("year").get<int>();
    if (j.contains("doi") && !j.at("doi").is_null()) c.doi = j.at("doi").get<std::string>();
    if (j.contains("volume_pages") && !j.at("volume_pages").is_null())
        c.volume_pages = j.at("volume_pages").get<std::string>();
    return c;
}

inline json to_json(const MatchCandidate& m) {
    json j{{"source", to_string(m.source)},
           {"record_title", m.record_title},
           {"record_authors", m.record_authors},
           {"external_id", m.external_id}};
    j["record_year"] = m.record_year ? json(*m.record_year) : json(nullptr);
    j["record_doi"] = m.record_doi ? json(*m.record_doi) : json(nullptr);
    return j;
}

inline MatchCandidate candidate_from_json(const json& j) {
    MatchCandidate m;
    m.source = source_from_string(j.at("source").get<std::string>());
    m.record_title = j.at("record_title").get<std::string>();
    m.record_authors = j.at("record_authors").get<std::vector<std::string>>();
    m.external_id = j.at("external_id").get<std::string>();
    if (j.contains("record_year") && !j.at("record_year").is_null())
        m.record_year = j.at("record_year").get<int>();
    if (j.contains("record_doi") && !j.at("record_doi").is_null())
        m.record_doi = j.at("record_doi").get<std::string>();
    return m;
}

inline json to_json(const BibliometricMetadata& b) {
    return json{{"cited_by", b.cited_by},
                {"open_access", b.open_access},
                {"publisher", b.publisher},
                {"journal", b.journal},
                {"pub_year", b.pub_year}};
}

inline BibliometricMetadata bibliometrics_from_json(const json& j) {
    BibliometricMetadata b;
    b.cited_by = j.at("cited_by").get<long long>();
    b.open_access = j.at("open_access").get<bool>();
    b.publisher = j.at("publisher").get<std::string>();
    b.journal = j.at("journal").get<std::string>();
    b.pub_year = j.at("pub_year").get<int>();
    return b;
}

inline json to_json(const score::ResolutionOutcome& o) {
    json sources = json::array();
    for (auto s : o.sources_consulted) sources.push_back(to_string(s));
    json j{{"citation_id", o.citation_id},
           {"title_sim", o.title_sim},
           {"author_overlap", o.author_overlap},
           {"year_agree", o.year_agree},
           {"composite", o.composite},
           {"sources_consulted", sources},
           {"status", score::to_string(o.status)}};
    j["best_candidate"] = o.best_candidate ? to_json(*o.best_candidate) : json(nullptr);
    j["bibliometrics"] = o.bibliometrics ? to_json(*o.bibliometrics) : json(nullptr);
    return j;
}

inline score::ResolutionOutcome outcome_from_json(const json& j) {
    score::ResolutionOutcome o;
    o.citation_id = j.at("citation_id").get<std::string>();
    o.title_sim = j.at("title_sim").get<double>();
    o.author_overlap = j.at("author_overlap").get<double>();
    o.year_agree = j.at("year_agree").get<double>();
    o.composite = j.at("composite").get<int>();
    for (const auto& s : j.at("sources_consulted"))
        o.sources_consulted.push_back(source_from_string(s.get<std::string>()));
    o.status = score::resolution_status_from_string(j.at("status").get<std::string>());
    if (j.contains("best_candidate") && !j.at("best_candidate").is_null())
        o.best_candidate = candidate_from_json(j.at("best_candidate"));
    if (j.contains("bibliometrics") && !j.at("bibliometrics").is_null())
        o.bibliometrics = bibliometrics_from_json(j.at("bibliometrics"));
    return o;
}

inline json to_json(const score::Verdict& v) {
    json j{{"citation_id", v.citation_id},
           {"tier", score::to_string(v.tier)},
           {"best_score", v.best_score}};
    j["typology"] = v.typology ? json(*v.typology) : json(nullptr);
    return j;
}

inline score::Verdict verdict_from_json(const json& j) {
    score::Verdict v;
    v.citation_id = j.at("citation_id").get<std::string>();
    v.tier = score::tier_from_string(j.at("tier").get<std::string>());
    v.best_score = j.at("best_score").get<int>();
    if (j.contains("typology") && !j.at("typology").is_null())
        v.typology = j.at("typology").get<std::string>();
    return v;
}

// generic fail-fast JSONL reader; Parse maps json -> T
template <typename T, typename Parse>
std::vector<T> read_jsonl_stream(std::istream& in, const std::string& source_name, Parse parse) {
    std::vector<T> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(source_name + ":" + std::to_string(lineno) +
                                     ": invalid JSON: " + e.what());
        }
        try {
            out.push_back(parse(j));
        } catch (const std::exception& e) {
            throw std::runtime_error(source_name + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <typename T, typename Parse>
std::vector<T> read_jsonl_file(const std::string& path, Parse parse) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_jsonl_stream<T>(in, path, parse);
}

inline std::vector<RawResponse> read_responses(const std::string& path) {
    return read_jsonl_file<RawResponse>(path, [](const json& j) { return response_from_json(j); });
}

inline std::vector<RawResponse> read_responses_stream(std::istream& in,
                                                      const std::string& name = "<stream>") {
    return read_jsonl_stream<RawResponse>(in, name,
                                          [](const json& j) { return response_from_json(j); });
}

inline std::vector<CitationRecord> read_citations(const std::string& path) {
    return read_jsonl_file<CitationRecord>(path,
                                           [](const json& j) { return citation_from_json(j); });
}

inline std::vector<score::ResolutionOutcome> read_outcomes(const std::string& path) {
    return read_jsonl_file<score::ResolutionOutcome>(
        path, [](const json& j) { return outcome_from_json(j); });
}

inline std::vector<score::Verdict> read_verdicts(const std::string& path) {
    return read_jsonl_file<score::Verdict>(path,
                                           [](const json& j) { return verdict_from_json(j); });
}

template <typename T>
void write_jsonl(std::ostream& out, const std::vector<T>& items) {
    for (const auto& item : items) out << to_json(item).dump() << '\n';
}

template <typename T>
void write_jsonl_file(const std::string& path, const std::vector<T>& items) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_jsonl(out, items);
}

}  // namespace citeaudit::jsonl
