#pragma once

// Bibliographic resolution against CrossRef, OpenAlex, and Semantic Scholar.
// The HTTP transport and the clock are injected so every behavior here,
// including retry pacing and cache expiry, runs deterministically in tests.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "citeparse.hpp"
#include "score.hpp"
#include "unicode.hpp"
#include "works.hpp"

namespace citeaudit::resolve {

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RateLimited : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Unavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedReply : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// thrown when a cache-only run would need the network
struct ReplayViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;
};

class Transport {
  public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const HttpRequest& request) = 0;
};

class Clock {
  public:
    virtual ~Clock() = default;
    virtual int64_t now_ms() = 0;
    virtual void sleep_ms(int64_t ms) = 0;
};

class SystemClock : public Clock {
  public:
    int64_t now_ms() override {
        using namespace std::chrono;
        return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
    }
    void sleep_ms(int64_t ms) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
};

// replay asked for a request that was never recorded
struct FixtureMissing : std::logic_error {
    using std::logic_error::logic_error;
};

namespace detail {
inline std::string hash_hex(std::string_view s);
}

// Serves recorded replies from a directory of <url-hash>.json files.
// Unknown requests fail loudly instead of masquerading as network errors.
class FixtureTransport : public Transport {
  public:
    explicit FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

    static std::filesystem::path fixture_path(const std::filesystem::path& dir,
                                              const std::string& url);

    HttpResponse get(const HttpRequest& request) override;

    // used by tests and by record mode to author fixtures
    static void store(const std::filesystem::path& dir, const std::string& url,
                      const HttpResponse& response);

  private:
    std::filesystem::path dir_;
};

// Forwards to a live transport and records every reply as a fixture.
class RecordingTransport : public Transport {
  public:
    RecordingTransport(Transport& inner, std::filesystem::path dir)
        : inner_(&inner), dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }
    HttpResponse get(const HttpRequest& request) override {
        auto resp = inner_->get(request);
        FixtureTransport::store(dir_, request.url, resp);
        return resp;
    }

  private:
    Transport* inner_;
    std::filesystem::path dir_;
};

struct ResolverConfig {
    std::string mailto;      // contact address forwarded to the APIs
    int candidate_limit = 5; // search results requested per source
    bool exhaustive = false; // keep querying sources after a confirmed match
    int max_attempts = 5;
    int64_t initial_backoff_ms = 1000; // doubles after each failed attempt
    std::map<Source, double> requests_per_second = {
        {Source::crossref, 10.0}, {Source::openalex, 10.0}, {Source::semanticscholar, 1.0}};
    std::optional<std::filesystem::path> cache_dir;
    int64_t cache_ttl_ms = 30ll * 24 * 3600 * 1000;
    bool allow_network = true; // false replays strictly from the cache
};

namespace detail {

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string hash_hex(std::string_view s) {
    static const char* digits = "0123456789abcdef";
    uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

inline std::string url_encode(std::string_view s, bool keep_slash = false) {
    static const char* digits = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        bool plain = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                     (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.' || c == '~' ||
                     (keep_slash && c == '/');
        if (plain) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(digits[c >> 4]);
            out.push_back(digits[c & 0xF]);
        }
    }
    return out;
}

inline std::string normalize_doi(std::string_view doi) {
    std::string d(doi);
    for (auto& c : d) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (std::string_view prefix :
         {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "doi:"}) {
        if (d.rfind(prefix, 0) == 0) {
            d = d.substr(prefix.size());
            break;
        }
    }
    return d;
}

inline std::string last_name_of(const std::string& display_name) {
    std::string trimmed = citeparse::detail::trim(display_name);
    auto pos = trimmed.find_last_of(" \t");
    return pos == std::string::npos ? trimmed : trimmed.substr(pos + 1);
}

// tolerate null/missing string fields; the APIs use both conventions
inline std::string str_or_empty(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return "";
    if (!j[key].is_string()) return "";
    return j[key].get<std::string>();
}

} // namespace detail

inline std::filesystem::path FixtureTransport::fixture_path(const std::filesystem::path& dir,
                                                            const std::string& url) {
    return dir / (detail::hash_hex(url) + ".json");
}

inline HttpResponse FixtureTransport::get(const HttpRequest& request) {
    std::ifstream in(fixture_path(dir_, request.url));
    if (!in) throw FixtureMissing("no recorded reply for " + request.url);
    nlohmann::json j;
    try {
        in >> j;
        HttpResponse resp;
        resp.status = j.at("status").get<int>();
        resp.body = j.at("body").get<std::string>();
        if (j.contains("headers"))
            for (const auto& [k, v] : j.at("headers").items())
                resp.headers[k] = v.get<std::string>();
        return resp;
    } catch (const nlohmann::json::exception& e) {
        throw FixtureMissing("unreadable fixture for " + request.url + ": " + e.what());
    }
}

inline void FixtureTransport::store(const std::filesystem::path& dir, const std::string& url,
                                    const HttpResponse& response) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["url"] = url;
    j["status"] = response.status;
    j["body"] = response.body;
    if (!response.headers.empty()) {
        nlohmann::json h = nlohmann::json::object();
        for (const auto& [k, v] : response.headers) h[k] = v;
        j["headers"] = h;
    }
    std::ofstream out(fixture_path(dir, url));
    out << j.dump(2) << '\n';
}

// ---- per-source request building and reply parsing ---------------------------

namespace detail {

inline std::string search_query(const citeparse::CitationRecord& record) {
    return citeparse::canonical_title_key(record.title).key;
}

struct SourceRequest {
    std::string descriptor; // cache identity: source, kind, and normalized query
    std::string url;
};

inline std::string with_mailto(std::string url, const std::string& mailto, bool first_param) {
    if (mailto.empty()) return url;
    url += first_param ? '?' : '&';
    url += "mailto=" + url_encode(mailto);
    return url;
}

inline SourceRequest build_search_request(Source source, const std::string& query, int limit,
                                          const std::string& mailto) {
    SourceRequest req;
    req.descriptor =
        std::string(to_string(source)) + "|search|" + query + "|" + std::to_string(limit);
    switch (source) {
        case Source::crossref:
            req.url = with_mailto("https://api.crossref.org/works?query.bibliographic=" +
                                      url_encode(query) + "&rows=" + std::to_string(limit),
                                  mailto, false);
            break;
        case Source::openalex:
            req.url = with_mailto("https://api.openalex.org/works?search=" + url_encode(query) +
                                      "&per-page=" + std::to_string(limit),
                                  mailto, false);
            break;
        case Source::semanticscholar:
            req.url = "https://api.semanticscholar.org/graph/v1/paper/search?query=" +
                      url_encode(query) + "&limit=" + std::to_string(limit) +
                      "&fields=title,authors,year,externalIds";
            break;
    }
    return req;
}

inline SourceRequest build_doi_request(Source source, const std::string& doi,
                                       const std::string& mailto) {
    SourceRequest req;
    req.descriptor = std::string(to_string(source)) + "|doi|" + doi;
    switch (source) {
        case Source::crossref:
            req.url = with_mailto("https://api.crossref.org/works/" + url_encode(doi, true),
                                  mailto, true);
            break;
        case Source::openalex:
            req.url = with_mailto("https://api.openalex.org/works/doi:" + url_encode(doi, true),
                                  mailto, true);
            break;
        case Source::semanticscholar:
            req.url = "https://api.semanticscholar.org/graph/v1/paper/DOI:" +
                      url_encode(doi, true) + "?fields=title,authors,year,externalIds";
            break;
    }
    return req;
}

inline std::optional<MatchCandidate> crossref_candidate(const nlohmann::json& item) {
    MatchCandidate c;
    c.source = Source::crossref;
    if (item.contains("title") && item["title"].is_array() && !item["title"].empty() &&
        item["title"][0].is_string())
        c.record_title = item["title"][0].get<std::string>();
    if (c.record_title.empty()) return std::nullopt;
    if (item.contains("author") && item["author"].is_array())
        for (const auto& a : item["author"]) {
            std::string family = str_or_empty(a, "family");
            if (family.empty()) family = last_name_of(str_or_empty(a, "name"));
            if (!family.empty()) c.record_authors.push_back(family);
        }
    if (item.contains("issued") && item["issued"].contains("date-parts") &&
        item["issued"]["date-parts"].is_array() && !item["issued"]["date-parts"].empty() &&
        item["issued"]["date-parts"][0].is_array() && !item["issued"]["date-parts"][0].empty() &&
        item["issued"]["date-parts"][0][0].is_number())
        c.record_year = item["issued"]["date-parts"][0][0].get<int>();
    std::string doi = str_or_empty(item, "DOI");
    if (!doi.empty()) c.record_doi = normalize_doi(doi);
    c.external_id = c.record_doi ? *c.record_doi
                                 : citeparse::canonical_title_key(c.record_title).key;
    return c;
}

inline std::optional<MatchCandidate> openalex_candidate(const nlohmann::json& item) {
    MatchCandidate c;
    c.source = Source::openalex;
    c.record_title = str_or_empty(item, "title");
    if (c.record_title.empty()) c.record_title = str_or_empty(item, "display_name");
    if (c.record_title.empty()) return std::nullopt;
    if (item.contains("authorships") && item["authorships"].is_array())
        for (const auto& a : item["authorships"]) {
            if (!a.contains("author")) continue;
            std::string name = last_name_of(str_or_empty(a["author"], "display_name"));
            if (!name.empty()) c.record_authors.push_back(name);
        }
    if (item.contains("publication_year") && item["publication_year"].is_number())
        c.record_year = item["publication_year"].get<int>();
    std::string doi = str_or_empty(item, "doi");
    if (!doi.empty()) c.record_doi = normalize_doi(doi);
    std::string id = str_or_empty(item, "id");
    if (auto pos = id.find_last_of('/'); pos != std::string::npos) id = id.substr(pos + 1);
    c.external_id = !id.empty() ? id
                    : c.record_doi ? *c.record_doi
                                   : citeparse::canonical_title_key(c.record_title).key;
    return c;
}

inline std::optional<MatchCandidate> s2_candidate(const nlohmann::json& item) {
    MatchCandidate c;
    c.source = Source::semanticscholar;
    c.record_title = str_or_empty(item, "title");
    if (c.record_title.empty()) return std::nullopt;
    if (item.contains("authors") && item["authors"].is_array())
        for (const auto& a : item["authors"]) {
            std::string name = last_name_of(str_or_empty(a, "name"));
            if (!name.empty()) c.record_authors.push_back(name);
        }
    if (item.contains("year") && item["year"].is_number()) c.record_year = item["year"].get<int>();
    if (item.contains("externalIds") && item["externalIds"].is_object()) {
        std::string doi = str_or_empty(item["externalIds"], "DOI");
        if (!doi.empty()) c.record_doi = normalize_doi(doi);
    }
    std::string id = str_or_empty(item, "paperId");
    c.external_id = !id.empty() ? id
                    : c.record_doi ? *c.record_doi
                                   : citeparse::canonical_title_key(c.record_title).key;
    return c;
}

inline std::vector<MatchCandidate> parse_candidates(Source source, const std::string& body,
                                                    bool single) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedReply(std::string(to_string(source)) + ": " + e.what());
    }
    std::vector<MatchCandidate> out;
    auto add = [&](const nlohmann::json& item) {
        std::optional<MatchCandidate> c;
        switch (source) {
            case Source::crossref: c = crossref_candidate(item); break;
            case Source::openalex: c = openalex_candidate(item); break;
            case Source::semanticscholar: c = s2_candidate(item); break;
        }
        if (c) out.push_back(std::move(*c));
    };
    try {
        if (single) {
            // DOI lookups return one work, wrapped for crossref only
            if (source == Source::crossref) {
                if (!j.contains("message")) throw MalformedReply("crossref: no message");
                add(j["message"]);
            } else {
                add(j);
            }
            return out;
        }
        switch (source) {
            case Source::crossref: {
                if (!j.contains("message") || !j["message"].contains("items") ||
                    !j["message"]["items"].is_array())
                    throw MalformedReply("crossref: no message.items array");
                for (const auto& item : j["message"]["items"]) add(item);
                break;
            }
            case Source::openalex: {
                if (!j.contains("results") || !j["results"].is_array())
                    throw MalformedReply("openalex: no results array");
                for (const auto& item : j["results"]) add(item);
                break;
            }
            case Source::semanticscholar: {
                if (!j.contains("data") || !j["data"].is_array())
                    throw MalformedReply("semanticscholar: no data array");
                for (const auto& item : j["data"]) add(item);
                break;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedReply(std::string(to_string(source)) + ": " + e.what());
    }
    return out;
}

} // namespace detail

// ---- the resolver ------------------------------------------------------------

class Resolver {
  public:
    Resolver(Transport& transport, Clock& clock, ResolverConfig config = {})
        : transport_(&transport), clock_(&clock), config_(std::move(config)) {
        if (config_.cache_dir) std::filesystem::create_directories(*config_.cache_dir);
    }

    const ResolverConfig& config() const { return config_; }

    std::vector<MatchCandidate> query_source(Source source,
                                             const citeparse::CitationRecord& record,
                                             int limit) {
        if (limit < 1 || limit > 20)
            throw std::invalid_argument("candidate limit must be in [1, 20]");
        const bool has_title = !detail::search_query(record).empty();
        if (!has_title && !record.doi)
            throw std::invalid_argument("record has neither a usable title nor a DOI");

        if (record.doi) {
            auto req = detail::build_doi_request(source, detail::normalize_doi(*record.doi),
                                                 config_.mailto);
            auto resp = fetch(source, req);
            if (resp.status == 404) {
                if (!has_title) return {};
            } else {
                return detail::parse_candidates(source, resp.body, true);
            }
        }
        auto req = detail::build_search_request(source, detail::search_query(record), limit,
                                                config_.mailto);
        auto resp = fetch(source, req);
        if (resp.status == 404) return {};
        return detail::parse_candidates(source, resp.body, false);
    }

    score::ResolutionOutcome resolve_citation(const citeparse::CitationRecord& record,
                                              const score::ScoringConfig& scoring = {}) {
        score::validate(scoring);
        if (detail::search_query(record).empty() && !record.doi)
            throw std::invalid_argument("record has neither a usable title nor a DOI");

        std::vector<Source> consulted;
        std::optional<score::ResolutionOutcome> best;
        bool any_answer = false;
        for (Source source : all_sources()) {
            consulted.push_back(source);
            std::vector<MatchCandidate> candidates;
            try {
                candidates = query_source(source, record, config_.candidate_limit);
                any_answer = true;
            } catch (const Unavailable&) {
                continue;
            } catch (const RateLimited&) {
                continue;
            } catch (const MalformedReply&) {
                continue;
            }
            for (const auto& cand : candidates) {
                auto scored = score::score_candidate(record, cand, scoring);
                if (!best || scored.composite > best->composite) best = std::move(scored);
            }
            if (!config_.exhaustive && best &&
                best->composite >= scoring.threshold_confirmed)
                break;
        }

        score::ResolutionOutcome outcome;
        outcome.citation_id = record.citation_id;
        outcome.sources_consulted = consulted;
        if (!any_answer) {
            outcome.status = score::ResolutionStatus::unresolved;
            return outcome;
        }
        outcome.status = score::ResolutionStatus::resolved;
        if (best) {
            outcome.best_candidate = best->best_candidate;
            outcome.title_sim = best->title_sim;
            outcome.author_overlap = best->author_overlap;
            outcome.year_agree = best->year_agree;
            outcome.composite = best->composite;
            if (outcome.composite >= scoring.threshold_confirmed)
                outcome.bibliometrics = bibliometrics_for(*outcome.best_candidate);
        }
        return outcome;
    }

    // OpenAlex work lookup by DOI or by OpenAlex id (W...)
    BibliometricMetadata fetch_bibliometrics(const std::string& doi_or_id) {
        if (doi_or_id.empty()) throw std::invalid_argument("empty work identifier");
        detail::SourceRequest req;
        if (doi_or_id.size() > 1 && (doi_or_id[0] == 'W' || doi_or_id[0] == 'w') &&
            doi_or_id.find('/') == std::string::npos && doi_or_id.find('.') == std::string::npos) {
            req.descriptor = "openalex|biblio|" + doi_or_id;
            req.url = detail::with_mailto("https://api.openalex.org/works/" +
                                              detail::url_encode(doi_or_id),
                                          config_.mailto, true);
        } else {
            std::string doi = detail::normalize_doi(doi_or_id);
            req.descriptor = "openalex|biblio|doi:" + doi;
            req.url = detail::with_mailto("https://api.openalex.org/works/doi:" +
                                              detail::url_encode(doi, true),
                                          config_.mailto, true);
        }
        auto resp = fetch(Source::openalex, req);
        if (resp.status == 404) throw NotFound("no bibliometric record for " + doi_or_id);

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(resp.body);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedReply(std::string("openalex: ") + e.what());
        }
        BibliometricMetadata meta;
        try {
            if (j.contains("cited_by_count") && j["cited_by_count"].is_number())
                meta.cited_by = j["cited_by_count"].get<long long>();
            if (j.contains("open_access") && j["open_access"].is_object() &&
                j["open_access"].contains("is_oa") && j["open_access"]["is_oa"].is_boolean())
                meta.open_access = j["open_access"]["is_oa"].get<bool>();
            if (j.contains("publication_year") && j["publication_year"].is_number())
                meta.pub_year = j["publication_year"].get<int>();
            if (j.contains("primary_location") && j["primary_location"].is_object()) {
                const auto& loc = j["primary_location"];
                if (loc.contains("source") && loc["source"].is_object()) {
                    meta.journal = detail::str_or_empty(loc["source"], "display_name");
                    meta.publisher =
                        detail::str_or_empty(loc["source"], "host_organization_name");
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw MalformedReply(std::string("openalex: ") + e.what());
        }
        return meta;
    }

  private:
    std::optional<BibliometricMetadata> bibliometrics_for(const MatchCandidate& cand) {
        std::string id;
        if (cand.record_doi)
            id = *cand.record_doi;
        else if (cand.source == Source::openalex)
            id = cand.external_id;
        if (id.empty()) return std::nullopt;
        try {
            return fetch_bibliometrics(id);
        } catch (const std::runtime_error&) {
            return std::nullopt; // metadata is best-effort decoration
        }
    }

    std::filesystem::path cache_path(const std::string& descriptor) const {
        return *config_.cache_dir / (detail::hash_hex(descriptor) + ".json");
    }

    std::optional<HttpResponse> cache_lookup(const std::string& descriptor) {
        if (!config_.cache_dir) return std::nullopt;
        std::ifstream in(cache_path(descriptor));
        if (!in) return std::nullopt;
        nlohmann::json j;
        try {
            in >> j;
            if (j.at("descriptor").get<std::string>() != descriptor) return std::nullopt;
            int64_t stored = j.at("stored_at_ms").get<int64_t>();
            if (clock_->now_ms() - stored > config_.cache_ttl_ms) return std::nullopt;
            HttpResponse resp;
            resp.status = j.at("status").get<int>();
            resp.body = j.at("body").get<std::string>();
            return resp;
        } catch (const nlohmann::json::exception&) {
            return std::nullopt; // corrupt entries read as misses
        }
    }

    void cache_store(const std::string& descriptor, const HttpResponse& resp) {
        if (!config_.cache_dir) return;
        nlohmann::json j;
        j["descriptor"] = descriptor;
        j["status"] = resp.status;
        j["body"] = resp.body;
        j["stored_at_ms"] = clock_->now_ms();
        std::ofstream out(cache_path(descriptor));
        out << j.dump(2) << '\n';
    }

    void respect_rate_limit(Source source) {
        auto it = config_.requests_per_second.find(source);
        double qps = it == config_.requests_per_second.end() ? 10.0 : it->second;
        if (qps <= 0.0) qps = 10.0;
        int64_t min_interval = static_cast<int64_t>(1000.0 / qps);
        auto last = last_request_ms_.find(source);
        if (last != last_request_ms_.end()) {
            int64_t elapsed = clock_->now_ms() - last->second;
            if (elapsed < min_interval) clock_->sleep_ms(min_interval - elapsed);
        }
        last_request_ms_[source] = clock_->now_ms();
    }

    // cache, pacing, and bounded retries around one GET
    HttpResponse fetch(Source source, const detail::SourceRequest& req) {
        if (auto cached = cache_lookup(req.descriptor)) return *cached;
        if (!config_.allow_network)
            throw ReplayViolation("network disabled and no cached reply for " + req.url);

        HttpRequest http;
        http.url = req.url;
        std::string ua = "citeaudit/0.1";
        if (!config_.mailto.empty()) ua += " (mailto:" + config_.mailto + ")";
        http.headers.emplace_back("User-Agent", ua);

        int64_t backoff = config_.initial_backoff_ms;
        std::string last_error = "no attempts made";
        for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
            respect_rate_limit(source);
            HttpResponse resp;
            bool transport_failed = false;
            try {
                resp = transport_->get(http);
            } catch (const TransportError& e) {
                transport_failed = true;
                last_error = e.what();
            }
            if (!transport_failed) {
                if (resp.status == 200) {
                    cache_store(req.descriptor, resp);
                    return resp;
                }
                if (resp.status == 404) return resp; // settled answer, caller interprets
                if (resp.status == 429) {
                    last_error = "rate limited";
                    if (attempt == config_.max_attempts)
                        throw RateLimited(std::string(to_string(source)) +
                                          ": still rate limited after " +
                                          std::to_string(attempt) + " attempts");
                    auto ra = resp.headers.find("Retry-After");
                    int64_t wait = backoff;
                    if (ra != resp.headers.end()) {
                        try {
                            wait = std::stoll(ra->second) * 1000;
                        } catch (const std::exception&) {
                        }
                    }
                    clock_->sleep_ms(wait);
                    backoff *= 2;
                    continue;
                }
                if (resp.status >= 500) {
                    last_error = "status " + std::to_string(resp.status);
                } else {
                    throw MalformedReply(std::string(to_string(source)) +
                                         ": unexpected status " + std::to_string(resp.status));
                }
            }
            if (attempt == config_.max_attempts) break;
            clock_->sleep_ms(backoff);
            backoff *= 2;
        }
        throw Unavailable(std::string(to_string(source)) + ": " + last_error + " after " +
                          std::to_string(config_.max_attempts) + " attempts");
    }

    Transport* transport_;
    Clock* clock_;
    ResolverConfig config_;
    std::map<Source, int64_t> last_request_ms_;
};

} // namespace citeaudit::resolve
