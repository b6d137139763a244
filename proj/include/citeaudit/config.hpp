#pragma once

// Toolkit-wide configuration: one JSON document covering scoring, resolver,
// classifier, and filter settings plus the run seed. Loading validates every
// section and rejects keys it does not know about, so a typo'd setting fails
// loudly instead of silently running with a default.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "classify.hpp"
#include "filters.hpp"
#include "resolve.hpp"
#include "score.hpp"

namespace citeaudit::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kMailtoEnvVar = "CITEAUDIT_MAILTO";

struct ResolverSettings {
    std::string mailto;
    int candidate_limit = 5;
    bool exhaustive = false;
    int max_attempts = 5;
    std::int64_t initial_backoff_ms = 1000;
    double crossref_rps = 10.0;
    double openalex_rps = 10.0;
    double semanticscholar_rps = 1.0;
    std::string cache_dir;    // empty disables the on-disk cache
    int cache_ttl_days = 30;
    bool replay = false;      // serve answers from cache/fixtures only, no network
    std::string fixtures_dir; // when set, requests are replayed from recorded fixtures
};

struct FilterSettings {
    int consensus_k = 1;
    int repetition_r = 1;
    int repetition_n = 1;
    double prescreen_threshold = 0.5;
};

struct ToolkitConfig {
    score::ScoringConfig scoring;
    ResolverSettings resolver;
    classify::LogisticHyper logistic;
    classify::ForestHyper forest;
    classify::GbmHyper gbm;
    FilterSettings filters;
    std::uint64_t seed = 0;
};

namespace detail {

// Reads known keys out of one JSON object and complains about the rest.
class ObjectReader {
  public:
    ObjectReader(const nlohmann::json& obj, std::string where)
        : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object())
            throw std::invalid_argument("config section \"" + where_ + "\" must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            it->get_to(out);
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument("config key \"" + where_ + "." + key +
                                        "\" has the wrong type");
        }
    }

    const nlohmann::json* section(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& item : obj_.items())
            if (!seen_.count(item.key()))
                throw std::invalid_argument("unknown config key \"" + where_ + "." +
                                            item.key() + "\"");
    }

  private:
    const nlohmann::json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

} // namespace detail

inline void validate(const ToolkitConfig& cfg) {
    score::validate(cfg.scoring);

    const auto& r = cfg.resolver;
    detail::require(r.candidate_limit >= 1 && r.candidate_limit <= 20,
                    "resolver.candidate_limit must be between 1 and 20");
    detail::require(r.max_attempts >= 1, "resolver.max_attempts must be at least 1");
    detail::require(r.initial_backoff_ms >= 0, "resolver.initial_backoff_ms must be >= 0");
    detail::require(r.crossref_rps > 0 && r.openalex_rps > 0 && r.semanticscholar_rps > 0,
                    "resolver request rates must be positive");
    detail::require(r.cache_ttl_days >= 0, "resolver.cache_ttl_days must be >= 0");
    detail::require(!r.replay || !r.cache_dir.empty() || !r.fixtures_dir.empty(),
                    "resolver.replay needs a cache_dir or fixtures_dir to replay from");

    detail::require(cfg.logistic.epochs >= 1, "classifier.logistic.epochs must be >= 1");
    detail::require(cfg.logistic.learning_rate > 0,
                    "classifier.logistic.learning_rate must be positive");
    detail::require(cfg.logistic.l2 >= 0, "classifier.logistic.l2 must be >= 0");
    detail::require(cfg.forest.n_trees >= 1, "classifier.forest.n_trees must be >= 1");
    detail::require(cfg.forest.max_depth >= 1, "classifier.forest.max_depth must be >= 1");
    detail::require(cfg.forest.feature_frac > 0 && cfg.forest.feature_frac <= 1,
                    "classifier.forest.feature_frac must be in (0, 1]");
    detail::require(cfg.forest.min_leaf >= 1, "classifier.forest.min_leaf must be >= 1");
    detail::require(cfg.gbm.n_rounds >= 1, "classifier.gbm.n_rounds must be >= 1");
    detail::require(cfg.gbm.learning_rate > 0, "classifier.gbm.learning_rate must be positive");
    detail::require(cfg.gbm.max_depth >= 1, "classifier.gbm.max_depth must be >= 1");
    detail::require(cfg.gbm.min_leaf >= 1, "classifier.gbm.min_leaf must be >= 1");

    const auto& f = cfg.filters;
    detail::require(f.consensus_k >= 1, "filters.consensus_k must be >= 1");
    detail::require(f.repetition_r >= 1, "filters.repetition_r must be >= 1");
    detail::require(f.repetition_n >= f.repetition_r,
                    "filters.repetition_n must be >= filters.repetition_r");
    detail::require(f.prescreen_threshold >= 0.0 && f.prescreen_threshold <= 1.0,
                    "filters.prescreen_threshold must be in [0, 1]");
}

inline nlohmann::json to_json(const ToolkitConfig& cfg) {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& b : cfg.scoring.typology_bands)
        bands.push_back({{"label", b.label}, {"lo", b.lo}, {"hi", b.hi}});
    return nlohmann::json{
        {"scoring",
         {{"weight_title", cfg.scoring.weight_title},
          {"weight_author", cfg.scoring.weight_author},
          {"weight_year", cfg.scoring.weight_year},
          {"threshold_confirmed", cfg.scoring.threshold_confirmed},
          {"threshold_probable", cfg.scoring.threshold_probable},
          {"reference_year", cfg.scoring.reference_year},
          {"year_exact_only", cfg.scoring.year_exact_only},
          {"typology_bands", bands}}},
        {"resolver",
         {{"mailto", cfg.resolver.mailto},
          {"candidate_limit", cfg.resolver.candidate_limit},
          {"exhaustive", cfg.resolver.exhaustive},
          {"max_attempts", cfg.resolver.max_attempts},
          {"initial_backoff_ms", cfg.resolver.initial_backoff_ms},
          {"requests_per_second",
           {{"crossref", cfg.resolver.crossref_rps},
            {"openalex", cfg.resolver.openalex_rps},
            {"semanticscholar", cfg.resolver.semanticscholar_rps}}},
          {"cache_dir", cfg.resolver.cache_dir},
          {"cache_ttl_days", cfg.resolver.cache_ttl_days},
          {"replay", cfg.resolver.replay},
          {"fixtures_dir", cfg.resolver.fixtures_dir}}},
        {"classifier",
         {{"logistic",
           {{"l2", cfg.logistic.l2},
            {"epochs", cfg.logistic.epochs},
            {"learning_rate", cfg.logistic.learning_rate}}},
          {"forest",
           {{"n_trees", cfg.forest.n_trees},
            {"max_depth", cfg.forest.max_depth},
            {"feature_frac", cfg.forest.feature_frac},
            {"bootstrap", cfg.forest.bootstrap},
            {"min_leaf", cfg.forest.min_leaf}}},
          {"gbm",
           {{"n_rounds", cfg.gbm.n_rounds},
            {"learning_rate", cfg.gbm.learning_rate},
            {"max_depth", cfg.gbm.max_depth},
            {"min_leaf", cfg.gbm.min_leaf}}}}},
        {"filters",
         {{"consensus_k", cfg.filters.consensus_k},
          {"repetition_r", cfg.filters.repetition_r},
          {"repetition_n", cfg.filters.repetition_n},
          {"prescreen_threshold", cfg.filters.prescreen_threshold}}},
        {"seed", cfg.seed},
    };
}

inline ToolkitConfig from_json(const nlohmann::json& j) {
    ToolkitConfig cfg;
    detail::ObjectReader top(j, "config");

    if (const auto* s = top.section("scoring")) {
        detail::ObjectReader r(*s, "scoring");
        r.get("weight_title", cfg.scoring.weight_title);
        r.get("weight_author", cfg.scoring.weight_author);
        r.get("weight_year", cfg.scoring.weight_year);
        r.get("threshold_confirmed", cfg.scoring.threshold_confirmed);
        r.get("threshold_probable", cfg.scoring.threshold_probable);
        r.get("reference_year", cfg.scoring.reference_year);
        r.get("year_exact_only", cfg.scoring.year_exact_only);
        if (const auto* bands = r.section("typology_bands")) {
            if (!bands->is_array())
                throw std::invalid_argument(
                    "config key \"scoring.typology_bands\" must be an array");
            cfg.scoring.typology_bands.clear();
            for (const auto& bj : *bands) {
                detail::ObjectReader br(bj, "scoring.typology_bands[]");
                score::TypologyBand band;
                br.get("label", band.label);
                br.get("lo", band.lo);
                br.get("hi", band.hi);
                br.finish();
                cfg.scoring.typology_bands.push_back(std::move(band));
            }
        }
        r.finish();
    }

    if (const auto* s = top.section("resolver")) {
        detail::ObjectReader r(*s, "resolver");
        r.get("mailto", cfg.resolver.mailto);
        r.get("candidate_limit", cfg.resolver.candidate_limit);
        r.get("exhaustive", cfg.resolver.exhaustive);
        r.get("max_attempts", cfg.resolver.max_attempts);
        r.get("initial_backoff_ms", cfg.resolver.initial_backoff_ms);
        if (const auto* rates = r.section("requests_per_second")) {
            detail::ObjectReader rr(*rates, "resolver.requests_per_second");
            rr.get("crossref", cfg.resolver.crossref_rps);
            rr.get("openalex", cfg.resolver.openalex_rps);
            rr.get("semanticscholar", cfg.resolver.semanticscholar_rps);
            rr.finish();
        }
        r.get("cache_dir", cfg.resolver.cache_dir);
        r.get("cache_ttl_days", cfg.resolver.cache_ttl_days);
        r.get("replay", cfg.resolver.replay);
        r.get("fixtures_dir", cfg.resolver.fixtures_dir);
        r.finish();
    }

    if (const auto* s = top.section("classifier")) {
        detail::ObjectReader r(*s, "classifier");
        if (const auto* lj = r.section("logistic")) {
            detail::ObjectReader lr(*lj, "classifier.logistic");
            lr.get("l2", cfg.logistic.l2);
            lr.get("epochs", cfg.logistic.epochs);
            lr.get("learning_rate", cfg.logistic.learning_rate);
            lr.finish();
        }
        if (const auto* fj = r.section("forest")) {
            detail::ObjectReader fr(*fj, "classifier.forest");
            fr.get("n_trees", cfg.forest.n_trees);
            fr.get("max_depth", cfg.forest.max_depth);
            fr.get("feature_frac", cfg.forest.feature_frac);
            fr.get("bootstrap", cfg.forest.bootstrap);
            fr.get("min_leaf", cfg.forest.min_leaf);
            fr.finish();
        }
        if (const auto* gj = r.section("gbm")) {
            detail::ObjectReader gr(*gj, "classifier.gbm");
            gr.get("n_rounds", cfg.gbm.n_rounds);
            gr.get("learning_rate", cfg.gbm.learning_rate);
            gr.get("max_depth", cfg.gbm.max_depth);
            gr.get("min_leaf", cfg.gbm.min_leaf);
            gr.finish();
        }
        r.finish();
    }

    if (const auto* s = top.section("filters")) {
        detail::ObjectReader r(*s, "filters");
        r.get("consensus_k", cfg.filters.consensus_k);
        r.get("repetition_r", cfg.filters.repetition_r);
        r.get("repetition_n", cfg.filters.repetition_n);
        r.get("prescreen_threshold", cfg.filters.prescreen_threshold);
        r.finish();
    }

    top.get("seed", cfg.seed);
    top.finish();

    validate(cfg);
    return cfg;
}

// Fills settings the config file left blank from the process environment.
inline void apply_environment(ToolkitConfig& cfg) {
    if (cfg.resolver.mailto.empty()) {
        if (const char* mailto = std::getenv(kMailtoEnvVar); mailto && *mailto)
            cfg.resolver.mailto = mailto;
    }
}

inline ToolkitConfig load_config(const std::filesystem::path& path, bool use_env = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config file " + path.string() + ": " + e.what());
    }
    ToolkitConfig cfg = from_json(j);
    if (use_env) apply_environment(cfg);
    return cfg;
}

inline void save_config(const std::filesystem::path& path, const ToolkitConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path.string());
    out << to_json(cfg).dump(2) << '\n';
}

// ---- adapters into the per-module configs ---------------------------------------

inline resolve::ResolverConfig resolver_config(const ToolkitConfig& cfg) {
    resolve::ResolverConfig rc;
    rc.mailto = cfg.resolver.mailto;
    rc.candidate_limit = cfg.resolver.candidate_limit;
    rc.exhaustive = cfg.resolver.exhaustive;
    rc.max_attempts = cfg.resolver.max_attempts;
    rc.initial_backoff_ms = cfg.resolver.initial_backoff_ms;
    rc.requests_per_second[Source::crossref] = cfg.resolver.crossref_rps;
    rc.requests_per_second[Source::openalex] = cfg.resolver.openalex_rps;
    rc.requests_per_second[Source::semanticscholar] = cfg.resolver.semanticscholar_rps;
    if (!cfg.resolver.cache_dir.empty()) rc.cache_dir = cfg.resolver.cache_dir;
    rc.cache_ttl_ms = static_cast<std::int64_t>(cfg.resolver.cache_ttl_days) * 24 * 3600 * 1000;
    // Replaying from fixtures keeps the transport reachable: that transport reads
    // recorded files, not the network. Cache-only replay shuts it off entirely.
    rc.allow_network = !cfg.resolver.replay || !cfg.resolver.fixtures_dir.empty();
    return rc;
}

inline filters::StagedConfig staged_config(const ToolkitConfig& cfg) {
    filters::StagedConfig sc;
    sc.prescreen_threshold = cfg.filters.prescreen_threshold;
    sc.consensus_k = cfg.filters.consensus_k;
    sc.repetition_r = cfg.filters.repetition_r;
    sc.repetition_n = cfg.filters.repetition_n;
    return sc;
}

} // namespace citeaudit::config
