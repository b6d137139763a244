#pragma once

// Audit-report aggregation: per-model hallucination rates with bootstrap
// confidence intervals, framing/domain breakdowns with chi-squared
// association tests, cross-model agreement, threshold sensitivity, and the
// typology mix of sub-confirmed citations. Aggregation is idempotent: the
// report recomputes exactly from the persisted verdict rows.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeparse.hpp"
#include "filters.hpp"
#include "jsonl.hpp"
#include "rng.hpp"
#include "score.hpp"
#include "stats.hpp"

namespace citeaudit::report {

struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One row of the verdict file: a citation with its provenance and outcome.
// This is the unit the report aggregates over, so it carries everything the
// breakdowns need (model, domain, framing) alongside the verdict itself.
struct VerdictRow {
    std::string citation_id;
    std::string model_id;
    std::string prompt_id;
    std::string domain;
    citeparse::Condition condition = citeparse::Condition::parametric;
    citeparse::Framing framing = citeparse::Framing::none;
    score::ResolutionStatus status = score::ResolutionStatus::resolved;
    std::optional<score::Tier> tier;      // resolved rows only
    std::optional<std::string> typology;  // resolved rows below the confirmed threshold
    std::optional<int> best_score;        // resolved rows only
    std::optional<BibliometricMetadata> bibliometrics;
};

inline VerdictRow make_row(const citeparse::RawResponse& response,
                           const score::ResolutionOutcome& outcome,
                           const score::ScoringConfig& scoring = {}) {
    VerdictRow row;
    row.citation_id = outcome.citation_id;
    row.model_id = response.model_id;
    row.prompt_id = response.prompt_id;
    row.domain = response.domain;
    row.condition = response.condition;
    row.framing = response.framing;
    row.status = outcome.status;
    if (outcome.status == score::ResolutionStatus::resolved) {
        auto verdict = score::classify_verdict(outcome, scoring);
        row.tier = verdict.tier;
        row.typology = verdict.typology;
        row.best_score = verdict.best_score;
        row.bibliometrics = outcome.bibliometrics;
    }
    return row;
}

inline nlohmann::json to_json(const VerdictRow& r) {
    nlohmann::json j{{"citation_id", r.citation_id},
                     {"model_id", r.model_id},
                     {"prompt_id", r.prompt_id},
                     {"domain", r.domain},
                     {"condition", citeparse::to_string(r.condition)},
                     {"framing", citeparse::to_string(r.framing)},
                     {"status", score::to_string(r.status)}};
    j["tier"] = r.tier ? nlohmann::json(score::to_string(*r.tier)) : nlohmann::json(nullptr);
    j["typology"] = r.typology ? nlohmann::json(*r.typology) : nlohmann::json(nullptr);
    j["best_score"] = r.best_score ? nlohmann::json(*r.best_score) : nlohmann::json(nullptr);
    j["bibliometrics"] =
        r.bibliometrics ? jsonl::to_json(*r.bibliometrics) : nlohmann::json(nullptr);
    return j;
}

inline VerdictRow row_from_json(const nlohmann::json& j) {
    VerdictRow r;
    r.citation_id = j.at("citation_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.domain = j.at("domain").get<std::string>();
    r.condition = citeparse::condition_from_string(j.at("condition").get<std::string>());
    r.framing = citeparse::framing_from_string(j.at("framing").get<std::string>());
    r.status = score::resolution_status_from_string(j.at("status").get<std::string>());
    if (!j.at("tier").is_null())
        r.tier = score::tier_from_string(j.at("tier").get<std::string>());
    if (!j.at("typology").is_null()) r.typology = j.at("typology").get<std::string>();
    if (!j.at("best_score").is_null()) r.best_score = j.at("best_score").get<int>();
    if (j.contains("bibliometrics") && !j.at("bibliometrics").is_null())
        r.bibliometrics = jsonl::bibliometrics_from_json(j.at("bibliometrics"));

    const bool resolved = r.status == score::ResolutionStatus::resolved;
    if (resolved && (!r.tier || !r.best_score))
        throw std::invalid_argument("resolved verdict row needs tier and best_score");
    if (!resolved && (r.tier || r.best_score || r.typology || r.bibliometrics))
        throw std::invalid_argument("unresolved verdict row cannot carry a verdict");
    if (resolved && *r.tier != score::Tier::confirmed && !r.typology)
        throw std::invalid_argument("sub-confirmed verdict row needs a typology label");
    if (resolved && *r.tier == score::Tier::confirmed && r.typology)
        throw std::invalid_argument("confirmed verdict row cannot carry a typology label");
    return r;
}

inline std::vector<VerdictRow> read_rows(const std::string& path) {
    return jsonl::read_jsonl_file<VerdictRow>(
        path, [](const nlohmann::json& j) { return row_from_json(j); });
}

inline std::vector<VerdictRow> read_rows_stream(std::istream& in,
                                                const std::string& name = "<stream>") {
    return jsonl::read_jsonl_stream<VerdictRow>(
        in, name, [](const nlohmann::json& j) { return row_from_json(j); });
}

inline void write_rows(std::ostream& out, const std::vector<VerdictRow>& rows) {
    for (const auto& r : rows) out << to_json(r).dump() << '\n';
}

inline void write_rows_file(const std::string& path, const std::vector<VerdictRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_rows(out, rows);
}

// ---- report types ----------------------------------------------------------------

struct ModelStats {
    std::string model_id;
    long long n_total = 0;      // resolved citations
    long long n_real = 0;       // confirmed citations
    long long n_unresolved = 0; // excluded from the rate, reported separately
    double hallucination_rate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::optional<double> oa_rate;          // over confirmed citations with metadata
    std::optional<double> median_cited_by;  // likewise
};

struct BreakdownStats {
    std::string label;
    long long n_total = 0;
    long long n_real = 0;
    double hallucination_rate = 0.0;
};

struct SensitivityRow {
    std::string model_id;
    double strict_rate = 0.0;    // real = confirmed only
    double inclusive_rate = 0.0; // real = confirmed or probable
};

struct TypologyShare {
    std::string label;
    long long count = 0;
    double share = 0.0;
};

struct ReportOptions {
    score::ScoringConfig scoring;
    int bootstrap_resamples = 10000;
    double ci_level = 0.95;
    std::uint64_t seed = 0;
};

struct AuditReport {
    long long n_rows = 0;
    long long n_resolved = 0;
    long long n_unresolved = 0;
    std::vector<ModelStats> models;
    std::vector<BreakdownStats> by_framing;
    std::vector<BreakdownStats> by_domain;
    std::optional<stats::ChiSquaredResult> model_status_test;
    std::optional<stats::ChiSquaredResult> framing_status_test;
    std::optional<stats::ChiSquaredResult> domain_status_test;
    std::optional<filters::AgreementMatrix> agreement;
    std::vector<SensitivityRow> sensitivity;
    std::optional<double> sensitivity_spearman;
    std::vector<TypologyShare> typology; // empty when nothing scored below confirmed
    long long n_subconfirmed = 0;
    std::uint64_t seed = 0;
    int bootstrap_resamples = 10000;
    double ci_level = 0.95;
};

namespace detail {

inline double median_of(std::vector<long long> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n % 2) return static_cast<double>(v[n / 2]);
    return (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
}

inline bool is_confirmed(const VerdictRow& r) {
    return r.tier && *r.tier == score::Tier::confirmed;
}

inline bool is_real_inclusive(const VerdictRow& r) {
    return r.tier && (*r.tier == score::Tier::confirmed || *r.tier == score::Tier::probable);
}

// chi-squared over label x {real, hallucinated}; degenerate tables give no test
inline std::optional<stats::ChiSquaredResult> status_test(
    const std::map<std::string, std::pair<long long, long long>>& real_and_total) {
    stats::ContingencyTable t;
    t.col_labels = {"real", "hallucinated"};
    long long real_sum = 0, hall_sum = 0;
    for (const auto& [label, counts] : real_and_total) {
        if (counts.second == 0) continue; // no resolved citations in this group
        long long real = counts.first;
        long long hall = counts.second - counts.first;
        t.row_labels.push_back(label);
        t.counts.push_back({real, hall});
        real_sum += real;
        hall_sum += hall;
    }
    if (t.counts.size() < 2 || real_sum == 0 || hall_sum == 0) return std::nullopt;
    return stats::chi_squared(t);
}

} // namespace detail

inline AuditReport build_report(const std::vector<VerdictRow>& rows,
                                const ReportOptions& opt = {},
                                const filters::CitationCorpus* corpus = nullptr) {
    if (rows.empty()) throw EmptyInput("no verdict rows to aggregate");
    score::validate(opt.scoring);
    if (opt.bootstrap_resamples < 1)
        throw std::invalid_argument("bootstrap_resamples must be positive");

    // Aggregation order is fixed by citation_id, so a permuted verdict file
    // produces the identical report.
    std::vector<const VerdictRow*> ordered;
    ordered.reserve(rows.size());
    for (const auto& r : rows) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const VerdictRow* a, const VerdictRow* b) {
                  return a->citation_id < b->citation_id;
              });
    for (size_t i = 1; i < ordered.size(); ++i)
        if (ordered[i]->citation_id == ordered[i - 1]->citation_id)
            throw std::invalid_argument("duplicate citation_id in verdict rows: " +
                                        ordered[i]->citation_id);

    AuditReport rep;
    rep.seed = opt.seed;
    rep.bootstrap_resamples = opt.bootstrap_resamples;
    rep.ci_level = opt.ci_level;
    rep.n_rows = static_cast<long long>(rows.size());

    std::map<std::string, std::vector<const VerdictRow*>> by_model;
    std::map<std::string, std::pair<long long, long long>> framing_counts, domain_counts,
        model_counts;
    for (const VerdictRow* r : ordered) {
        by_model[r->model_id].push_back(r);
        if (r->status == score::ResolutionStatus::resolved) {
            ++rep.n_resolved;
            const long long real = detail::is_confirmed(*r) ? 1 : 0;
            auto& f = framing_counts[citeparse::to_string(r->framing)];
            f.first += real;
            ++f.second;
            auto& d = domain_counts[r->domain];
            d.first += real;
            ++d.second;
            auto& m = model_counts[r->model_id];
            m.first += real;
            ++m.second;
        } else {
            ++rep.n_unresolved;
        }
    }

    for (const auto& [model_id, model_rows] : by_model) {
        ModelStats ms;
        ms.model_id = model_id;
        std::vector<int> indicators;
        std::vector<long long> cites;
        long long oa = 0, with_biblio = 0;
        for (const VerdictRow* r : model_rows) {
            if (r->status != score::ResolutionStatus::resolved) {
                ++ms.n_unresolved;
                continue;
            }
            ++ms.n_total;
            const bool confirmed = detail::is_confirmed(*r);
            if (confirmed) ++ms.n_real;
            indicators.push_back(confirmed ? 0 : 1);
            if (confirmed && r->bibliometrics) {
                ++with_biblio;
                if (r->bibliometrics->open_access) ++oa;
                cites.push_back(r->bibliometrics->cited_by);
            }
        }
        if (ms.n_total > 0) {
            ms.hallucination_rate =
                static_cast<double>(ms.n_total - ms.n_real) / static_cast<double>(ms.n_total);
            auto [lo, hi] = stats::bootstrap_ci(indicators, opt.bootstrap_resamples,
                                                opt.ci_level,
                                                rng::derive_seed(opt.seed, "model:" + model_id));
            ms.ci_lo = lo;
            ms.ci_hi = hi;
        }
        if (with_biblio > 0) {
            ms.oa_rate = static_cast<double>(oa) / static_cast<double>(with_biblio);
            ms.median_cited_by = detail::median_of(std::move(cites));
        }
        rep.models.push_back(std::move(ms));
    }

    auto breakdown = [](const std::map<std::string, std::pair<long long, long long>>& counts) {
        std::vector<BreakdownStats> out;
        for (const auto& [label, c] : counts) {
            BreakdownStats b;
            b.label = label;
            b.n_real = c.first;
            b.n_total = c.second;
            b.hallucination_rate =
                static_cast<double>(c.second - c.first) / static_cast<double>(c.second);
            out.push_back(std::move(b));
        }
        return out;
    };
    rep.by_framing = breakdown(framing_counts);
    rep.by_domain = breakdown(domain_counts);

    rep.model_status_test = detail::status_test(model_counts);
    rep.framing_status_test = detail::status_test(framing_counts);
    rep.domain_status_test = detail::status_test(domain_counts);

    if (corpus && corpus->models.size() >= 2) rep.agreement = filters::jaccard_agreement(*corpus);

    // threshold sensitivity: strict counts only confirmed as real, inclusive
    // promotes probable; rank stability is summarized by Spearman's rho
    std::vector<double> strict, inclusive;
    for (const auto& [model_id, model_rows] : by_model) {
        long long total = 0, real_strict = 0, real_incl = 0;
        for (const VerdictRow* r : model_rows) {
            if (r->status != score::ResolutionStatus::resolved) continue;
            ++total;
            if (detail::is_confirmed(*r)) ++real_strict;
            if (detail::is_real_inclusive(*r)) ++real_incl;
        }
        if (total == 0) continue;
        SensitivityRow row;
        row.model_id = model_id;
        row.strict_rate =
            static_cast<double>(total - real_strict) / static_cast<double>(total);
        row.inclusive_rate =
            static_cast<double>(total - real_incl) / static_cast<double>(total);
        strict.push_back(row.strict_rate);
        inclusive.push_back(row.inclusive_rate);
        rep.sensitivity.push_back(std::move(row));
    }
    if (strict.size() >= 2) {
        try {
            rep.sensitivity_spearman = stats::spearman_rho(strict, inclusive);
        } catch (const stats::ZeroVariance&) {
            rep.sensitivity_spearman = std::nullopt; // all models tied
        }
    }

    // typology mix over resolved citations below the confirmed threshold
    std::map<std::string, long long> typology_counts;
    for (const VerdictRow* r : ordered) {
        if (r->status != score::ResolutionStatus::resolved || detail::is_confirmed(*r)) continue;
        ++rep.n_subconfirmed;
        ++typology_counts[r->typology.value()];
    }
    if (rep.n_subconfirmed > 0) {
        std::set<std::string> emitted;
        auto push_share = [&](const std::string& label) {
            if (!emitted.insert(label).second) return;
            TypologyShare s;
            s.label = label;
            auto it = typology_counts.find(label);
            s.count = it == typology_counts.end() ? 0 : it->second;
            s.share = static_cast<double>(s.count) / static_cast<double>(rep.n_subconfirmed);
            rep.typology.push_back(std::move(s));
        };
        for (const auto& band : opt.scoring.typology_bands) push_share(band.label);
        for (const auto& [label, count] : typology_counts) push_share(label);
    }

    return rep;
}

// ---- emission ----------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

inline nlohmann::json test_json(const std::optional<stats::ChiSquaredResult>& t) {
    if (!t) return nullptr;
    return nlohmann::json{
        {"chi2", t->chi2}, {"dof", t->dof}, {"p", t->p}, {"cramers_v", t->cramers_v}};
}

} // namespace detail

inline nlohmann::json report_to_json(const AuditReport& rep) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : rep.models) {
        nlohmann::json j{{"model_id", m.model_id},
                         {"n_total", m.n_total},
                         {"n_real", m.n_real},
                         {"n_unresolved", m.n_unresolved},
                         {"hallucination_rate", m.hallucination_rate},
                         {"ci_95", {m.ci_lo, m.ci_hi}}};
        j["oa_rate"] = m.oa_rate ? nlohmann::json(*m.oa_rate) : nlohmann::json(nullptr);
        j["median_cited_by"] =
            m.median_cited_by ? nlohmann::json(*m.median_cited_by) : nlohmann::json(nullptr);
        models.push_back(std::move(j));
    }
    auto breakdown_json = [](const std::vector<BreakdownStats>& items) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& b : items)
            arr.push_back({{"label", b.label},
                           {"n_total", b.n_total},
                           {"n_real", b.n_real},
                           {"hallucination_rate", b.hallucination_rate}});
        return arr;
    };
    nlohmann::json sensitivity_rows = nlohmann::json::array();
    for (const auto& s : rep.sensitivity)
        sensitivity_rows.push_back({{"model_id", s.model_id},
                                    {"strict_rate", s.strict_rate},
                                    {"inclusive_rate", s.inclusive_rate}});
    nlohmann::json typology = nlohmann::json::array();
    for (const auto& t : rep.typology)
        typology.push_back({{"label", t.label}, {"count", t.count}, {"share", t.share}});

    nlohmann::json j{
        {"summary",
         {{"n_rows", rep.n_rows},
          {"n_resolved", rep.n_resolved},
          {"n_unresolved", rep.n_unresolved},
          {"n_subconfirmed", rep.n_subconfirmed},
          {"seed", rep.seed},
          {"bootstrap_resamples", rep.bootstrap_resamples},
          {"ci_level", rep.ci_level}}},
        {"models", models},
        {"by_framing", breakdown_json(rep.by_framing)},
        {"by_domain", breakdown_json(rep.by_domain)},
        {"tests",
         {{"model_status", detail::test_json(rep.model_status_test)},
          {"framing_status", detail::test_json(rep.framing_status_test)},
          {"domain_status", detail::test_json(rep.domain_status_test)}}},
        {"threshold_sensitivity",
         {{"rows", sensitivity_rows},
          {"spearman_rho", rep.sensitivity_spearman ? nlohmann::json(*rep.sensitivity_spearman)
                                                    : nlohmann::json(nullptr)}}},
        {"typology", typology},
    };
    if (rep.agreement) {
        j["agreement"] = {{"models", rep.agreement->models},
                          {"jaccard", rep.agreement->jaccard}};
    } else {
        j["agreement"] = nullptr;
    }
    return j;
}

inline std::string csv_per_model(const AuditReport& rep) {
    std::string out =
        "model,n_total,n_real,n_unresolved,hallucination_rate,ci_lo,ci_hi,oa_rate,"
        "median_cited_by\n";
    for (const auto& m : rep.models) {
        out += detail::csv_escape(m.model_id) + ',' + std::to_string(m.n_total) + ',' +
               std::to_string(m.n_real) + ',' + std::to_string(m.n_unresolved) + ',' +
               detail::fmt_double(m.hallucination_rate) + ',' + detail::fmt_double(m.ci_lo) +
               ',' + detail::fmt_double(m.ci_hi) + ',' +
               (m.oa_rate ? detail::fmt_double(*m.oa_rate) : "") + ',' +
               (m.median_cited_by ? detail::fmt_double(*m.median_cited_by) : "") + '\n';
    }
    return out;
}

namespace detail {

inline std::string csv_breakdown(const char* label_col,
                                 const std::vector<BreakdownStats>& items) {
    std::string out = std::string(label_col) + ",n_total,n_real,hallucination_rate\n";
    for (const auto& b : items)
        out += csv_escape(b.label) + ',' + std::to_string(b.n_total) + ',' +
               std::to_string(b.n_real) + ',' + fmt_double(b.hallucination_rate) + '\n';
    return out;
}

} // namespace detail

inline std::string csv_per_framing(const AuditReport& rep) {
    return detail::csv_breakdown("framing", rep.by_framing);
}

inline std::string csv_per_domain(const AuditReport& rep) {
    return detail::csv_breakdown("domain", rep.by_domain);
}

inline std::string csv_agreement(const AuditReport& rep) {
    std::string out = "model";
    if (!rep.agreement) return out + '\n';
    for (const auto& m : rep.agreement->models) out += ',' + detail::csv_escape(m);
    out += '\n';
    for (size_t i = 0; i < rep.agreement->models.size(); ++i) {
        out += detail::csv_escape(rep.agreement->models[i]);
        for (double v : rep.agreement->jaccard[i]) out += ',' + detail::fmt_double(v);
        out += '\n';
    }
    return out;
}

inline std::string csv_typology(const AuditReport& rep) {
    std::string out = "label,count,share\n";
    for (const auto& t : rep.typology)
        out += detail::csv_escape(t.label) + ',' + std::to_string(t.count) + ',' +
               detail::fmt_double(t.share) + '\n';
    return out;
}

// Writes report.json plus the flat CSV tables into dir (created if needed).
inline void write_report_files(const std::filesystem::path& dir, const AuditReport& rep) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report file: " + (dir / name).string());
        out << content;
    };
    write("report.json", report_to_json(rep).dump(2) + "\n");
    write("per_model.csv", csv_per_model(rep));
    write("per_framing.csv", csv_per_framing(rep));
    write("per_domain.csv", csv_per_domain(rep));
    write("agreement.csv", csv_agreement(rep));
    write("typology.csv", csv_typology(rep));
}

} // namespace citeaudit::report
