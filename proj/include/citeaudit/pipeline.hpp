#pragma once

// End-to-end orchestration: read responses, extract and parse citations,
// run the staged filters, resolve what survives, classify verdicts, and
// aggregate the audit report. Every intermediate stage is persisted when an
// output directory is given, so a run can be audited file by file.

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
#include "classify.hpp"
#include "config.hpp"
#include "filters.hpp"
#include "jsonl.hpp"
#include "report.hpp"
#include "score.hpp"

namespace citeaudit::pipeline {

// ---- stage trace serialization -----------------------------------------------

inline nlohmann::json trace_to_json(const filters::StageTrace& t) {
    nlohmann::json outcomes = nlohmann::json::array();
    for (const auto& o : t.outcomes)
        outcomes.push_back({{"stage", filters::to_string(o.stage)},
                            {"decision", o.decision},
                            {"value", o.value}});
    nlohmann::json j{{"citation_id", t.citation_id},
                     {"outcomes", outcomes},
                     {"unresolved", t.unresolved}};
    j["verdict"] = t.verdict ? jsonl::to_json(*t.verdict) : nlohmann::json(nullptr);
    j["rejected_at"] = t.rejected_at ? nlohmann::json(filters::to_string(*t.rejected_at))
                                     : nlohmann::json(nullptr);
    return j;
}

inline filters::StageTrace trace_from_json(const nlohmann::json& j) {
    filters::StageTrace t;
    t.citation_id = j.at("citation_id").get<std::string>();
    for (const auto& oj : j.at("outcomes")) {
        filters::StageOutcome o;
        o.stage = filters::stage_from_string(oj.at("stage").get<std::string>());
        o.decision = oj.at("decision").get<std::string>();
        o.value = oj.at("value").get<double>();
        t.outcomes.push_back(std::move(o));
    }
    t.unresolved = j.at("unresolved").get<bool>();
    if (!j.at("verdict").is_null()) t.verdict = jsonl::verdict_from_json(j.at("verdict"));
    if (!j.at("rejected_at").is_null())
        t.rejected_at = filters::stage_from_string(j.at("rejected_at").get<std::string>());
    return t;
}

inline std::vector<filters::StageTrace> read_traces(const std::string& path) {
    return jsonl::read_jsonl_file<filters::StageTrace>(
        path, [](const nlohmann::json& j) { return trace_from_json(j); });
}

// ---- extraction --------------------------------------------------------------

// Control-condition text gets the conservative extractor: prose explanations
// must not yield citations unless the line carries real bibliographic signal.
inline citeparse::ExtractionMode mode_for(const citeparse::RawResponse& r) {
    return r.condition == citeparse::Condition::unprompted
               ? citeparse::ExtractionMode::conservative
               : citeparse::ExtractionMode::standard;
}

inline std::vector<citeparse::CitationRecord> extract_from_response(
    const citeparse::RawResponse& r, citeparse::ExtractionMode mode,
    const citeparse::Lexicon& lex = citeparse::default_lexicon()) {
    std::vector<citeparse::CitationRecord> out;
    std::set<std::string> seen; // a repeated raw line is the same citation
    for (const auto& raw : citeparse::extract_reference_strings(r.text, mode, lex))
        if (auto rec = citeparse::try_parse_citation(raw, r.response_id, lex))
            if (seen.insert(rec->citation_id).second) out.push_back(std::move(*rec));
    return out;
}

inline std::vector<citeparse::CitationRecord> extract_from_response(
    const citeparse::RawResponse& r,
    const citeparse::Lexicon& lex = citeparse::default_lexicon()) {
    return extract_from_response(r, mode_for(r), lex);
}

// ---- end-to-end run ------------------------------------------------------------

struct RunOptions {
    config::ToolkitConfig config;
    const classify::TrainedModel* prescreen_model = nullptr; // enables the prescreen stage
    bool use_consensus = false; // apply the consensus/repetition gates from config.filters
    int bootstrap_resamples = 10000;
    std::filesystem::path out_dir; // empty: keep everything in memory only
};

struct RunResult {
    std::vector<citeparse::RawResponse> responses;
    std::vector<citeparse::CitationRecord> records;
    filters::CitationCorpus corpus;
    std::vector<filters::StageTrace> traces;
    std::vector<score::ResolutionOutcome> outcomes; // records that reached resolution
    std::vector<score::Verdict> verdicts;           // resolved records only
    std::vector<report::VerdictRow> rows;           // verdict file content
    std::optional<report::AuditReport> report;
    std::string report_error; // "EmptyInput" when there was nothing to aggregate
    long long resolver_calls = 0;
};

inline void persist_run(const std::filesystem::path& dir, const RunResult& run,
                        const config::ToolkitConfig& cfg) {
    std::filesystem::create_directories(dir);
    jsonl::write_jsonl_file((dir / "citations.jsonl").string(), run.records);

    std::ofstream traces_out(dir / "traces.jsonl", std::ios::binary);
    if (!traces_out)
        throw std::runtime_error("cannot write " + (dir / "traces.jsonl").string());
    for (const auto& t : run.traces) traces_out << trace_to_json(t).dump() << '\n';

    std::ofstream outcomes_out(dir / "outcomes.jsonl", std::ios::binary);
    if (!outcomes_out)
        throw std::runtime_error("cannot write " + (dir / "outcomes.jsonl").string());
    for (const auto& o : run.outcomes) outcomes_out << jsonl::to_json(o).dump() << '\n';

    report::write_rows_file((dir / "verdicts.jsonl").string(), run.rows);
    if (run.report) report::write_report_files(dir / "report", *run.report);

    nlohmann::json summary{{"seed", cfg.seed},
                           {"n_responses", run.responses.size()},
                           {"n_records", run.records.size()},
                           {"n_rows", run.rows.size()},
                           {"resolver_calls", run.resolver_calls},
                           {"config", config::to_json(cfg)}};
    summary["report_error"] =
        run.report_error.empty() ? nlohmann::json(nullptr) : nlohmann::json(run.report_error);
    std::ofstream summary_out(dir / "run.json", std::ios::binary);
    if (!summary_out) throw std::runtime_error("cannot write " + (dir / "run.json").string());
    summary_out << summary.dump(2) << '\n';
}

inline RunResult run_end_to_end(std::vector<citeparse::RawResponse> responses,
                                const filters::Resolver& resolver, const RunOptions& opt) {
    config::validate(opt.config);
    const auto& scoring = opt.config.scoring;

    RunResult run;
    run.responses = std::move(responses);

    std::map<std::string, const citeparse::RawResponse*> response_of;
    std::vector<std::vector<citeparse::CitationRecord>> per_response;
    per_response.reserve(run.responses.size());
    for (const auto& resp : run.responses) {
        if (!response_of.emplace(resp.response_id, &resp).second)
            throw std::invalid_argument("duplicate response_id: " + resp.response_id);
        per_response.push_back(extract_from_response(resp));
        for (const auto& rec : per_response.back()) run.records.push_back(rec);
    }

    run.corpus = filters::build_corpus(run.responses, run.records);

    auto staged_cfg = config::staged_config(opt.config);
    std::map<std::string, const citeparse::RawResponse*> resp_of_record;
    filters::Resolver counting = [&](const citeparse::CitationRecord& rec) {
        ++run.resolver_calls;
        auto outcome = resolver(rec);
        run.outcomes.push_back(outcome);
        return outcome;
    };

    for (size_t i = 0; i < run.responses.size(); ++i) {
        const auto& resp = run.responses[i];
        const auto& group = per_response[i];
        if (group.empty()) continue;
        for (const auto& rec : group) resp_of_record[rec.citation_id] = &resp;
        filters::CorpusContext ctx;
        if (opt.use_consensus) {
            ctx.corpus = &run.corpus;
            ctx.model_id = resp.model_id;
            ctx.prompt_id = resp.prompt_id;
        }
        auto traces = filters::staged_pipeline(group, opt.prescreen_model, counting,
                                               staged_cfg, scoring, ctx);
        for (auto& t : traces) run.traces.push_back(std::move(t));
    }

    for (const auto& outcome : run.outcomes) {
        const auto* resp = resp_of_record.at(outcome.citation_id);
        run.rows.push_back(report::make_row(*resp, outcome, scoring));
        if (outcome.status == score::ResolutionStatus::resolved)
            run.verdicts.push_back(score::classify_verdict(outcome, scoring));
    }

    report::ReportOptions ropt;
    ropt.scoring = scoring;
    ropt.bootstrap_resamples = opt.bootstrap_resamples;
    ropt.seed = opt.config.seed;
    try {
        run.report = report::build_report(run.rows, ropt, &run.corpus);
    } catch (const report::EmptyInput&) {
        run.report_error = "EmptyInput";
    }

    if (!opt.out_dir.empty()) persist_run(opt.out_dir, run, opt.config);
    return run;
}

inline RunResult run_end_to_end_file(const std::filesystem::path& responses_path,
                                     const filters::Resolver& resolver,
                                     const RunOptions& opt) {
    return run_end_to_end(jsonl::read_responses(responses_path.string()), resolver, opt);
}

} // namespace citeaudit::pipeline
