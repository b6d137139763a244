// citeaudit: batch verification of machine-generated citations.
//
// The subcommands mirror the pipeline stages: promptgen renders the prompt
// kit, extract pulls citation records out of response JSONL, screen/train/
// eval/featurize cover the fabrication classifier, verify resolves records
// against the bibliographic indices, consensus and repetition expose the
// cross-model filters, report aggregates verdicts, and run chains the whole
// thing. Exit codes: 0 ok, 1 input problem, 2 external service failure,
// 3 internal invariant violation.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "citeaudit/citeparse.hpp"
#include "citeaudit/classify.hpp"
#include "citeaudit/config.hpp"
#include "citeaudit/features.hpp"
#include "citeaudit/filters.hpp"
#include "citeaudit/http_transport.hpp"
#include "citeaudit/jsonl.hpp"
#include "citeaudit/pipeline.hpp"
#include "citeaudit/prompts.hpp"
#include "citeaudit/report.hpp"
#include "citeaudit/resolve.hpp"
#include "citeaudit/score.hpp"

namespace {

using citeaudit::config::ToolkitConfig;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kServiceError = 2;
constexpr int kInternalError = 3;

// ---- shared plumbing ---------------------------------------------------------

ToolkitConfig effective_config(const std::string& path) {
    if (path.empty()) {
        ToolkitConfig cfg;
        citeaudit::config::apply_environment(cfg);
        citeaudit::config::validate(cfg);
        return cfg;
    }
    return citeaudit::config::load_config(path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void emit_json(const json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    write_text(out_path, j.dump(2) + "\n");
    std::cout << "wrote " << out_path << "\n";
}

citeaudit::features::FeatureTable read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    return citeaudit::features::read_features_csv(in, path);
}

// Cache-only replay must never reach a transport; if it does, that is a replay
// violation, not a network error.
struct OfflineTransport : citeaudit::resolve::Transport {
    citeaudit::resolve::HttpResponse get(const citeaudit::resolve::HttpRequest& req) override {
        throw citeaudit::resolve::ReplayViolation("replay run asked for the network: " + req.url);
    }
};

// Which transport a run resolves through: fixtures replay reads recorded
// files, live runs go over HTTP and optionally record fixtures as they go.
struct TransportStack {
    std::unique_ptr<citeaudit::resolve::Transport> live;
    std::unique_ptr<citeaudit::resolve::Transport> wrapper;
    citeaudit::resolve::Transport* active = nullptr;
};

TransportStack make_transport(const ToolkitConfig& cfg) {
    TransportStack t;
    const auto& r = cfg.resolver;
    if (r.replay) {
        if (!r.fixtures_dir.empty())
            t.wrapper = std::make_unique<citeaudit::resolve::FixtureTransport>(r.fixtures_dir);
        else
            t.wrapper = std::make_unique<OfflineTransport>();
        t.active = t.wrapper.get();
        return t;
    }
    t.live = std::make_unique<citeaudit::resolve::HttplibTransport>();
    if (!r.fixtures_dir.empty()) {
        t.wrapper = std::make_unique<citeaudit::resolve::RecordingTransport>(*t.live,
                                                                             r.fixtures_dir);
        t.active = t.wrapper.get();
    } else {
        t.active = t.live.get();
    }
    return t;
}

citeaudit::classify::Trainer trainer_for(const std::string& kind, const ToolkitConfig& cfg,
                                         std::uint64_t seed) {
    using namespace citeaudit::classify;
    if (kind == "logistic") {
        auto h = cfg.logistic;
        h.seed = seed;
        return [h](const Dataset& d) { return train_logistic(d, h); };
    }
    if (kind == "forest") {
        auto h = cfg.forest;
        h.seed = seed;
        return [h](const Dataset& d) { return train_random_forest(d, h); };
    }
    auto h = cfg.gbm;
    h.seed = seed;
    return [h](const Dataset& d) { return train_gbm(d, h); };
}

json metrics_json(const citeaudit::classify::EvalMetrics& m) {
    return {{"n", m.n},
            {"auc", m.auc},
            {"average_precision", m.average_precision},
            {"accuracy", m.accuracy}};
}

// ---- promptgen -----------------------------------------------------------------

struct PromptgenOpts {
    std::string config, topics, pools, out;
    std::string framings = "seminal,recent";
    int replications = 3;
    bool include_control = false;
};

std::map<std::string, std::vector<citeaudit::prompts::CandidateEntry>> load_pools(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open candidate pools: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("candidate pools: " + std::string(e.what()));
    }
    if (!j.is_object()) throw std::invalid_argument("candidate pools must map topic to entries");
    std::map<std::string, std::vector<citeaudit::prompts::CandidateEntry>> pools;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_array())
            throw std::invalid_argument("pool for \"" + it.key() + "\" must be an array");
        auto& pool = pools[it.key()];
        for (const auto& ej : it.value()) {
            citeaudit::prompts::CandidateEntry e;
            try {
                e.title = ej.at("title").get<std::string>();
                e.authors = ej.at("authors").get<std::string>();
                e.year = ej.at("year").get<int>();
                e.journal = ej.at("journal").get<std::string>();
            } catch (const json::exception& ex) {
                throw std::invalid_argument("pool entry for \"" + it.key() + "\": " + ex.what());
            }
            pool.push_back(std::move(e));
        }
    }
    return pools;
}

void run_promptgen(const PromptgenOpts& o) {
    effective_config(o.config);
    auto domains = o.topics.empty() ? citeaudit::prompts::default_domains()
                                    : citeaudit::prompts::load_domains(o.topics);

    citeaudit::prompts::GenerateOptions gen;
    gen.replications = o.replications;
    gen.include_control = o.include_control;
    gen.framings.clear();
    std::string cur;
    for (char c : o.framings + ",") {
        if (c != ',') {
            cur += c;
            continue;
        }
        if (!cur.empty()) gen.framings.push_back(citeaudit::citeparse::framing_from_string(cur));
        cur.clear();
    }
    if (gen.framings.empty()) throw std::invalid_argument("no framings given");
    if (!o.pools.empty()) gen.candidate_pools = load_pools(o.pools);

    auto specs = citeaudit::prompts::generate_prompt_set(domains, gen);

    std::filesystem::create_directories(o.out);
    json entries = json::array();
    for (const auto& s : specs) {
        std::string file = s.prompt_id + ".json";
        write_text(std::filesystem::path(o.out) / file,
                   citeaudit::prompts::spec_to_json(s).dump(2) + "\n");
        entries.push_back({{"prompt_id", s.prompt_id},
                           {"file", file},
                           {"condition", citeaudit::citeparse::to_string(s.condition)},
                           {"domain", s.domain},
                           {"topic", s.topic},
                           {"framing", citeaudit::citeparse::to_string(s.framing)},
                           {"replication", s.replication}});
    }
    json manifest{{"version", "promptset.v1"},
                  {"n_specs", specs.size()},
                  {"replications", o.replications},
                  {"include_control", o.include_control},
                  {"prompts", entries}};
    write_text(std::filesystem::path(o.out) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << specs.size() << " prompt files to " << o.out << "\n";
}

void register_promptgen(CLI::App& app) {
    auto o = std::make_shared<PromptgenOpts>();
    auto* cmd = app.add_subcommand("promptgen",
                                   "render the prompt kit, one JSON per prompt plus a manifest");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--out", o->out, "output directory")->required();
    cmd->add_option("--topics", o->topics, "topic catalog JSON (default: built-in catalog)");
    cmd->add_option("--replications", o->replications, "replications per prompt")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--framings", o->framings, "comma-separated framings (seminal, recent)");
    cmd->add_flag("--include-control", o->include_control, "add the no-citations control prompts");
    cmd->add_option("--pools", o->pools,
                    "candidate pools JSON: topic -> [{title, authors, year, journal}]");
    cmd->callback([o] { run_promptgen(*o); });
}

// ---- extract -------------------------------------------------------------------

struct ExtractOpts {
    std::string config, responses, out;
    std::string mode = "auto";
};

void run_extract(const ExtractOpts& o) {
    effective_config(o.config);
    auto responses = citeaudit::jsonl::read_responses(o.responses);

    std::set<std::string> seen;
    std::vector<citeaudit::citeparse::CitationRecord> records;
    for (const auto& r : responses) {
        if (!seen.insert(r.response_id).second)
            throw std::invalid_argument("duplicate response_id: " + r.response_id);
        auto mode = o.mode == "auto"         ? citeaudit::pipeline::mode_for(r)
                    : o.mode == "standard"   ? citeaudit::citeparse::ExtractionMode::standard
                                             : citeaudit::citeparse::ExtractionMode::conservative;
        for (auto& rec : citeaudit::pipeline::extract_from_response(r, mode))
            records.push_back(std::move(rec));
    }
    citeaudit::jsonl::write_jsonl_file(o.out, records);
    std::cout << "extracted " << records.size() << " citations from " << responses.size()
              << " responses -> " << o.out << "\n";
}

void register_extract(CLI::App& app) {
    auto o = std::make_shared<ExtractOpts>();
    auto* cmd = app.add_subcommand("extract", "pull citation records out of response JSONL");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--responses", o->responses, "response JSONL to scan")->required();
    cmd->add_option("--out", o->out, "citation JSONL to write")->required();
    cmd->add_option("--mode", o->mode, "extraction mode; auto picks by response condition")
        ->check(CLI::IsMember({"auto", "standard", "conservative"}));
    cmd->callback([o] { run_extract(*o); });
}

// ---- featurize -------------------------------------------------------------------

struct FeaturizeOpts {
    std::string config, citations, responses, verdicts, out;
};

void run_featurize(const FeaturizeOpts& o) {
    auto cfg = effective_config(o.config);
    auto records = citeaudit::jsonl::read_citations(o.citations);

    std::map<std::string, std::string> model_of_response;
    if (!o.responses.empty())
        for (const auto& r : citeaudit::jsonl::read_responses(o.responses))
            model_of_response[r.response_id] = r.model_id;

    // Labels come from audited verdicts: confirmed is real, anything below is
    // not. Unresolved citations carry no label and are dropped from the table.
    std::map<std::string, citeaudit::features::Label> label_of;
    std::map<std::string, std::string> model_of_citation;
    if (!o.verdicts.empty()) {
        for (const auto& row : citeaudit::report::read_rows(o.verdicts)) {
            model_of_citation[row.citation_id] = row.model_id;
            if (row.status != citeaudit::score::ResolutionStatus::resolved) continue;
            label_of[row.citation_id] = *row.tier == citeaudit::score::Tier::confirmed
                                            ? citeaudit::features::Label::real
                                            : citeaudit::features::Label::hallucinated;
        }
    }

    std::vector<citeaudit::features::FeatureVector> rows;
    std::vector<std::string> model_ids;
    std::size_t dropped = 0;
    for (const auto& rec : records) {
        auto fv = citeaudit::features::extract_features(rec, cfg.scoring);
        if (!o.verdicts.empty()) {
            auto it = label_of.find(rec.citation_id);
            if (it == label_of.end()) {
                ++dropped;
                continue;
            }
            fv.label = it->second;
        }
        std::string model;
        if (!o.responses.empty()) {
            auto mit = model_of_response.find(rec.source_response);
            if (mit == model_of_response.end())
                throw std::invalid_argument("citation " + rec.citation_id +
                                            " references unknown response " + rec.source_response);
            model = mit->second;
        } else if (auto mit = model_of_citation.find(rec.citation_id);
                   mit != model_of_citation.end()) {
            model = mit->second;
        }
        rows.push_back(std::move(fv));
        model_ids.push_back(std::move(model));
    }

    const bool with_models = !o.responses.empty() || !o.verdicts.empty();
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    citeaudit::features::write_features_csv(out, rows, with_models ? &model_ids : nullptr);
    std::cout << "featurized " << rows.size() << " citations";
    if (dropped) std::cout << " (dropped " << dropped << " without a resolved verdict)";
    std::cout << " -> " << o.out << "\n";
}

void register_featurize(CLI::App& app) {
    auto o = std::make_shared<FeaturizeOpts>();
    auto* cmd = app.add_subcommand("featurize", "turn citation records into a feature CSV");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--citations", o->citations, "citation JSONL")->required();
    cmd->add_option("--out", o->out, "feature CSV to write")->required();
    cmd->add_option("--responses", o->responses, "response JSONL, adds a model_id column");
    cmd->add_option("--verdicts", o->verdicts,
                    "verdict row JSONL, adds labels (confirmed = real, below = hallucinated)");
    cmd->callback([o] { run_featurize(*o); });
}

// ---- screen ---------------------------------------------------------------------

struct ScreenOpts {
    std::string config, citations, model, out;
    std::optional<double> threshold;
};

void run_screen(const ScreenOpts& o) {
    auto cfg = effective_config(o.config);
    double threshold = o.threshold.value_or(cfg.filters.prescreen_threshold);
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("threshold must lie in [0, 1]");

    auto model = citeaudit::classify::load_model(o.model);
    auto records = citeaudit::jsonl::read_citations(o.citations);

    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    std::size_t passed = 0;
    for (const auto& rec : records) {
        double p = citeaudit::classify::predict(
            model, citeaudit::features::extract_features(rec, cfg.scoring));
        bool pass = threshold >= 1.0 || p < threshold; // same gate as the staged pipeline
        passed += pass;
        out << json{{"citation_id", rec.citation_id},
                    {"probability", p},
                    {"decision", pass ? "pass" : "reject"}}
                   .dump()
            << "\n";
    }
    std::cout << "screened " << records.size() << " citations: " << passed << " pass, "
              << records.size() - passed << " reject -> " << o.out << "\n";
}

void register_screen(CLI::App& app) {
    auto o = std::make_shared<ScreenOpts>();
    auto* cmd =
        app.add_subcommand("screen", "pre-screen citations with a trained fabrication model");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--citations", o->citations, "citation JSONL")->required();
    cmd->add_option("--model", o->model, "trained model JSON")->required();
    cmd->add_option("--out", o->out, "decision JSONL to write")->required();
    cmd->add_option("--threshold", o->threshold,
                    "reject when predicted fabrication probability reaches this value");
    cmd->callback([o] { run_screen(*o); });
}

// ---- train ----------------------------------------------------------------------

struct TrainOpts {
    std::string config, features, kind, out;
    std::optional<std::uint64_t> seed;
};

void run_train(const TrainOpts& o) {
    auto cfg = effective_config(o.config);
    std::uint64_t seed = o.seed.value_or(cfg.seed);
    auto table = read_features(o.features);
    if (!table.has_labels)
        throw std::invalid_argument("feature file has no label column: " + o.features);
    citeaudit::classify::Dataset ds{table.rows, table.model_ids};
    auto model = trainer_for(o.kind, cfg, seed)(ds);
    citeaudit::classify::save_model(o.out, model);
    std::cout << "trained " << o.kind << " on " << ds.rows.size() << " rows (seed " << seed
              << ") -> " << o.out << "\n";
}

void register_train(CLI::App& app) {
    auto o = std::make_shared<TrainOpts>();
    auto* cmd = app.add_subcommand("train", "fit a fabrication classifier on a feature CSV");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--features", o->features, "labeled feature CSV")->required();
    cmd->add_option("--kind", o->kind, "model family")
        ->required()
        ->check(CLI::IsMember({"logistic", "forest", "gbm"}));
    cmd->add_option("--out", o->out, "model JSON to write")->required();
    cmd->add_option("--seed", o->seed, "training seed (default: config seed)");
    cmd->callback([o] { run_train(*o); });
}

// ---- eval -----------------------------------------------------------------------

struct EvalOpts {
    std::string config, features, model, kind, out;
    int kfold = 5;
    bool lomo = false;
    double threshold = 0.5;
    std::optional<std::uint64_t> seed;
};

void run_eval(const EvalOpts& o) {
    auto cfg = effective_config(o.config);
    std::uint64_t seed = o.seed.value_or(cfg.seed);
    auto table = read_features(o.features);
    if (!table.has_labels)
        throw std::invalid_argument("feature file has no label column: " + o.features);
    citeaudit::classify::Dataset ds{table.rows, table.model_ids};

    const bool have_model = !o.model.empty();
    const bool have_kind = !o.kind.empty();
    if (have_model == have_kind)
        throw std::invalid_argument(
            "pass exactly one of --model (score a trained model) or --kind (cross-validate)");

    json out;
    if (have_model) {
        if (o.lomo)
            throw std::invalid_argument("--lomo retrains per held-out model; use --kind");
        auto model = citeaudit::classify::load_model(o.model);
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& fv : ds.rows) {
            scores.push_back(citeaudit::classify::predict(model, fv));
            labels.push_back(citeaudit::classify::label_int(fv));
        }
        auto m = citeaudit::classify::eval_metrics(scores, labels, o.threshold);
        out = {{"mode", "holdout"},
               {"model", o.model},
               {"threshold", o.threshold},
               {"metrics", metrics_json(m)}};
    } else if (o.lomo) {
        if (table.model_ids.empty())
            throw std::invalid_argument("feature file has no model_id column (needed for --lomo)");
        auto res = citeaudit::classify::lomo_eval(ds, trainer_for(o.kind, cfg, seed), o.threshold);
        json groups = json::array();
        for (const auto& g : res.per_group)
            groups.push_back({{"model_id", g.group}, {"metrics", metrics_json(g.metrics)}});
        out = {{"mode", "lomo"},        {"kind", o.kind},
               {"seed", seed},          {"threshold", o.threshold},
               {"mean_auc", res.mean_auc}, {"sd_auc", res.sd_auc},
               {"per_group", groups}};
    } else {
        auto res = citeaudit::classify::kfold_eval(ds, o.kfold, seed,
                                                   trainer_for(o.kind, cfg, seed), o.threshold);
        json folds = json::array();
        for (const auto& m : res.per_fold) folds.push_back(metrics_json(m));
        out = {{"mode", "kfold"},
               {"kind", o.kind},
               {"k", o.kfold},
               {"seed", seed},
               {"threshold", o.threshold},
               {"mean_auc", res.mean_auc},
               {"sd_auc", res.sd_auc},
               {"mean_ap", res.mean_ap},
               {"mean_accuracy", res.mean_accuracy},
               {"per_fold", folds}};
    }
    emit_json(out, o.out);
}

void register_eval(CLI::App& app) {
    auto o = std::make_shared<EvalOpts>();
    auto* cmd = app.add_subcommand("eval", "evaluate a classifier by cross-validation or holdout");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--features", o->features, "labeled feature CSV")->required();
    cmd->add_option("--model", o->model, "trained model JSON to score as-is");
    cmd->add_option("--kind", o->kind, "model family to cross-validate")
        ->check(CLI::IsMember({"logistic", "forest", "gbm"}));
    cmd->add_option("--kfold", o->kfold, "stratified folds")->check(CLI::Range(2, 1000));
    cmd->add_flag("--lomo", o->lomo, "leave-one-model-out instead of k-fold");
    cmd->add_option("--threshold", o->threshold, "accuracy threshold")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", o->seed, "fold/training seed (default: config seed)");
    cmd->add_option("--out", o->out, "metrics JSON path (default: stdout)");
    cmd->callback([o] { run_eval(*o); });
}

// ---- verify ---------------------------------------------------------------------

struct VerifyOpts {
    std::string config, citations, outcomes, verdicts;
};

void run_verify(const VerifyOpts& o) {
    auto cfg = effective_config(o.config);
    auto records = citeaudit::jsonl::read_citations(o.citations);

    auto transport = make_transport(cfg);
    citeaudit::resolve::SystemClock clock;
    citeaudit::resolve::Resolver resolver(*transport.active, clock,
                                          citeaudit::config::resolver_config(cfg));

    std::vector<citeaudit::score::ResolutionOutcome> outcomes;
    std::vector<citeaudit::score::Verdict> verdicts;
    std::size_t confirmed = 0, probable = 0, hallucinated = 0, unresolved = 0;
    for (const auto& rec : records) {
        auto outcome = resolver.resolve_citation(rec, cfg.scoring);
        if (outcome.status == citeaudit::score::ResolutionStatus::resolved) {
            auto v = citeaudit::score::classify_verdict(outcome, cfg.scoring);
            switch (v.tier) {
                case citeaudit::score::Tier::confirmed: ++confirmed; break;
                case citeaudit::score::Tier::probable: ++probable; break;
                case citeaudit::score::Tier::hallucinated: ++hallucinated; break;
            }
            verdicts.push_back(std::move(v));
        } else {
            ++unresolved;
        }
        outcomes.push_back(std::move(outcome));
    }

    citeaudit::jsonl::write_jsonl_file(o.outcomes, outcomes);
    if (!o.verdicts.empty()) citeaudit::jsonl::write_jsonl_file(o.verdicts, verdicts);
    std::cout << "resolved " << records.size() - unresolved << " of " << records.size()
              << " citations: " << confirmed << " confirmed, " << probable << " probable, "
              << hallucinated << " hallucinated, " << unresolved << " unresolved\n";
}

void register_verify(CLI::App& app) {
    auto o = std::make_shared<VerifyOpts>();
    auto* cmd =
        app.add_subcommand("verify", "resolve citations against the bibliographic indices");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--citations", o->citations, "citation JSONL")->required();
    cmd->add_option("--outcomes", o->outcomes, "resolution outcome JSONL to write")->required();
    cmd->add_option("--verdicts", o->verdicts, "tier verdict JSONL to write");
    cmd->callback([o] { run_verify(*o); });
}

// ---- consensus / repetition --------------------------------------------------------

struct ConsensusOpts {
    std::string config, responses, citations, prompt, out;
    std::optional<int> k;
};

void run_consensus(const ConsensusOpts& o) {
    auto cfg = effective_config(o.config);
    int k = o.k.value_or(cfg.filters.consensus_k);
    auto corpus = citeaudit::filters::build_corpus(citeaudit::jsonl::read_responses(o.responses),
                                                   citeaudit::jsonl::read_citations(o.citations));
    auto counts = citeaudit::filters::consensus_counts(corpus, o.prompt);
    auto retained = citeaudit::filters::consensus_filter(corpus, o.prompt, k);

    json keys = json::array();
    for (const auto& [key, models] : counts)
        keys.push_back(
            {{"key", key.key}, {"models", models}, {"retained", retained.count(key) > 0}});
    emit_json(json{{"prompt_id", o.prompt},
                   {"k", k},
                   {"n_keys", counts.size()},
                   {"n_retained", retained.size()},
                   {"keys", keys}},
              o.out);
}

void register_consensus(CLI::App& app) {
    auto o = std::make_shared<ConsensusOpts>();
    auto* cmd = app.add_subcommand(
        "consensus", "count how many models cite each work for a prompt and apply the k filter");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--responses", o->responses, "response JSONL")->required();
    cmd->add_option("--citations", o->citations, "citation JSONL")->required();
    cmd->add_option("--prompt", o->prompt, "prompt id to examine")->required();
    cmd->add_option("--k", o->k, "minimum distinct models (default: config)");
    cmd->add_option("--out", o->out, "JSON path (default: stdout)");
    cmd->callback([o] { run_consensus(*o); });
}

struct RepetitionOpts {
    std::string config, responses, citations, model, prompt, out;
    std::optional<int> r, n;
};

void run_repetition(const RepetitionOpts& o) {
    auto cfg = effective_config(o.config);
    int r = o.r.value_or(cfg.filters.repetition_r);
    int n = o.n.value_or(cfg.filters.repetition_n);
    auto corpus = citeaudit::filters::build_corpus(citeaudit::jsonl::read_responses(o.responses),
                                                   citeaudit::jsonl::read_citations(o.citations));
    auto counts = citeaudit::filters::repetition_counts(corpus, o.model, o.prompt, n);
    auto retained = citeaudit::filters::repetition_filter(corpus, o.model, o.prompt, r, n);

    json keys = json::array();
    for (const auto& [key, support] : counts)
        keys.push_back(
            {{"key", key.key}, {"support", support}, {"retained", retained.count(key) > 0}});
    emit_json(json{{"model_id", o.model},
                   {"prompt_id", o.prompt},
                   {"r", r},
                   {"n", n},
                   {"n_keys", counts.size()},
                   {"n_retained", retained.size()},
                   {"keys", keys}},
              o.out);
}

void register_repetition(CLI::App& app) {
    auto o = std::make_shared<RepetitionOpts>();
    auto* cmd = app.add_subcommand(
        "repetition", "count how often one model repeats each work across replications");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--responses", o->responses, "response JSONL")->required();
    cmd->add_option("--citations", o->citations, "citation JSONL")->required();
    cmd->add_option("--model-id", o->model, "model to examine")->required();
    cmd->add_option("--prompt", o->prompt, "prompt id to examine")->required();
    cmd->add_option("--r", o->r, "minimum repetitions (default: config)");
    cmd->add_option("--n", o->n, "replications asked of the model (default: config)");
    cmd->add_option("--out", o->out, "JSON path (default: stdout)");
    cmd->callback([o] { run_repetition(*o); });
}

// ---- report ---------------------------------------------------------------------

struct ReportCmdOpts {
    std::string config, verdicts, responses, citations, out;
    int resamples = 10000;
    double level = 0.95;
    std::optional<std::uint64_t> seed;
};

void run_report(const ReportCmdOpts& o) {
    auto cfg = effective_config(o.config);
    auto rows = citeaudit::report::read_rows(o.verdicts);

    if (o.responses.empty() != o.citations.empty())
        throw std::invalid_argument(
            "--responses and --citations go together; they rebuild the corpus for the "
            "model-agreement matrix");
    std::optional<citeaudit::filters::CitationCorpus> corpus;
    if (!o.responses.empty())
        corpus = citeaudit::filters::build_corpus(citeaudit::jsonl::read_responses(o.responses),
                                                  citeaudit::jsonl::read_citations(o.citations));

    citeaudit::report::ReportOptions ropt;
    ropt.scoring = cfg.scoring;
    ropt.bootstrap_resamples = o.resamples;
    ropt.ci_level = o.level;
    ropt.seed = o.seed.value_or(cfg.seed);

    auto rep = citeaudit::report::build_report(rows, ropt, corpus ? &*corpus : nullptr);
    citeaudit::report::write_report_files(o.out, rep);
    std::cout << "report over " << rep.n_rows << " rows (" << rep.n_resolved << " resolved) -> "
              << o.out << "\n";
}

void register_report(CLI::App& app) {
    auto o = std::make_shared<ReportCmdOpts>();
    auto* cmd = app.add_subcommand("report", "aggregate verdict rows into the audit report");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--verdicts", o->verdicts, "verdict row JSONL")->required();
    cmd->add_option("--out", o->out, "report directory to write")->required();
    cmd->add_option("--responses", o->responses, "response JSONL for the agreement matrix");
    cmd->add_option("--citations", o->citations, "citation JSONL for the agreement matrix");
    cmd->add_option("--resamples", o->resamples, "bootstrap resamples")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--level", o->level, "confidence level");
    cmd->add_option("--seed", o->seed, "bootstrap seed (default: config seed)");
    cmd->callback([o] { run_report(*o); });
}

// ---- cache ----------------------------------------------------------------------

struct CacheOpts {
    std::string config;
    bool verbose = false;
    bool expired_only = false;
};

std::filesystem::path cache_dir_of(const ToolkitConfig& cfg) {
    if (cfg.resolver.cache_dir.empty())
        throw std::invalid_argument("config sets no resolver.cache_dir");
    return cfg.resolver.cache_dir;
}

std::vector<std::filesystem::path> cache_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::exists(dir)) return files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

void run_cache_inspect(const CacheOpts& o) {
    auto cfg = effective_config(o.config);
    auto dir = cache_dir_of(cfg);
    citeaudit::resolve::SystemClock clock;
    const std::int64_t now = clock.now_ms();
    const std::int64_t ttl = static_cast<std::int64_t>(cfg.resolver.cache_ttl_days) * 24 * 3600 * 1000;

    std::size_t expired = 0, corrupt = 0;
    std::uintmax_t bytes = 0;
    json detail = json::array();
    auto files = cache_files(dir);
    for (const auto& path : files) {
        bytes += std::filesystem::file_size(path);
        std::ifstream in(path);
        json j;
        std::string descriptor;
        std::int64_t stored = 0;
        int status = 0;
        bool ok = true;
        try {
            in >> j;
            descriptor = j.at("descriptor").get<std::string>();
            stored = j.at("stored_at_ms").get<std::int64_t>();
            status = j.at("status").get<int>();
        } catch (const json::exception&) {
            ok = false;
            ++corrupt;
        }
        const bool is_expired = ok && now - stored > ttl;
        expired += is_expired;
        if (o.verbose) {
            if (ok)
                detail.push_back({{"file", path.filename().string()},
                                  {"descriptor", descriptor},
                                  {"status", status},
                                  {"stored_at_ms", stored},
                                  {"expired", is_expired}});
            else
                detail.push_back({{"file", path.filename().string()}, {"corrupt", true}});
        }
    }
    json out{{"cache_dir", dir.string()}, {"entries", files.size()}, {"bytes", bytes},
             {"expired", expired},        {"corrupt", corrupt},      {"ttl_days", cfg.resolver.cache_ttl_days}};
    if (o.verbose) out["files"] = detail;
    std::cout << out.dump(2) << "\n";
}

void run_cache_purge(const CacheOpts& o) {
    auto cfg = effective_config(o.config);
    auto dir = cache_dir_of(cfg);
    citeaudit::resolve::SystemClock clock;
    const std::int64_t now = clock.now_ms();
    const std::int64_t ttl = static_cast<std::int64_t>(cfg.resolver.cache_ttl_days) * 24 * 3600 * 1000;

    auto files = cache_files(dir);
    std::size_t removed = 0;
    for (const auto& path : files) {
        bool drop = true;
        if (o.expired_only) {
            std::ifstream in(path);
            json j;
            try {
                in >> j;
                drop = now - j.at("stored_at_ms").get<std::int64_t>() > ttl;
            } catch (const json::exception&) {
                drop = true; // corrupt entries read as misses; sweep them too
            }
        }
        if (drop) {
            std::filesystem::remove(path);
            ++removed;
        }
    }
    std::cout << "purged " << removed << " of " << files.size() << " cache entries in "
              << dir.string() << "\n";
}

void register_cache(CLI::App& app) {
    auto o = std::make_shared<CacheOpts>();
    auto* cmd = app.add_subcommand("cache", "inspect or purge the resolver reply cache");
    cmd->require_subcommand(1);

    auto* inspect = cmd->add_subcommand("inspect", "summarize cache entries");
    inspect->add_option("--config", o->config, "toolkit configuration (JSON)");
    inspect->add_flag("--verbose", o->verbose, "list every entry");
    inspect->callback([o] { run_cache_inspect(*o); });

    auto* purge = cmd->add_subcommand("purge", "delete cache entries");
    purge->add_option("--config", o->config, "toolkit configuration (JSON)");
    purge->add_flag("--expired-only", o->expired_only, "keep entries still inside the TTL");
    purge->callback([o] { run_cache_purge(*o); });
}

// ---- run ------------------------------------------------------------------------

struct RunCmdOpts {
    std::string config, responses, prescreen, out;
    bool consensus = false;
    int resamples = 10000;
    std::optional<std::uint64_t> seed;
};

void run_run(const RunCmdOpts& o) {
    auto cfg = effective_config(o.config);
    if (o.seed) cfg.seed = *o.seed;

    std::optional<citeaudit::classify::TrainedModel> prescreen;
    if (!o.prescreen.empty()) prescreen = citeaudit::classify::load_model(o.prescreen);

    auto transport = make_transport(cfg);
    citeaudit::resolve::SystemClock clock;
    citeaudit::resolve::Resolver resolver(*transport.active, clock,
                                          citeaudit::config::resolver_config(cfg));

    citeaudit::pipeline::RunOptions opt;
    opt.config = cfg;
    opt.prescreen_model = prescreen ? &*prescreen : nullptr;
    opt.use_consensus = o.consensus;
    opt.bootstrap_resamples = o.resamples;
    opt.out_dir = o.out;

    auto run = citeaudit::pipeline::run_end_to_end_file(
        o.responses,
        [&](const citeaudit::citeparse::CitationRecord& rec) {
            return resolver.resolve_citation(rec, cfg.scoring);
        },
        opt);

    std::cout << "processed " << run.responses.size() << " responses: " << run.records.size()
              << " citations, " << run.rows.size() << " verdict rows, " << run.resolver_calls
              << " resolver calls\n";
    if (!run.report_error.empty()) std::cout << "report not built: " << run.report_error << "\n";
    std::cout << "wrote " << o.out << "\n";
}

void register_run(CLI::App& app) {
    auto o = std::make_shared<RunCmdOpts>();
    auto* cmd = app.add_subcommand(
        "run", "end to end: extract, screen, filter, resolve, verdicts, report");
    cmd->add_option("--config", o->config, "toolkit configuration (JSON)");
    cmd->add_option("--responses", o->responses, "response JSONL")->required();
    cmd->add_option("--out", o->out, "run directory to write")->required();
    cmd->add_option("--prescreen", o->prescreen, "trained model JSON enabling the prescreen stage");
    cmd->add_flag("--consensus", o->consensus, "apply the consensus/repetition gates");
    cmd->add_option("--resamples", o->resamples, "bootstrap resamples for the report")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o->seed, "run seed (default: config seed)");
    cmd->callback([o] { run_run(*o); });
}

int fail(int code, const char* kind, const std::string& what) {
    std::cerr << "citeaudit: " << kind << ": " << what << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"batch verification of machine-generated citations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "citeaudit 0.1.0");

    register_promptgen(app);
    register_extract(app);
    register_featurize(app);
    register_screen(app);
    register_train(app);
    register_eval(app);
    register_verify(app);
    register_consensus(app);
    register_repetition(app);
    register_report(app);
    register_cache(app);
    register_run(app);

    try {
        app.parse(argc, argv);
        return kOk;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    } catch (const citeaudit::resolve::TransportError& e) {
        return fail(kServiceError, "service error", e.what());
    } catch (const citeaudit::resolve::RateLimited& e) {
        return fail(kServiceError, "service error", e.what());
    } catch (const citeaudit::resolve::Unavailable& e) {
        return fail(kServiceError, "service error", e.what());
    } catch (const citeaudit::resolve::MalformedReply& e) {
        return fail(kServiceError, "service error", e.what());
    } catch (const citeaudit::resolve::NotFound& e) {
        return fail(kServiceError, "service error", e.what());
    } catch (const citeaudit::resolve::ReplayViolation& e) {
        return fail(kServiceError, "replay violation", e.what());
    } catch (const citeaudit::resolve::FixtureMissing& e) {
        return fail(kServiceError, "replay violation", e.what());
    } catch (const citeaudit::config::ConfigError& e) {
        return fail(kInputError, "input error", e.what());
    } catch (const std::invalid_argument& e) {
        return fail(kInputError, "input error", e.what());
    } catch (const std::logic_error& e) {
        return fail(kInternalError, "internal error", e.what());
    } catch (const std::runtime_error& e) {
        return fail(kInputError, "input error", e.what());
    } catch (const std::exception& e) {
        return fail(kInternalError, "internal error", e.what());
    }
}
