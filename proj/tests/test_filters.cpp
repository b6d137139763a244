#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "citeaudit/filters.hpp"
#include "citeaudit/rng.hpp"

using namespace citeaudit;
using citeparse::CanonicalKey;
using citeparse::CitationRecord;
using filters::build_corpus;
using filters::CitationCorpus;
using filters::CorpusEntry;
using filters::SlotId;

namespace {

CitationRecord rec_of(const std::string& id, const std::string& title,
                      std::optional<int> year = 2020,
                      std::optional<std::string> doi = std::nullopt) {
    CitationRecord r;
    r.citation_id = id;
    r.source_response = "resp-" + id;
    r.raw = title;
    r.title = title;
    r.year = year;
    r.doi = doi;
    r.authors.push_back({"A. Author", "Author"});
    return r;
}

std::set<std::string> key_strings(const std::set<CanonicalKey>& keys) {
    std::set<std::string> out;
    for (const auto& k : keys) out.insert(k.key);
    return out;
}

int next_id = 0;

CorpusEntry entry_of(const std::string& model, const std::string& prompt, int rep,
                     const std::string& title,
                     std::optional<std::string> doi = std::nullopt) {
    return {SlotId{model, prompt, rep}, rec_of("c" + std::to_string(next_id++), title, 2020, doi)};
}

} // namespace

TEST_CASE("corpus unifies citation identity across title drift when DOIs agree",
          "[filters][corpus]") {
    std::vector<CorpusEntry> entries = {
        entry_of("m1", "p0", 1, "Attention Is All You Need", "10.5555/3295222"),
        entry_of("m2", "p0", 1, "Attention is all you need (Transformer architecture)",
                 "10.5555/3295222"),
        entry_of("m3", "p0", 1, "Attention Is All You Need"),
    };
    auto corpus = build_corpus(entries);

    // all three collapse to one key: the two DOI bearers merge despite the
    // subtitle, and the DOI-less record joins through its title
    REQUIRE(corpus.backing.size() == 1);
    auto key = corpus.backing.begin()->first;
    CHECK(key.key == "attention is all you need");
    CHECK(corpus.backing.at(key).size() == 3);

    auto counts = filters::consensus_counts(corpus, "p0");
    REQUIRE(counts.size() == 1);
    CHECK(counts.at(key) == 3);

    // a record never seen before still resolves to the class through its DOI
    auto probe = rec_of("probe", "Attention is all you need: transformers",
                        2017, std::string("10.5555/3295222"));
    CHECK(corpus.unified_key(probe).key == "attention is all you need");

    // and an unknown record falls back to its own canonical key
    auto fresh = rec_of("fresh", "Some Unrelated Paper");
    CHECK(corpus.unified_key(fresh).key == "some unrelated paper");
}

TEST_CASE("corpus keys records without usable titles by DOI", "[filters][corpus]") {
    auto doi_only = rec_of("d1", "", 2021, std::string("10.1000/xyz"));
    auto corpus = build_corpus({CorpusEntry{SlotId{"m1", "p0", 1}, doi_only}});
    REQUIRE(corpus.backing.size() == 1);
    CHECK(corpus.backing.begin()->first.key == "doi:10.1000/xyz");
}

TEST_CASE("corpus built from responses joins citations to their slots", "[filters][corpus]") {
    citeparse::RawResponse r1;
    r1.response_id = "r1";
    r1.model_id = "gpt";
    r1.prompt_id = "p0";
    r1.replication = 1;
    citeparse::RawResponse r2 = r1;
    r2.response_id = "r2";
    r2.model_id = "claude";

    auto c1 = rec_of("c1", "Deep Residual Learning");
    c1.source_response = "r1";
    auto c2 = rec_of("c2", "Deep Residual Learning");
    c2.source_response = "r2";

    auto corpus = build_corpus(std::vector<citeparse::RawResponse>{r1, r2}, {c1, c2});
    CHECK(corpus.models == std::set<std::string>{"claude", "gpt"});
    CHECK(corpus.slots.size() == 2);
    CHECK(filters::consensus_counts(corpus, "p0").begin()->second == 2);

    SECTION("empty responses still register their slots") {
        citeparse::RawResponse r3 = r1;
        r3.response_id = "r3";
        r3.model_id = "llama";
        auto c3 = build_corpus(std::vector<citeparse::RawResponse>{r1, r2, r3}, {c1, c2});
        CHECK(c3.models.size() == 3);
        CHECK(c3.slots.count(SlotId{"llama", "p0", 1}) == 1);
        CHECK(c3.slots.at(SlotId{"llama", "p0", 1}).empty());
    }
    SECTION("duplicate response ids are rejected") {
        citeparse::RawResponse dup = r1;
        CHECK_THROWS_AS(build_corpus(std::vector<citeparse::RawResponse>{r1, dup}, {}),
                        std::invalid_argument);
    }
    SECTION("citations must reference a known response") {
        auto orphan = rec_of("c9", "Orphan Work");
        orphan.source_response = "missing";
        CHECK_THROWS_AS(build_corpus(std::vector<citeparse::RawResponse>{r1}, {orphan}),
                        std::invalid_argument);
    }
}

TEST_CASE("consensus filter keeps keys cited by at least k distinct models",
          "[filters][consensus]") {
    // ten models; one key cited by exactly three of them
    std::vector<CorpusEntry> entries;
    std::vector<SlotId> slots;
    for (int m = 0; m < 10; ++m) {
        std::string model = "m" + std::to_string(m);
        slots.push_back(SlotId{model, "p0", 1});
        if (m < 3) entries.push_back(entry_of(model, "p0", 1, "Shared Discovery"));
        entries.push_back(entry_of(model, "p0", 1, "Private Work " + std::to_string(m)));
    }
    auto corpus = build_corpus(entries, slots);

    auto at_k3 = key_strings(filters::consensus_filter(corpus, "p0", 3));
    CHECK(at_k3.count("shared discovery") == 1);
    auto at_k4 = key_strings(filters::consensus_filter(corpus, "p0", 4));
    CHECK(at_k4.count("shared discovery") == 0);
    CHECK(at_k4.empty());

    SECTION("k=1 returns the union of everything cited for the prompt") {
        auto all = filters::consensus_filter(corpus, "p0", 1);
        CHECK(all.size() == 11); // 10 private + 1 shared
    }
    SECTION("replications of one model count once") {
        entries.push_back(entry_of("m0", "p0", 2, "Shared Discovery"));
        entries.push_back(entry_of("m0", "p0", 3, "Shared Discovery"));
        auto padded = build_corpus(entries, slots);
        CHECK(key_strings(filters::consensus_filter(padded, "p0", 4))
                  .count("shared discovery") == 0);
    }
    SECTION("counts never bleed across prompts") {
        entries.push_back(entry_of("m5", "p1", 1, "Shared Discovery"));
        entries.push_back(entry_of("m6", "p1", 1, "Shared Discovery"));
        auto two_prompts = build_corpus(entries, slots);
        CHECK(key_strings(filters::consensus_filter(two_prompts, "p0", 4))
                  .count("shared discovery") == 0);
        CHECK(key_strings(filters::consensus_filter(two_prompts, "p1", 2))
                  .count("shared discovery") == 1);
    }
    SECTION("preconditions") {
        CHECK_THROWS_AS(filters::consensus_filter(corpus, "p0", 0), std::invalid_argument);
        CHECK_THROWS_AS(filters::consensus_filter(corpus, "p0", 11), std::invalid_argument);
        CHECK_THROWS_AS(filters::consensus_filter(corpus, "nope", 1), filters::UnknownPrompt);
    }
}

TEST_CASE("repetition filter keeps keys recurring across a model's replications",
          "[filters][repetition]") {
    // key present in replications 1 and 3 of 3
    std::vector<CorpusEntry> entries = {
        entry_of("m1", "p0", 1, "Recurring Result"),
        entry_of("m1", "p0", 3, "Recurring Result"),
        entry_of("m1", "p0", 1, "One Off Finding"),
        entry_of("m1", "p0", 2, "Steady Citation"),
        entry_of("m1", "p0", 1, "Steady Citation"),
        entry_of("m1", "p0", 3, "Steady Citation"),
    };
    std::vector<SlotId> slots = {SlotId{"m1", "p0", 1}, SlotId{"m1", "p0", 2},
                                 SlotId{"m1", "p0", 3}};
    auto corpus = build_corpus(entries, slots);

    auto r2 = key_strings(filters::repetition_filter(corpus, "m1", "p0", 2, 3));
    CHECK(r2 == std::set<std::string>{"recurring result", "steady citation"});
    auto r3 = key_strings(filters::repetition_filter(corpus, "m1", "p0", 3, 3));
    CHECK(r3 == std::set<std::string>{"steady citation"});

    SECTION("r=1 is the union, r=n the intersection") {
        auto u = filters::repetition_filter(corpus, "m1", "p0", 1, 3);
        CHECK(u.size() == 3);
        auto inter = filters::repetition_filter(corpus, "m1", "p0", 3, 3);
        for (const auto& k : inter) {
            for (int rep = 1; rep <= 3; ++rep)
                CHECK(corpus.slots.at(SlotId{"m1", "p0", rep}).count(k) == 1);
        }
    }
    SECTION("every replication up to n must be present") {
        CHECK_THROWS_AS(filters::repetition_filter(corpus, "m1", "p0", 2, 4),
                        filters::MissingReplications);
        CHECK_THROWS_AS(filters::repetition_filter(corpus, "m2", "p0", 1, 1),
                        filters::MissingReplications);
        CHECK_THROWS_AS(filters::repetition_filter(corpus, "m1", "p9", 1, 1),
                        filters::MissingReplications);
    }
    SECTION("r outside [1, n] is rejected") {
        CHECK_THROWS_AS(filters::repetition_filter(corpus, "m1", "p0", 0, 3),
                        std::invalid_argument);
        CHECK_THROWS_AS(filters::repetition_filter(corpus, "m1", "p0", 4, 3),
                        std::invalid_argument);
    }
}

TEST_CASE("random corpora match brute-force filter oracles and shrink monotonically",
          "[filters][property]") {
    for (int trial = 0; trial < 300; ++trial) {
        rng::Stream gen(rng::derive_seed(7700, static_cast<uint64_t>(trial)));
        const int n_models = gen.int_between(2, 6);
        const int n_keys = gen.int_between(1, 40);
        const int n_reps = gen.int_between(1, 4);
        const double density = gen.uniform(0.05, 0.6);

        // membership[model][rep] = set of key indices cited there
        std::vector<std::vector<std::set<int>>> membership(
            static_cast<size_t>(n_models),
            std::vector<std::set<int>>(static_cast<size_t>(n_reps)));
        std::vector<CorpusEntry> entries;
        std::vector<SlotId> slots;
        for (int m = 0; m < n_models; ++m) {
            std::string model = "m" + std::to_string(m);
            for (int rep = 1; rep <= n_reps; ++rep) {
                slots.push_back(SlotId{model, "p0", rep});
                for (int key = 0; key < n_keys; ++key) {
                    if (!gen.bernoulli(density)) continue;
                    membership[m][rep - 1].insert(key);
                    entries.push_back(
                        entry_of(model, "p0", rep, "work " + std::to_string(key)));
                }
            }
        }
        auto corpus = build_corpus(entries, slots);
        INFO("trial " << trial << ": " << n_models << " models, " << n_keys << " keys, "
                      << n_reps << " reps");

        // oracle: per-key distinct-model counts straight off the membership matrix
        std::map<int, int> model_count;
        for (int key = 0; key < n_keys; ++key) {
            int c = 0;
            for (int m = 0; m < n_models; ++m)
                for (int rep = 0; rep < n_reps; ++rep)
                    if (membership[m][rep].count(key)) {
                        ++c;
                        break;
                    }
            if (c > 0) model_count[key] = c;
        }

        std::set<std::string> previous;
        bool first = true;
        for (int k = 1; k <= n_models; ++k) {
            std::set<std::string> expected;
            for (const auto& [key, c] : model_count)
                if (c >= k) expected.insert("work " + std::to_string(key));
            auto got = key_strings(filters::consensus_filter(corpus, "p0", k));
            REQUIRE(got == expected);
            if (!first) {
                for (const auto& key : got) REQUIRE(previous.count(key) == 1);
            }
            previous = std::move(got);
            first = false;
        }

        const int probe_model = gen.int_between(0, n_models - 1);
        std::string model = "m" + std::to_string(probe_model);
        previous.clear();
        first = true;
        for (int r = 1; r <= n_reps; ++r) {
            std::set<std::string> expected;
            for (int key = 0; key < n_keys; ++key) {
                int c = 0;
                for (int rep = 0; rep < n_reps; ++rep)
                    if (membership[probe_model][rep].count(key)) ++c;
                if (c >= r) expected.insert("work " + std::to_string(key));
            }
            auto got = key_strings(filters::repetition_filter(corpus, model, "p0", r, n_reps));
            REQUIRE(got == expected);
            if (!first) {
                for (const auto& key : got) REQUIRE(previous.count(key) == 1);
            }
            previous = std::move(got);
            first = false;
        }

        // agreement matrix against a direct recount
        auto agreement = filters::jaccard_agreement(corpus);
        REQUIRE(agreement.models.size() == static_cast<size_t>(n_models));
        for (size_t i = 0; i < agreement.models.size(); ++i) {
            std::set<int> ki;
            for (int rep = 0; rep < n_reps; ++rep)
                ki.insert(membership[i][rep].begin(), membership[i][rep].end());
            for (size_t j = 0; j < agreement.models.size(); ++j) {
                std::set<int> kj;
                for (int rep = 0; rep < n_reps; ++rep)
                    kj.insert(membership[j][rep].begin(), membership[j][rep].end());
                double expected;
                if (i == j) {
                    expected = ki.empty() ? 0.0 : 1.0;
                } else if (ki.empty() && kj.empty()) {
                    expected = 0.0;
                } else {
                    size_t inter = 0;
                    for (int key : ki) inter += kj.count(key);
                    expected = static_cast<double>(inter) /
                               static_cast<double>(ki.size() + kj.size() - inter);
                }
                REQUIRE(agreement.jaccard[i][j] == Catch::Approx(expected).margin(1e-12));
                REQUIRE(agreement.jaccard[i][j] == agreement.jaccard[j][i]);
            }
        }
    }
}

TEST_CASE("agreement matrix uses each model's full key set", "[filters][agreement]") {
    std::vector<CorpusEntry> entries = {
        entry_of("a", "p0", 1, "x paper"), entry_of("a", "p1", 1, "y paper"),
        entry_of("b", "p0", 1, "x paper"), entry_of("b", "p0", 1, "y paper"),
    };
    auto corpus = build_corpus(entries);
    auto m = filters::jaccard_agreement(corpus);
    REQUIRE(m.models == std::vector<std::string>{"a", "b"});
    CHECK(m.jaccard[0][1] == 1.0); // prompts pooled: both cite {x paper, y paper}
    CHECK(m.jaccard[0][0] == 1.0);

    SECTION("disjoint models score zero, identical ones score one") {
        std::vector<CorpusEntry> es = {
            entry_of("a", "p0", 1, "left one"),  entry_of("a", "p0", 1, "left two"),
            entry_of("a", "p0", 1, "left three"), entry_of("b", "p0", 1, "left two"),
            entry_of("b", "p0", 1, "left three"), entry_of("b", "p0", 1, "right one"),
            entry_of("c", "p0", 1, "elsewhere"),
        };
        auto g = filters::jaccard_agreement(build_corpus(es));
        REQUIRE(g.models == std::vector<std::string>{"a", "b", "c"});
        CHECK(g.jaccard[0][1] == Catch::Approx(0.5)); // {2,3} of {1,2,3,r1}
        CHECK(g.jaccard[0][2] == 0.0);
        CHECK(g.jaccard[1][2] == 0.0);
        for (int i = 0; i < 3; ++i) CHECK(g.jaccard[i][i] == 1.0);
    }
    SECTION("an empty model keeps a zero diagonal") {
        auto c = build_corpus({entry_of("a", "p0", 1, "only work")},
                              {SlotId{"a", "p0", 1}, SlotId{"b", "p0", 1}});
        auto g = filters::jaccard_agreement(c);
        CHECK(g.jaccard[0][0] == 1.0);
        CHECK(g.jaccard[1][1] == 0.0);
        CHECK(g.jaccard[0][1] == 0.0);
    }
    SECTION("fewer than two models is an error") {
        auto c = build_corpus({entry_of("a", "p0", 1, "only work")});
        CHECK_THROWS_AS(filters::jaccard_agreement(c), std::invalid_argument);
    }
}

TEST_CASE("constrained selection check separates pool picks from stray citations",
          "[filters][selection]") {
    const std::vector<std::string> pool = {
        "Attention Is All You Need",
        "Deep Residual Learning for Image Recognition",
        "Adam: A Method for Stochastic Optimization",
    };

    SECTION("a compliant response yields selections and no violations") {
        std::string text =
            "Here are the most relevant works:\n"
            "1. Vaswani, A. et al. (2017). \"Attention Is All You Need\". NeurIPS.\n"
            "2. He, K., Zhang, X., Ren, S., & Sun, J. (2016). \"Deep Residual Learning for "
            "Image Recognition\". CVPR.\n";
        auto check = filters::constrained_selection_check(text, pool);
        CHECK(check.selected == std::vector<std::string>{
                                    "Attention Is All You Need",
                                    "Deep Residual Learning for Image Recognition"});
        CHECK(check.violations.empty());
    }
    SECTION("a title outside the pool is flagged by canonical key") {
        std::string text =
            "1. Vaswani, A. et al. (2017). \"Attention Is All You Need\". NeurIPS.\n"
            "2. Smith, J. (2020). \"A Completely Invented Survey of Everything\". "
            "Journal of Nothing, 12(3), 45-67.\n";
        auto check = filters::constrained_selection_check(text, pool);
        CHECK(check.selected ==
              std::vector<std::string>{"Attention Is All You Need"});
        REQUIRE(check.violations.size() == 1);
        CHECK(check.violations[0] == "a completely invented survey of everything");
    }
    SECTION("paraphrased formatting still matches canonically") {
        std::string text = "I would pick:\n- attention is all you need.\n"
                           "- ADAM: a method for stochastic optimization\n";
        auto check = filters::constrained_selection_check(text, pool);
        CHECK(check.selected == std::vector<std::string>{
                                    "Attention Is All You Need",
                                    "Adam: A Method for Stochastic Optimization"});
        CHECK(check.violations.empty());
    }
    SECTION("prose never counts as a violation") {
        std::string text = "I could not find any relevant papers for this topic.\n"
                           "My best suggestion is \"Attention Is All You Need\" from the list.\n";
        auto check = filters::constrained_selection_check(text, pool);
        CHECK(check.selected == std::vector<std::string>{"Attention Is All You Need"});
        CHECK(check.violations.empty());
    }
    SECTION("an empty candidate pool is an error") {
        CHECK_THROWS_AS(filters::constrained_selection_check("anything", {}),
                        std::invalid_argument);
    }
}

namespace {

// logistic gate wired by hand: fires on records with no year
classify::TrainedModel year_gate_model() {
    classify::TrainedModel m;
    m.kind = classify::ModelKind::logistic;
    m.logistic.weights.assign(features::kFeatureCount, 0.0);
    m.logistic.mean.assign(features::kFeatureCount, 0.0);
    m.logistic.sd.assign(features::kFeatureCount, 1.0);
    m.logistic.weights[features::feature_index("y_missing")] = 8.0;
    m.logistic.bias = -4.0;
    return m;
}

score::ResolutionOutcome outcome_for(const CitationRecord& rec, int composite,
                                     bool resolved = true) {
    score::ResolutionOutcome out;
    out.citation_id = rec.citation_id;
    out.composite = composite;
    out.status = resolved ? score::ResolutionStatus::resolved
                          : score::ResolutionStatus::unresolved;
    return out;
}

void check_trace_shape(const filters::StageTrace& t) {
    REQUIRE(!t.outcomes.empty());
    for (size_t i = 1; i < t.outcomes.size(); ++i)
        REQUIRE(static_cast<int>(t.outcomes[i].stage) >
                static_cast<int>(t.outcomes[i - 1].stage));
    int rejects = 0;
    for (const auto& o : t.outcomes) rejects += o.decision == "reject";
    REQUIRE(rejects <= 1);
    if (rejects == 1) {
        REQUIRE(t.outcomes.back().decision == "reject");
        REQUIRE(t.rejected_at.has_value());
        REQUIRE(*t.rejected_at == t.outcomes.back().stage);
        REQUIRE(!t.verdict.has_value());
    }
    if (t.unresolved) {
        REQUIRE(t.outcomes.back().decision == "unresolved");
        REQUIRE(!t.rejected_at.has_value());
        REQUIRE(!t.verdict.has_value());
    }
    if (t.verdict) {
        REQUIRE(t.outcomes.back().stage == filters::Stage::resolution);
        REQUIRE(t.outcomes.back().decision == "pass");
    }
}

} // namespace

TEST_CASE("staged pipeline spends lookups only on survivors", "[filters][pipeline]") {
    auto model = year_gate_model();
    std::vector<CitationRecord> records = {
        rec_of("a", "Grounded Result One", 2019),
        rec_of("b", "Suspicious Undated Claim", std::nullopt),
        rec_of("c", "Grounded Result Two", 2021),
    };
    int calls = 0;
    filters::Resolver resolver = [&](const CitationRecord& r) {
        ++calls;
        return outcome_for(r, 90);
    };

    SECTION("prescreen rejection skips the resolver entirely") {
        auto traces = filters::staged_pipeline(records, model, resolver, {});
        REQUIRE(traces.size() == 3);
        CHECK(calls == 2);
        CHECK(calls < static_cast<int>(records.size()));

        const auto& rejected = traces[1];
        CHECK(rejected.citation_id == "b");
        REQUIRE(rejected.rejected_at.has_value());
        CHECK(*rejected.rejected_at == filters::Stage::prescreen);
        REQUIRE(rejected.outcomes.size() == 1);
        CHECK(rejected.outcomes[0].decision == "reject");
        CHECK(rejected.outcomes[0].value > 0.9);
        CHECK(!rejected.verdict.has_value());

        for (const auto& t : traces) check_trace_shape(t);
        CHECK(traces[0].verdict.has_value());
        CHECK(traces[2].verdict.has_value());
    }
    SECTION("a threshold of 1.0 disables the prescreen") {
        filters::StagedConfig cfg;
        cfg.prescreen_threshold = 1.0;
        auto traces = filters::staged_pipeline(records, model, resolver, cfg);
        CHECK(calls == 3);
        for (const auto& t : traces) {
            check_trace_shape(t);
            REQUIRE(t.verdict.has_value());
            CHECK(t.outcomes[0].decision == "pass");
        }
        // the probability is still recorded even though it cannot reject
        CHECK(traces[1].outcomes[0].value > 0.9);
    }
    SECTION("inert filters reproduce plain resolution verdict for verdict") {
        filters::StagedConfig cfg;
        cfg.prescreen_threshold = 1.0;
        auto traces = filters::staged_pipeline(records, model, resolver, cfg);
        for (size_t i = 0; i < records.size(); ++i) {
            auto direct = score::classify_verdict(outcome_for(records[i], 90));
            REQUIRE(traces[i].verdict.has_value());
            CHECK(traces[i].verdict->tier == direct.tier);
            CHECK(traces[i].verdict->best_score == direct.best_score);
            CHECK(traces[i].citation_id == records[i].citation_id);
        }
    }
    SECTION("resolver failure marks the record unresolved, not rejected") {
        filters::Resolver failing = [&](const CitationRecord& r) {
            ++calls;
            return outcome_for(r, 0, false);
        };
        auto traces = filters::staged_pipeline({records[0]}, model, failing, {});
        REQUIRE(traces.size() == 1);
        CHECK(traces[0].unresolved);
        CHECK(!traces[0].rejected_at.has_value());
        CHECK(!traces[0].verdict.has_value());
        check_trace_shape(traces[0]);
    }
    SECTION("config validation") {
        filters::StagedConfig bad_k;
        bad_k.consensus_k = 0;
        CHECK_THROWS_AS(filters::staged_pipeline(records, model, resolver, bad_k),
                        std::invalid_argument);
        filters::StagedConfig bad_r;
        bad_r.repetition_r = 3;
        bad_r.repetition_n = 2;
        CHECK_THROWS_AS(filters::staged_pipeline(records, model, resolver, bad_r),
                        std::invalid_argument);
    }
}

TEST_CASE("staged pipeline consults cross-model consensus when context is supplied",
          "[filters][pipeline]") {
    // m1 cites alpha in all three replications, beta once, gamma once;
    // alpha is also cited by m2 and m3, beta only by m2
    std::vector<CorpusEntry> entries = {
        entry_of("m1", "p0", 1, "alpha work"), entry_of("m1", "p0", 2, "alpha work"),
        entry_of("m1", "p0", 3, "alpha work"), entry_of("m1", "p0", 1, "beta work"),
        entry_of("m1", "p0", 2, "gamma work"), entry_of("m2", "p0", 1, "alpha work"),
        entry_of("m2", "p0", 1, "beta work"),  entry_of("m3", "p0", 1, "alpha work"),
    };
    std::vector<SlotId> slots = {
        SlotId{"m1", "p0", 1}, SlotId{"m1", "p0", 2}, SlotId{"m1", "p0", 3},
        SlotId{"m2", "p0", 1}, SlotId{"m3", "p0", 1},
    };
    auto corpus = build_corpus(entries, slots);

    auto model = year_gate_model();
    std::vector<CitationRecord> records = {
        rec_of("ra", "alpha work", 2020),
        rec_of("rb", "beta work", 2020),
        rec_of("rc", "gamma work", 2020),
    };
    int calls = 0;
    filters::Resolver resolver = [&](const CitationRecord& r) {
        ++calls;
        return outcome_for(r, 85);
    };
    filters::CorpusContext ctx{&corpus, "m1", "p0"};

    SECTION("keys below the consensus threshold are rejected before lookup") {
        filters::StagedConfig cfg;
        cfg.consensus_k = 2;
        auto traces = filters::staged_pipeline(records, model, resolver, cfg, {}, ctx);
        CHECK(calls == 2); // alpha and beta survive, gamma does not
        for (const auto& t : traces) check_trace_shape(t);

        CHECK(traces[0].verdict.has_value());
        CHECK(traces[0].outcomes[1].value == 3.0);
        CHECK(traces[1].verdict.has_value());
        CHECK(traces[1].outcomes[1].value == 2.0);
        REQUIRE(traces[2].rejected_at.has_value());
        CHECK(*traces[2].rejected_at == filters::Stage::consensus);
        CHECK(traces[2].outcomes[1].value == 1.0);
    }
    SECTION("replication support gates survivors when r exceeds one") {
        filters::StagedConfig cfg;
        cfg.consensus_k = 2;
        cfg.repetition_r = 2;
        cfg.repetition_n = 3;
        auto traces = filters::staged_pipeline(records, model, resolver, cfg, {}, ctx);
        CHECK(calls == 1); // only alpha clears both gates

        CHECK(traces[0].verdict.has_value());
        REQUIRE(traces[1].rejected_at.has_value());
        CHECK(*traces[1].rejected_at == filters::Stage::consensus);
        CHECK(traces[1].outcomes[1].value == 1.0); // one of three replications
        REQUIRE(traces[2].rejected_at.has_value());
        for (const auto& t : traces) check_trace_shape(t);
    }
    SECTION("k=1 leaves corpus members untouched") {
        filters::StagedConfig cfg;
        cfg.prescreen_threshold = 1.0;
        cfg.consensus_k = 1;
        auto traces = filters::staged_pipeline(records, model, resolver, cfg, {}, ctx);
        CHECK(calls == 3);
        for (const auto& t : traces) REQUIRE(t.verdict.has_value());
    }
    SECTION("missing replications rejected loudly when the gate needs them") {
        filters::StagedConfig cfg;
        cfg.consensus_k = 1;
        cfg.repetition_r = 2;
        cfg.repetition_n = 4; // m1 only has three replications
        CHECK_THROWS_AS(filters::staged_pipeline(records, model, resolver, cfg, {}, ctx),
                        filters::MissingReplications);
    }
}
