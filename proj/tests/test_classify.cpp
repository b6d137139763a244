#include <catch2/catch_amalgamated.hpp>

#include <citeaudit/classify.hpp>
#include <citeaudit/rng.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

using namespace citeaudit;
using classify::Dataset;
using classify::Row;
using features::FeatureVector;
using features::Label;

namespace {

FeatureVector fv_of(const Row& values, std::optional<Label> label = std::nullopt,
                    std::string id = "") {
    FeatureVector fv;
    fv.citation_id = std::move(id);
    fv.values = values;
    fv.label = label;
    return fv;
}

// one informative feature at `idx`, everything else shared noise
Dataset shifted_gaussian(int n_per_class, size_t idx, double shift, uint64_t seed,
                         double noise_sd = 1.0) {
    Dataset d;
    rng::Stream st(seed);
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            Row r{};
            for (auto& v : r) v = st.gaussian() * noise_sd;
            r[idx] += c == 1 ? shift : 0.0;
            d.rows.push_back(fv_of(r, c == 1 ? Label::hallucinated : Label::real,
                                   "c" + std::to_string(c) + "-" + std::to_string(i)));
        }
    }
    return d;
}

Dataset xor_data(int n, uint64_t seed) {
    Dataset d;
    rng::Stream st(seed);
    for (int i = 0; i < n; ++i) {
        int a = st.bernoulli(0.5) ? 1 : 0;
        int b = st.bernoulli(0.5) ? 1 : 0;
        Row r{};
        r[0] = a + st.uniform(-0.05, 0.05);
        r[1] = b + st.uniform(-0.05, 0.05);
        for (size_t j = 2; j < 6; ++j) r[j] = st.gaussian() * 0.3;
        d.rows.push_back(fv_of(r, (a ^ b) ? Label::hallucinated : Label::real,
                               "x" + std::to_string(i)));
    }
    return d;
}

} // namespace

TEST_CASE("logistic gradient matches central finite differences", "[classify]") {
    rng::Stream st(rng::derive_seed(11, "fd-check"));
    double worst = 0.0;
    for (int batch = 0; batch < 100; ++batch) {
        size_t n = 3 + st.index_below(28);
        size_t d = 1 + st.index_below(8);
        std::vector<std::vector<double>> X(n, std::vector<double>(d));
        std::vector<int> y(n);
        for (auto& row : X)
            for (auto& v : row) v = st.gaussian() * 2.0;
        for (auto& v : y) v = st.bernoulli(0.5) ? 1 : 0;
        std::vector<double> w(d);
        for (auto& v : w) v = st.gaussian();
        double b = st.gaussian();
        double l2 = st.bernoulli(0.5) ? 0.0 : 0.1;

        auto ev = classify::logistic_loss_gradient(X, y, w, b, l2);

        auto loss_at = [&](const std::vector<double>& ww, double bb) {
            return classify::logistic_loss_gradient(X, y, ww, bb, l2).loss;
        };
        for (size_t j = 0; j <= d; ++j) {
            double theta = j < d ? w[j] : b;
            double h = 1e-5 * std::max(1.0, std::fabs(theta));
            double up, down;
            if (j < d) {
                auto wj = w;
                wj[j] = theta + h;
                up = loss_at(wj, b);
                wj[j] = theta - h;
                down = loss_at(wj, b);
            } else {
                up = loss_at(w, b + h);
                down = loss_at(w, b - h);
            }
            double fd = (up - down) / (2.0 * h);
            double analytic = j < d ? ev.grad_w[j] : ev.grad_b;
            double rel = std::fabs(analytic - fd) /
                         std::max({1.0, std::fabs(analytic), std::fabs(fd)});
            worst = std::max(worst, rel);
        }
    }
    INFO("max relative error " << worst);
    CHECK(worst < 1e-6);
}

TEST_CASE("logistic training", "[classify]") {
    SECTION("perfectly separable data reaches training accuracy 1.0") {
        auto data = shifted_gaussian(40, 0, 8.0, 77, 0.5);
        auto model = classify::train_logistic(data);
        size_t correct = 0;
        for (const auto& r : data.rows)
            if ((classify::predict(model, r) >= 0.5 ? 1 : 0) == classify::label_int(r)) ++correct;
        CHECK(correct == data.rows.size());
    }

    SECTION("the separating feature carries the largest standardized weight") {
        size_t idx = features::feature_index("j_word_count");
        auto data = shifted_gaussian(120, idx, 6.0, 78);
        auto model = classify::train_logistic(data);
        double top = std::fabs(model.logistic.weights[idx]);
        for (size_t j = 0; j < features::kFeatureCount; ++j) {
            if (j == idx) continue;
            CHECK(top > std::fabs(model.logistic.weights[j]));
        }
    }

    SECTION("single class is degenerate") {
        Dataset d;
        for (int i = 0; i < 6; ++i) d.rows.push_back(fv_of(Row{}, Label::real));
        CHECK_THROWS_AS(classify::train_logistic(d), classify::DegenerateData);
    }

    SECTION("constant columns are ignored, not divided by zero") {
        auto data = shifted_gaussian(30, 3, 6.0, 79);
        for (auto& r : data.rows) r.values[25] = 42.0;
        auto model = classify::train_logistic(data);
        CHECK(model.logistic.sd[25] == 0.0);
        for (const auto& r : data.rows) {
            double p = classify::predict(model, r);
            CHECK(std::isfinite(p));
        }
    }
}

TEST_CASE("decision tree mechanics", "[classify]") {
    SECTION("pure labels produce a single leaf") {
        std::vector<Row> X(5, Row{});
        for (size_t i = 0; i < 5; ++i) X[i][0] = static_cast<double>(i);
        std::vector<int> y(5, 1);
        auto tree = classify::train_classification_tree(X, y);
        REQUIRE(tree.nodes.size() == 1);
        CHECK(tree.nodes[0].feature == -1);
        CHECK(tree.nodes[0].value == 1.0);
    }

    SECTION("step function splits at the midpoint") {
        std::vector<Row> X(4, Row{});
        X[0][2] = 1.0;
        X[1][2] = 2.0;
        X[2][2] = 3.0;
        X[3][2] = 4.0;
        std::vector<int> y = {0, 0, 1, 1};
        auto tree = classify::train_classification_tree(X, y, {1, 1});
        REQUIRE(tree.nodes[0].feature == 2);
        CHECK(tree.nodes[0].threshold == 2.5);
        CHECK(tree.predict(X[0]) == 0.0);
        CHECK(tree.predict(X[3]) == 1.0);
    }

    SECTION("equal-gain ties pick the lowest feature index") {
        // features 4 and 9 are identical copies; 4 must win
        std::vector<Row> X(6, Row{});
        std::vector<int> y = {0, 0, 0, 1, 1, 1};
        for (size_t i = 0; i < 6; ++i) {
            X[i][4] = static_cast<double>(i);
            X[i][9] = static_cast<double>(i);
        }
        auto tree = classify::train_classification_tree(X, y, {1, 1});
        CHECK(tree.nodes[0].feature == 4);
    }

    SECTION("depth limit is respected") {
        rng::Stream st(rng::derive_seed(11, "tree-depth"));
        std::vector<Row> X;
        std::vector<int> y;
        for (int i = 0; i < 200; ++i) {
            Row r{};
            for (auto& v : r) v = st.unit();
            X.push_back(r);
            y.push_back(st.bernoulli(0.5) ? 1 : 0);
        }
        for (int depth : {1, 2, 3, 5}) {
            auto tree = classify::train_classification_tree(X, y, {depth, 1});
            CHECK(tree.depth() <= depth);
        }
    }

    SECTION("min_leaf forbids tiny children") {
        std::vector<Row> X(10, Row{});
        std::vector<int> y = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
        for (size_t i = 0; i < 10; ++i) X[i][0] = static_cast<double>(i);
        auto tree = classify::train_classification_tree(X, y, {4, 3});
        // the only useful split isolates the lone positive; min_leaf 3 forbids it
        std::function<void(int)> walk = [&](int n) {
            const auto& nd = tree.nodes[static_cast<size_t>(n)];
            if (nd.feature < 0) return;
            size_t l = 0, r = 0;
            for (const auto& row : X) (row[static_cast<size_t>(nd.feature)] <= nd.threshold ? l : r)++;
            CHECK(l >= 3);
            CHECK(r >= 3);
            walk(nd.left);
            walk(nd.right);
        };
        walk(0);
    }
}

TEST_CASE("random forest", "[classify]") {
    SECTION("one tree, no bootstrap, all features reduces to a plain tree") {
        auto data = shifted_gaussian(25, 1, 3.0, 80);
        classify::ForestHyper h;
        h.n_trees = 1;
        h.bootstrap = false;
        h.feature_frac = 1.0;
        h.max_depth = 6;
        auto forest = classify::train_random_forest(data, h);
        auto plain = classify::train_classification_tree(classify::detail::matrix_of(data),
                                                         classify::detail::labels_of(data),
                                                         {6, 1});
        for (const auto& r : data.rows)
            CHECK(classify::predict(forest, r) == plain.predict(r.values));
    }

    SECTION("separable synthetic data reaches AUC at least 0.95") {
        auto train = shifted_gaussian(80, 5, 4.0, 81);
        auto test = shifted_gaussian(60, 5, 4.0, 82);
        classify::ForestHyper h;
        h.n_trees = 60;
        h.max_depth = 8;
        h.seed = 7;
        auto forest = classify::train_random_forest(train, h);
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& r : test.rows) {
            scores.push_back(classify::predict(forest, r));
            labels.push_back(classify::label_int(r));
        }
        auto m = classify::eval_metrics(scores, labels);
        INFO("forest AUC " << m.auc);
        CHECK(m.auc >= 0.95);
    }

    SECTION("same seed gives identical predictions, new seed may differ") {
        auto data = shifted_gaussian(30, 2, 2.0, 83);
        classify::ForestHyper h;
        h.n_trees = 15;
        h.max_depth = 5;
        h.seed = 99;
        auto a = classify::train_random_forest(data, h);
        auto b = classify::train_random_forest(data, h);
        for (const auto& r : data.rows)
            CHECK(classify::predict(a, r) == classify::predict(b, r));
    }

    SECTION("single class is degenerate") {
        Dataset d;
        for (int i = 0; i < 4; ++i) d.rows.push_back(fv_of(Row{}, Label::hallucinated));
        CHECK_THROWS_AS(classify::train_random_forest(d), classify::DegenerateData);
    }
}

TEST_CASE("gradient boosting", "[classify]") {
    SECTION("zero rounds predicts the class prior") {
        auto data = shifted_gaussian(20, 0, 3.0, 84); // balanced, prior 0.5
        classify::GbmHyper h;
        h.n_rounds = 0;
        auto model = classify::train_gbm(data, h);
        for (const auto& r : data.rows)
            CHECK(classify::predict(model, r) == Catch::Approx(0.5).margin(1e-12));

        // unbalanced prior
        Dataset skew = data;
        for (int i = 0; i < 20; ++i) {
            Row r{};
            r[0] = -1.0;
            skew.rows.push_back(fv_of(r, Label::real));
        }
        auto m2 = classify::train_gbm(skew, h);
        CHECK(classify::predict(m2, skew.rows[0]) == Catch::Approx(20.0 / 60.0).margin(1e-12));
    }

    SECTION("training loss is monotone non-increasing") {
        auto data = shifted_gaussian(60, 3, 2.0, 85);
        classify::GbmHyper h;
        h.n_rounds = 120;
        h.min_leaf = 5;
        auto model = classify::train_gbm(data, h);
        REQUIRE(model.gbm.training_loss.size() == 120);
        for (size_t i = 1; i < model.gbm.training_loss.size(); ++i)
            CHECK(model.gbm.training_loss[i] <= model.gbm.training_loss[i - 1] + 1e-12);
    }

    SECTION("beats logistic regression on XOR interactions") {
        auto train = xor_data(300, 86);
        auto test = xor_data(200, 87);
        classify::GbmHyper gh;
        gh.n_rounds = 80;
        gh.min_leaf = 5;
        auto gbm = classify::train_gbm(train, gh);
        auto logit = classify::train_logistic(train);

        auto auc_of = [&](const classify::TrainedModel& m) {
            std::vector<double> scores;
            std::vector<int> labels;
            for (const auto& r : test.rows) {
                scores.push_back(classify::predict(m, r));
                labels.push_back(classify::label_int(r));
            }
            return classify::eval_metrics(scores, labels).auc;
        };
        double g = auc_of(gbm), l = auc_of(logit);
        INFO("gbm " << g << " logistic " << l);
        CHECK(g > l);
        CHECK(g >= 0.95); // XOR is clean here; trees should nail it
    }

    SECTION("separable synthetic data reaches AUC at least 0.95") {
        auto train = shifted_gaussian(80, 7, 4.0, 88);
        auto test = shifted_gaussian(60, 7, 4.0, 89);
        classify::GbmHyper h;
        h.n_rounds = 60;
        h.min_leaf = 5;
        auto model = classify::train_gbm(train, h);
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& r : test.rows) {
            scores.push_back(classify::predict(model, r));
            labels.push_back(classify::label_int(r));
        }
        CHECK(classify::eval_metrics(scores, labels).auc >= 0.95);
    }
}

TEST_CASE("eval metrics", "[classify]") {
    SECTION("perfect separation") {
        auto m = classify::eval_metrics({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
        CHECK(m.auc == 1.0);
        CHECK(m.average_precision == 1.0);
        CHECK(m.accuracy == 1.0);
        CHECK(m.n == 4);
    }

    SECTION("all scores equal gives AUC one half") {
        auto m = classify::eval_metrics({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
        CHECK(m.auc == 0.5);
    }

    SECTION("single class is rejected") {
        CHECK_THROWS_AS(classify::eval_metrics({0.1, 0.9}, {1, 1}), classify::SingleClass);
        CHECK_THROWS_AS(classify::eval_metrics({0.1, 0.9}, {0, 0}), classify::SingleClass);
    }

    SECTION("threshold ties predict positive") {
        auto m = classify::eval_metrics({0.5, 0.5}, {1, 0}, 0.5);
        CHECK(m.accuracy == 0.5);
    }

    SECTION("AUC is invariant under strictly increasing transforms") {
        rng::Stream st(rng::derive_seed(11, "auc-transform"));
        for (int t = 0; t < 30; ++t) {
            size_t n = 5 + st.index_below(16);
            std::vector<double> s(n);
            std::vector<int> y(n);
            for (auto& v : s) v = st.unit();
            bool ok = false;
            for (size_t i = 0; i < n; ++i) y[i] = st.bernoulli(0.4) ? 1 : 0;
            for (size_t i = 0; i + 1 < n; ++i) ok |= y[i] != y[i + 1];
            if (!ok) y[0] = 1 - y[0];
            double base = classify::eval_metrics(s, y).auc;
            auto mapped = s;
            for (auto& v : mapped) v = 3.0 * v + 2.0;
            CHECK(classify::eval_metrics(mapped, y).auc == Catch::Approx(base).margin(1e-12));
            for (size_t i = 0; i < n; ++i) mapped[i] = std::exp(s[i]);
            CHECK(classify::eval_metrics(mapped, y).auc == Catch::Approx(base).margin(1e-12));
        }
    }

    SECTION("matches brute-force pair counting and threshold re-scans") {
        rng::Stream st(rng::derive_seed(11, "metrics-brute"));
        for (int trial = 0; trial < 200; ++trial) {
            size_t n = 2 + st.index_below(19);
            std::vector<double> scores(n);
            std::vector<int> labels(n);
            // coarse score grid forces plenty of ties
            for (auto& v : scores) v = static_cast<double>(st.index_below(5)) / 4.0;
            bool both = false;
            for (size_t i = 0; i < n; ++i) labels[i] = st.bernoulli(0.5) ? 1 : 0;
            for (size_t i = 0; i + 1 < n; ++i) both |= labels[i] != labels[i + 1];
            if (!both) labels[0] = 1 - labels[0];

            auto m = classify::eval_metrics(scores, labels);

            // AUC: all positive-negative pairs
            double wins = 0.0;
            size_t pos = 0, neg = 0;
            for (size_t i = 0; i < n; ++i) {
                if (labels[i] != 1) continue;
                ++pos;
                for (size_t j = 0; j < n; ++j) {
                    if (labels[j] != 0) continue;
                    if (scores[i] > scores[j]) wins += 1.0;
                    else if (scores[i] == scores[j]) wins += 0.5;
                }
            }
            neg = n - pos;
            double auc_brute = wins / (static_cast<double>(pos) * static_cast<double>(neg));
            CHECK(m.auc == Catch::Approx(auc_brute).margin(1e-12));

            // AP: rescan at every distinct threshold, descending
            std::vector<double> thresholds(scores);
            std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
            thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                             thresholds.end());
            double ap_brute = 0.0;
            size_t prev_tp = 0;
            for (double th : thresholds) {
                size_t tp = 0, fp = 0;
                for (size_t i = 0; i < n; ++i) {
                    if (scores[i] >= th) (labels[i] == 1 ? tp : fp)++;
                }
                if (tp > prev_tp) {
                    ap_brute += (static_cast<double>(tp - prev_tp) / static_cast<double>(pos)) *
                                (static_cast<double>(tp) / static_cast<double>(tp + fp));
                    prev_tp = tp;
                }
            }
            CHECK(m.average_precision == Catch::Approx(ap_brute).margin(1e-12));
        }
    }
}

TEST_CASE("stratified k-fold", "[classify]") {
    auto data = shifted_gaussian(25, 0, 2.0, 90); // 50 rows, 25 per class

    SECTION("folds partition the dataset") {
        auto folds = classify::stratified_kfold(data, 5, 123);
        REQUIRE(folds.size() == 5);
        std::set<size_t> seen;
        for (const auto& f : folds)
            for (size_t i : f) CHECK(seen.insert(i).second);
        CHECK(seen.size() == data.rows.size());
    }

    SECTION("per-fold class counts stay within one of proportional") {
        auto folds = classify::stratified_kfold(data, 5, 123);
        for (const auto& f : folds) {
            int pos = 0;
            for (size_t i : f) pos += classify::label_int(data.rows[i]);
            CHECK(pos == 5); // 25 positives over 5 folds
            CHECK(f.size() == 10);
        }
    }

    SECTION("ten rows five per class k five gives one of each per fold") {
        auto small = shifted_gaussian(5, 0, 2.0, 91);
        auto folds = classify::stratified_kfold(small, 5, 3);
        for (const auto& f : folds) {
            REQUIRE(f.size() == 2);
            CHECK(classify::label_int(small.rows[f[0]]) + classify::label_int(small.rows[f[1]]) ==
                  1);
        }
    }

    SECTION("deterministic given seed") {
        CHECK(classify::stratified_kfold(data, 5, 42) == classify::stratified_kfold(data, 5, 42));
        CHECK(classify::stratified_kfold(data, 5, 42) != classify::stratified_kfold(data, 5, 43));
    }

    SECTION("k larger than a class is rejected") {
        auto small = shifted_gaussian(3, 0, 2.0, 92);
        CHECK_THROWS_AS(classify::stratified_kfold(small, 4, 1), classify::TooFewRows);
    }
}

TEST_CASE("k-fold evaluation drives the trainer per fold", "[classify]") {
    auto data = shifted_gaussian(30, 4, 5.0, 93);
    int calls = 0;
    auto res = classify::kfold_eval(data, 5, 7, [&](const Dataset& train) {
        ++calls;
        CHECK(train.rows.size() == 48);
        classify::LogisticHyper h;
        h.epochs = 80;
        return classify::train_logistic(train, h);
    });
    CHECK(calls == 5);
    CHECK(res.per_fold.size() == 5);
    CHECK(res.mean_auc > 0.9);
    CHECK(res.sd_auc >= 0.0);
}

TEST_CASE("leave-one-model-out", "[classify]") {
    auto data = shifted_gaussian(30, 2, 5.0, 94);
    data.groups.clear();
    for (size_t i = 0; i < data.rows.size(); ++i)
        data.groups.push_back(i % 3 == 0 ? "model-a" : (i % 3 == 1 ? "model-b" : "model-c"));

    SECTION("each group evaluated exactly once, never trained on") {
        std::vector<std::set<std::string>> train_ids;
        auto res = classify::lomo_eval(data, [&](const Dataset& train) {
            std::set<std::string> ids;
            for (const auto& r : train.rows) ids.insert(r.citation_id);
            train_ids.push_back(std::move(ids));
            classify::LogisticHyper h;
            h.epochs = 60;
            return classify::train_logistic(train, h);
        });
        REQUIRE(res.per_group.size() == 3);
        CHECK(res.per_group[0].group == "model-a");
        CHECK(res.per_group[1].group == "model-b");
        CHECK(res.per_group[2].group == "model-c");

        // test sets are disjoint and exhaustive; held-out rows never trained on
        size_t total = 0;
        for (size_t g = 0; g < 3; ++g) {
            total += res.per_group[g].metrics.n;
            for (size_t i = 0; i < data.rows.size(); ++i)
                if (data.groups[i] == res.per_group[g].group)
                    CHECK_FALSE(train_ids[g].count(data.rows[i].citation_id));
        }
        CHECK(total == data.rows.size());
        CHECK(res.mean_auc > 0.8);
    }

    SECTION("two groups means exactly two runs") {
        Dataset two = data;
        for (auto& g : two.groups)
            if (g == "model-c") g = "model-b";
        int calls = 0;
        auto res = classify::lomo_eval(two, [&](const Dataset& train) {
            ++calls;
            classify::LogisticHyper h;
            h.epochs = 60;
            return classify::train_logistic(train, h);
        });
        CHECK(calls == 2);
        CHECK(res.per_group.size() == 2);
    }

    SECTION("single group is rejected") {
        Dataset one = data;
        for (auto& g : one.groups) g = "only";
        CHECK_THROWS_AS(classify::lomo_eval(one, [](const Dataset& d) {
                            return classify::train_logistic(d);
                        }),
                        classify::SingleGroup);
        Dataset none = data;
        none.groups.clear();
        CHECK_THROWS_AS(classify::lomo_eval(none, [](const Dataset& d) {
                            return classify::train_logistic(d);
                        }),
                        classify::SingleGroup);
    }
}

TEST_CASE("model serialization round trips", "[classify]") {
    auto data = shifted_gaussian(40, 6, 3.0, 95);
    auto probe = shifted_gaussian(15, 6, 3.0, 96);

    classify::ForestHyper fh;
    fh.n_trees = 10;
    fh.max_depth = 5;
    fh.seed = 5;
    classify::GbmHyper gh;
    gh.n_rounds = 25;
    gh.min_leaf = 4;

    std::vector<classify::TrainedModel> models = {
        classify::train_logistic(data),
        classify::train_random_forest(data, fh),
        classify::train_gbm(data, gh),
    };

    auto dir = std::filesystem::temp_directory_path() / "citeaudit_model_rt";
    std::filesystem::create_directories(dir);

    for (const auto& m : models) {
        auto path = (dir / (std::string(classify::to_string(m.kind)) + ".json")).string();
        classify::save_model(path, m);
        auto loaded = classify::load_model(path);
        CHECK(loaded.kind == m.kind);
        CHECK(loaded.feature_schema_version == m.feature_schema_version);
        for (const auto& r : probe.rows)
            CHECK(classify::predict(loaded, r) == classify::predict(m, r));
    }
    std::filesystem::remove_all(dir);

    SECTION("json documents carry the contract fields") {
        auto j = classify::model_to_json(models[2]);
        CHECK(j.at("kind") == "gbm");
        CHECK(j.at("schema_version") == features::kSchemaVersion);
        CHECK(j.contains("seed"));
        CHECK(j.contains("hyperparameters"));
        CHECK(j.contains("parameters"));
    }
}

TEST_CASE("schema mismatch is refused at prediction time", "[classify]") {
    auto data = shifted_gaussian(10, 0, 4.0, 97);
    auto model = classify::train_logistic(data);
    model.feature_schema_version = "fv27.v2";
    CHECK_THROWS_AS(classify::predict(model, data.rows[0]), classify::SchemaMismatch);
}
