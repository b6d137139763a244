#pragma once

// Pre-screen classifiers: logistic regression, random forest, and gradient
// boosting, built directly on the 26-feature vectors. Everything trains
// deterministically from a seed; no external ML dependency.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "features.hpp"
#include "rng.hpp"

namespace citeaudit::classify {

using Row = std::array<double, features::kFeatureCount>;

struct DegenerateData : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingleClass : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TooFewRows : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingleGroup : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Dataset {
    std::vector<features::FeatureVector> rows;
    std::vector<std::string> groups; // model_id per row; may be empty when unused
};

inline int label_int(const features::FeatureVector& fv) {
    if (!fv.label) throw DegenerateData("row " + fv.citation_id + " has no label");
    return *fv.label == features::Label::hallucinated ? 1 : 0;
}

inline Dataset dataset_subset(const Dataset& data, const std::vector<size_t>& indices) {
    Dataset out;
    out.rows.reserve(indices.size());
    bool grouped = !data.groups.empty();
    for (size_t i : indices) {
        out.rows.push_back(data.rows[i]);
        if (grouped) out.groups.push_back(data.groups[i]);
    }
    return out;
}

// ---- numerics ---------------------------------------------------------------

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// ---- logistic regression ----------------------------------------------------

struct LogisticHyper {
    double l2 = 1e-4;
    int epochs = 300;
    double learning_rate = 0.5;
    uint64_t seed = 0;
};

struct LogisticEval {
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

// Mean log-loss with L2 on the weights (bias unpenalized), plus its exact
// gradient. Generic in dimension so the finite-difference check can probe
// arbitrary batches.
inline LogisticEval logistic_loss_gradient(const std::vector<std::vector<double>>& X,
                                           const std::vector<int>& y,
                                           const std::vector<double>& w, double bias,
                                           double l2) {
    if (X.size() != y.size()) throw std::invalid_argument("X and y sizes differ");
    const size_t n = X.size(), d = w.size();
    LogisticEval ev;
    ev.grad_w.assign(d, 0.0);
    if (n == 0) return ev;
    for (size_t i = 0; i < n; ++i) {
        if (X[i].size() != d) throw std::invalid_argument("row dimension mismatch");
        double z = bias;
        for (size_t j = 0; j < d; ++j) z += w[j] * X[i][j];
        ev.loss += softplus(z) - static_cast<double>(y[i]) * z;
        double diff = sigmoid(z) - static_cast<double>(y[i]);
        for (size_t j = 0; j < d; ++j) ev.grad_w[j] += diff * X[i][j];
        ev.grad_b += diff;
    }
    double inv = 1.0 / static_cast<double>(n);
    ev.loss *= inv;
    ev.grad_b *= inv;
    double reg = 0.0;
    for (size_t j = 0; j < d; ++j) {
        ev.grad_w[j] = ev.grad_w[j] * inv + l2 * w[j];
        reg += w[j] * w[j];
    }
    ev.loss += 0.5 * l2 * reg;
    return ev;
}

struct LogisticParams {
    std::vector<double> weights; // in standardized space
    double bias = 0.0;
    std::vector<double> mean;
    std::vector<double> sd; // 0 marks a constant column (standardized to 0)
};

// ---- decision trees ----------------------------------------------------------

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const Row& x) const {
        int i = 0;
        while (nodes[static_cast<size_t>(i)].feature >= 0) {
            const auto& nd = nodes[static_cast<size_t>(i)];
            i = x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<size_t>(i)].value;
    }

    int depth() const {
        std::function<int(int)> go = [&](int i) -> int {
            const auto& nd = nodes[static_cast<size_t>(i)];
            if (nd.feature < 0) return 0;
            return 1 + std::max(go(nd.left), go(nd.right));
        };
        return nodes.empty() ? 0 : go(0);
    }
};

struct TreeHyper {
    int max_depth = 12;
    int min_leaf = 1;
};

namespace detail {

struct BestSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Candidate thresholds are midpoints between consecutive distinct values.
// Ties in gain resolve to the lowest feature index, then lowest threshold,
// because features arrive ascending and thresholds are scanned ascending
// with a strictly-greater comparison.
template <typename GainAt>
void scan_feature(const std::vector<Row>& X, const std::vector<size_t>& idx, int feature,
                  int min_leaf, GainAt&& gain_at, BestSplit& best,
                  std::vector<std::pair<double, size_t>>& scratch) {
    scratch.clear();
    for (size_t r : idx) scratch.emplace_back(X[r][static_cast<size_t>(feature)], r);
    std::sort(scratch.begin(), scratch.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const size_t n = scratch.size();
    for (size_t i = 0; i + 1 < n; ++i) {
        if (!(scratch[i].first < scratch[i + 1].first)) continue;
        size_t nl = i + 1;
        if (nl < static_cast<size_t>(min_leaf) || n - nl < static_cast<size_t>(min_leaf)) continue;
        double gain = gain_at(scratch, nl);
        if (gain > best.gain + 1e-12 || (!best.found && gain > 1e-12)) {
            best.found = true;
            best.feature = feature;
            best.threshold = 0.5 * (scratch[i].first + scratch[i + 1].first);
            best.gain = gain;
        }
    }
}

// Draws m distinct feature indices, returned ascending.
inline std::vector<int> pick_features(rng::Stream* stream, size_t d, size_t m) {
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    if (!stream || m >= d) return all;
    for (size_t i = 0; i < m; ++i) {
        size_t j = i + stream->index_below(d - i);
        std::swap(all[i], all[j]);
    }
    all.resize(m);
    std::sort(all.begin(), all.end());
    return all;
}

struct ClassificationTask {
    const std::vector<int>* y;

    double leaf_value(const std::vector<size_t>& idx) const {
        double pos = 0;
        for (size_t r : idx) pos += (*y)[r];
        return pos / static_cast<double>(idx.size());
    }
    bool pure(const std::vector<size_t>& idx) const {
        int first = (*y)[idx.front()];
        for (size_t r : idx)
            if ((*y)[r] != first) return false;
        return true;
    }
    // Gini decrease, scaled by node size (constant factor, same argmax).
    BestSplit best_split(const std::vector<Row>& X, const std::vector<size_t>& idx,
                         const std::vector<int>& feats, int min_leaf) const {
        BestSplit best;
        std::vector<std::pair<double, size_t>> scratch;
        double total_pos = 0;
        for (size_t r : idx) total_pos += (*y)[r];
        const double n = static_cast<double>(idx.size());
        double parent = total_pos * (n - total_pos) / n; // n/2 * gini
        for (int f : feats) {
            std::vector<double> pos_prefix;
            scan_feature(
                X, idx, f, min_leaf,
                [&](const std::vector<std::pair<double, size_t>>& sorted, size_t nl) {
                    if (pos_prefix.empty()) {
                        pos_prefix.resize(sorted.size() + 1, 0.0);
                        for (size_t i = 0; i < sorted.size(); ++i)
                            pos_prefix[i + 1] = pos_prefix[i] + (*y)[sorted[i].second];
                    }
                    double pl = pos_prefix[nl];
                    double pr = total_pos - pl;
                    double nld = static_cast<double>(nl);
                    double nrd = n - nld;
                    double child = pl * (nld - pl) / nld + pr * (nrd - pr) / nrd;
                    return parent - child;
                },
                best, scratch);
        }
        return best;
    }
};

struct RegressionTask {
    const std::vector<double>* residual;
    const std::vector<double>* hessian; // Newton leaf denominators

    double leaf_value(const std::vector<size_t>& idx) const {
        double g = 0, h = 0;
        for (size_t r : idx) {
            g += (*residual)[r];
            h += (*hessian)[r];
        }
        return g / (h + 1e-12);
    }
    bool pure(const std::vector<size_t>& idx) const {
        double first = (*residual)[idx.front()];
        for (size_t r : idx)
            if ((*residual)[r] != first) return false;
        return true;
    }
    // Squared-error reduction via sum decomposition.
    BestSplit best_split(const std::vector<Row>& X, const std::vector<size_t>& idx,
                         const std::vector<int>& feats, int min_leaf) const {
        BestSplit best;
        std::vector<std::pair<double, size_t>> scratch;
        double total = 0;
        for (size_t r : idx) total += (*residual)[r];
        const double n = static_cast<double>(idx.size());
        for (int f : feats) {
            std::vector<double> prefix;
            scan_feature(
                X, idx, f, min_leaf,
                [&](const std::vector<std::pair<double, size_t>>& sorted, size_t nl) {
                    if (prefix.empty()) {
                        prefix.resize(sorted.size() + 1, 0.0);
                        for (size_t i = 0; i < sorted.size(); ++i)
                            prefix[i + 1] = prefix[i] + (*residual)[sorted[i].second];
                    }
                    double sl = prefix[nl];
                    double sr = total - sl;
                    double nld = static_cast<double>(nl);
                    return sl * sl / nld + sr * sr / (n - nld) - total * total / n;
                },
                best, scratch);
        }
        return best;
    }
};

template <typename Task>
int build_node(Tree& tree, const std::vector<Row>& X, const Task& task,
               const std::vector<size_t>& idx, int depth, const TreeHyper& hyper,
               rng::Stream* stream, size_t m_features) {
    int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().value = task.leaf_value(idx);

    if (depth >= hyper.max_depth || idx.size() < 2 * static_cast<size_t>(hyper.min_leaf) ||
        task.pure(idx))
        return node_index;

    auto feats = pick_features(stream, features::kFeatureCount, m_features);
    BestSplit best = task.best_split(X, idx, feats, hyper.min_leaf);
    if (!best.found) return node_index;

    std::vector<size_t> left, right;
    for (size_t r : idx)
        (X[r][static_cast<size_t>(best.feature)] <= best.threshold ? left : right).push_back(r);

    tree.nodes[static_cast<size_t>(node_index)].feature = best.feature;
    tree.nodes[static_cast<size_t>(node_index)].threshold = best.threshold;
    int l = build_node(tree, X, task, left, depth + 1, hyper, stream, m_features);
    int r = build_node(tree, X, task, right, depth + 1, hyper, stream, m_features);
    tree.nodes[static_cast<size_t>(node_index)].left = l;
    tree.nodes[static_cast<size_t>(node_index)].right = r;
    return node_index;
}

inline std::vector<Row> matrix_of(const Dataset& data) {
    std::vector<Row> X;
    X.reserve(data.rows.size());
    for (const auto& r : data.rows) X.push_back(r.values);
    return X;
}

inline std::vector<int> labels_of(const Dataset& data) {
    std::vector<int> y;
    y.reserve(data.rows.size());
    for (const auto& r : data.rows) y.push_back(label_int(r));
    return y;
}

inline void require_both_classes(const std::vector<int>& y, int min_per_class = 1) {
    int pos = 0, neg = 0;
    for (int v : y) (v == 1 ? pos : neg)++;
    if (pos < min_per_class || neg < min_per_class)
        throw DegenerateData("training data needs both classes (pos=" + std::to_string(pos) +
                             ", neg=" + std::to_string(neg) + ")");
}

} // namespace detail

// Greedy Gini tree on binary labels; leaf value = positive fraction.
inline Tree train_classification_tree(const std::vector<Row>& X, const std::vector<int>& y,
                                      const TreeHyper& hyper = {}) {
    if (X.empty() || X.size() != y.size()) throw std::invalid_argument("bad tree inputs");
    Tree tree;
    detail::ClassificationTask task{&y};
    std::vector<size_t> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    detail::build_node(tree, X, task, idx, 0, hyper, nullptr, features::kFeatureCount);
    return tree;
}

// Variance-split regression tree with Newton leaves (gradient/hessian pairs).
inline Tree train_regression_tree(const std::vector<Row>& X, const std::vector<double>& residual,
                                  const std::vector<double>& hessian,
                                  const TreeHyper& hyper = {}) {
    if (X.empty() || X.size() != residual.size() || X.size() != hessian.size())
        throw std::invalid_argument("bad tree inputs");
    Tree tree;
    detail::RegressionTask task{&residual, &hessian};
    std::vector<size_t> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    detail::build_node(tree, X, task, idx, 0, hyper, nullptr, features::kFeatureCount);
    return tree;
}

// ---- model containers ---------------------------------------------------------

enum class ModelKind { logistic, forest, gbm };

constexpr const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::logistic: return "logistic";
        case ModelKind::forest: return "forest";
        case ModelKind::gbm: return "gbm";
    }
    return "logistic";
}

inline ModelKind model_kind_from_string(std::string_view s) {
    if (s == "logistic") return ModelKind::logistic;
    if (s == "forest") return ModelKind::forest;
    if (s == "gbm") return ModelKind::gbm;
    throw std::invalid_argument("unknown model kind: " + std::string(s));
}

struct ForestHyper {
    int n_trees = 200;
    int max_depth = 12;
    double feature_frac = 0.19611613513818404; // sqrt(26)/26
    bool bootstrap = true;
    int min_leaf = 1;
    uint64_t seed = 0;
};

struct GbmHyper {
    int n_rounds = 200;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_leaf = 20;
    uint64_t seed = 0;
};

struct ForestParams {
    std::vector<Tree> trees;
};

struct GbmParams {
    double base_score = 0.0; // log-odds of the training prior
    std::vector<Tree> trees;
    std::vector<double> scales;       // effective multiplier per tree (lr folded in)
    std::vector<double> training_loss; // loss after each accepted round
};

struct TrainedModel {
    ModelKind kind = ModelKind::logistic;
    std::string feature_schema_version = features::kSchemaVersion;
    uint64_t training_seed = 0;
    LogisticHyper logistic_hyper;
    ForestHyper forest_hyper;
    GbmHyper gbm_hyper;
    LogisticParams logistic;
    ForestParams forest;
    GbmParams gbm;
};

// ---- training -----------------------------------------------------------------

inline TrainedModel train_logistic(const Dataset& data, const LogisticHyper& hyper = {}) {
    auto y = detail::labels_of(data);
    detail::require_both_classes(y, 2);
    const size_t n = data.rows.size(), d = features::kFeatureCount;

    LogisticParams p;
    p.mean.assign(d, 0.0);
    p.sd.assign(d, 0.0);
    for (const auto& r : data.rows)
        for (size_t j = 0; j < d; ++j) p.mean[j] += r.values[j];
    for (size_t j = 0; j < d; ++j) p.mean[j] /= static_cast<double>(n);
    for (const auto& r : data.rows)
        for (size_t j = 0; j < d; ++j) {
            double c = r.values[j] - p.mean[j];
            p.sd[j] += c * c;
        }
    for (size_t j = 0; j < d; ++j) p.sd[j] = std::sqrt(p.sd[j] / static_cast<double>(n));

    std::vector<std::vector<double>> X(n, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j)
            if (p.sd[j] > 0.0) X[i][j] = (data.rows[i].values[j] - p.mean[j]) / p.sd[j];

    p.weights.assign(d, 0.0);
    p.bias = 0.0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        auto ev = logistic_loss_gradient(X, y, p.weights, p.bias, hyper.l2);
        for (size_t j = 0; j < d; ++j) p.weights[j] -= hyper.learning_rate * ev.grad_w[j];
        p.bias -= hyper.learning_rate * ev.grad_b;
    }

    TrainedModel m;
    m.kind = ModelKind::logistic;
    m.training_seed = hyper.seed;
    m.logistic_hyper = hyper;
    m.logistic = std::move(p);
    return m;
}

inline TrainedModel train_random_forest(const Dataset& data, const ForestHyper& hyper = {}) {
    auto y = detail::labels_of(data);
    detail::require_both_classes(y);
    auto X = detail::matrix_of(data);
    const size_t n = X.size(), d = features::kFeatureCount;
    size_t m_features = static_cast<size_t>(std::clamp(
        static_cast<long>(std::floor(hyper.feature_frac * static_cast<double>(d) + 0.5)), 1l,
        static_cast<long>(d)));

    TrainedModel m;
    m.kind = ModelKind::forest;
    m.training_seed = hyper.seed;
    m.forest_hyper = hyper;
    TreeHyper th{hyper.max_depth, hyper.min_leaf};

    for (int t = 0; t < hyper.n_trees; ++t) {
        rng::Stream stream(rng::derive_seed(hyper.seed, static_cast<uint64_t>(t)));
        std::vector<size_t> idx;
        idx.reserve(n);
        if (hyper.bootstrap) {
            for (size_t i = 0; i < n; ++i) idx.push_back(stream.index_below(n));
        } else {
            idx.resize(n);
            std::iota(idx.begin(), idx.end(), 0);
        }
        Tree tree;
        detail::ClassificationTask task{&y};
        detail::build_node(tree, X, task, idx, 0, th, &stream, m_features);
        m.forest.trees.push_back(std::move(tree));
    }
    return m;
}

inline TrainedModel train_gbm(const Dataset& data, const GbmHyper& hyper = {}) {
    auto y = detail::labels_of(data);
    detail::require_both_classes(y, 2);
    auto X = detail::matrix_of(data);
    const size_t n = X.size();

    TrainedModel m;
    m.kind = ModelKind::gbm;
    m.training_seed = hyper.seed;
    m.gbm_hyper = hyper;

    double prior = 0.0;
    for (int v : y) prior += v;
    prior /= static_cast<double>(n);
    m.gbm.base_score = std::log(prior / (1.0 - prior));

    std::vector<double> F(n, m.gbm.base_score);
    auto mean_loss = [&](const std::vector<double>& raw) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += softplus(raw[i]) - y[i] * raw[i];
        return s / static_cast<double>(n);
    };
    double current = mean_loss(F);
    TreeHyper th{hyper.max_depth, hyper.min_leaf};

    for (int round = 0; round < hyper.n_rounds; ++round) {
        std::vector<double> residual(n), hessian(n);
        for (size_t i = 0; i < n; ++i) {
            double p = sigmoid(F[i]);
            residual[i] = y[i] - p;
            hessian[i] = p * (1.0 - p);
        }
        Tree tree = train_regression_tree(X, residual, hessian, th);
        std::vector<double> step(n);
        for (size_t i = 0; i < n; ++i) step[i] = tree.predict(X[i]);

        // Backtrack the scale until the training loss stops increasing; a
        // tree that cannot help at any scale is kept with scale 0.
        double scale = hyper.learning_rate;
        double best = current;
        std::vector<double> trial(n);
        for (int halving = 0; halving <= 40; ++halving) {
            for (size_t i = 0; i < n; ++i) trial[i] = F[i] + scale * step[i];
            double l = mean_loss(trial);
            if (l <= current + 1e-15) {
                best = l;
                break;
            }
            scale *= 0.5;
            if (halving == 40) scale = 0.0;
        }
        if (scale == 0.0) best = current;
        for (size_t i = 0; i < n; ++i) F[i] += scale * step[i];
        current = best;
        m.gbm.trees.push_back(std::move(tree));
        m.gbm.scales.push_back(scale);
        m.gbm.training_loss.push_back(current);
    }
    return m;
}

// ---- prediction -----------------------------------------------------------------

inline double predict(const TrainedModel& m, const features::FeatureVector& fv) {
    if (m.feature_schema_version != features::kSchemaVersion)
        throw SchemaMismatch("model schema " + m.feature_schema_version + " vs runtime " +
                             features::kSchemaVersion);
    switch (m.kind) {
        case ModelKind::logistic: {
            double z = m.logistic.bias;
            for (size_t j = 0; j < features::kFeatureCount; ++j)
                if (m.logistic.sd[j] > 0.0)
                    z += m.logistic.weights[j] * (fv.values[j] - m.logistic.mean[j]) /
                         m.logistic.sd[j];
            return sigmoid(z);
        }
        case ModelKind::forest: {
            double s = 0.0;
            for (const auto& t : m.forest.trees) s += t.predict(fv.values);
            return m.forest.trees.empty() ? 0.5 : s / static_cast<double>(m.forest.trees.size());
        }
        case ModelKind::gbm: {
            double z = m.gbm.base_score;
            for (size_t t = 0; t < m.gbm.trees.size(); ++t)
                z += m.gbm.scales[t] * m.gbm.trees[t].predict(fv.values);
            return sigmoid(z);
        }
    }
    throw std::logic_error("unreachable model kind");
}

// ---- evaluation -----------------------------------------------------------------

struct EvalMetrics {
    double auc = 0.0;
    double average_precision = 0.0;
    double accuracy = 0.0;
    size_t n = 0;
};

// AUC by the mid-rank Mann-Whitney formulation (ties count one half);
// AP by step interpolation over descending score groups.
inline EvalMetrics eval_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                                double threshold = 0.5) {
    if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels size mismatch");
    const size_t n = scores.size();
    size_t pos = 0;
    for (int l : labels) pos += (l == 1);
    size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw SingleClass("eval needs both classes present");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    EvalMetrics m;
    m.n = n;

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += mid_rank;
        i = j;
    }
    m.auc = (rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0) /
            (static_cast<double>(pos) * static_cast<double>(neg));

    // descending for AP
    std::reverse(order.begin(), order.end());
    size_t tp = 0, fp = 0, prev_tp = 0;
    double ap = 0.0;
    i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (size_t t = i; t < j; ++t)
            labels[order[t]] == 1 ? ++tp : ++fp;
        if (tp > prev_tp) {
            double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            ap += precision * static_cast<double>(tp - prev_tp) / static_cast<double>(pos);
            prev_tp = tp;
        }
        i = j;
    }
    m.average_precision = ap;

    size_t correct = 0;
    for (size_t t = 0; t < n; ++t)
        if ((scores[t] >= threshold ? 1 : 0) == labels[t]) ++correct;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return m;
}

// ---- protocols ------------------------------------------------------------------

// Round-robin deal within each class after a seeded shuffle: fold class
// counts stay within one row of proportional.
inline std::vector<std::vector<size_t>> stratified_kfold(const Dataset& data, int k,
                                                         uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k must be at least 2");
    std::vector<size_t> by_class[2];
    for (size_t i = 0; i < data.rows.size(); ++i)
        by_class[label_int(data.rows[i])].push_back(i);
    if (static_cast<size_t>(k) > std::min(by_class[0].size(), by_class[1].size()))
        throw TooFewRows("k exceeds the smaller class count");

    std::vector<std::vector<size_t>> folds(static_cast<size_t>(k));
    for (int c = 0; c < 2; ++c) {
        rng::Stream stream(rng::derive_seed(seed, static_cast<uint64_t>(c)));
        stream.shuffle(by_class[c]);
        for (size_t i = 0; i < by_class[c].size(); ++i)
            folds[i % static_cast<size_t>(k)].push_back(by_class[c][i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

using Trainer = std::function<TrainedModel(const Dataset&)>;

struct FoldEval {
    std::vector<EvalMetrics> per_fold;
    double mean_auc = 0.0;
    double sd_auc = 0.0;
    double mean_ap = 0.0;
    double mean_accuracy = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
    return {mean, std::sqrt(var)};
}

inline EvalMetrics eval_on(const TrainedModel& model, const Dataset& test, double threshold) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(test.rows.size());
    for (const auto& r : test.rows) {
        scores.push_back(predict(model, r));
        labels.push_back(label_int(r));
    }
    return eval_metrics(scores, labels, threshold);
}

} // namespace detail

inline FoldEval kfold_eval(const Dataset& data, int k, uint64_t seed, const Trainer& trainer,
                           double threshold = 0.5) {
    auto folds = stratified_kfold(data, k, seed);
    FoldEval out;
    std::vector<double> aucs, aps, accs;
    for (const auto& fold : folds) {
        std::vector<char> in_fold(data.rows.size(), 0);
        for (size_t i : fold) in_fold[i] = 1;
        std::vector<size_t> train_idx;
        for (size_t i = 0; i < data.rows.size(); ++i)
            if (!in_fold[i]) train_idx.push_back(i);
        auto model = trainer(dataset_subset(data, train_idx));
        auto metrics = detail::eval_on(model, dataset_subset(data, fold), threshold);
        aucs.push_back(metrics.auc);
        aps.push_back(metrics.average_precision);
        accs.push_back(metrics.accuracy);
        out.per_fold.push_back(metrics);
    }
    auto [ma, sa] = detail::mean_sd(aucs);
    out.mean_auc = ma;
    out.sd_auc = sa;
    out.mean_ap = detail::mean_sd(aps).first;
    out.mean_accuracy = detail::mean_sd(accs).first;
    return out;
}

struct GroupEval {
    std::string group;
    EvalMetrics metrics;
};

struct LomoResult {
    std::vector<GroupEval> per_group; // sorted by group id
    double mean_auc = 0.0;
    double sd_auc = 0.0;
};

// Leave-one-model-out: hold out each model's rows, train on the rest.
inline LomoResult lomo_eval(const Dataset& data, const Trainer& trainer,
                            double threshold = 0.5) {
    if (data.groups.size() != data.rows.size())
        throw SingleGroup("dataset has no per-row group ids");
    std::set<std::string> distinct(data.groups.begin(), data.groups.end());
    if (distinct.size() < 2) throw SingleGroup("leave-one-model-out needs at least two groups");

    LomoResult out;
    std::vector<double> aucs;
    for (const auto& g : distinct) {
        std::vector<size_t> test_idx, train_idx;
        for (size_t i = 0; i < data.rows.size(); ++i)
            (data.groups[i] == g ? test_idx : train_idx).push_back(i);
        auto model = trainer(dataset_subset(data, train_idx));
        auto metrics = detail::eval_on(model, dataset_subset(data, test_idx), threshold);
        out.per_group.push_back({g, metrics});
        aucs.push_back(metrics.auc);
    }
    auto [mean, sd] = detail::mean_sd(aucs);
    out.mean_auc = mean;
    out.sd_auc = sd;
    return out;
}

// ---- serialization ----------------------------------------------------------------

inline nlohmann::json tree_to_json(const Tree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes)
        nodes.push_back({{"f", nd.feature},
                         {"t", nd.threshold},
                         {"v", nd.value},
                         {"l", nd.left},
                         {"r", nd.right}});
    return nodes;
}

inline Tree tree_from_json(const nlohmann::json& j) {
    Tree t;
    for (const auto& nd : j) {
        TreeNode n;
        n.feature = nd.at("f").get<int>();
        n.threshold = nd.at("t").get<double>();
        n.value = nd.at("v").get<double>();
        n.left = nd.at("l").get<int>();
        n.right = nd.at("r").get<int>();
        t.nodes.push_back(n);
    }
    return t;
}

inline nlohmann::json model_to_json(const TrainedModel& m) {
    nlohmann::json j;
    j["kind"] = to_string(m.kind);
    j["schema_version"] = m.feature_schema_version;
    j["seed"] = m.training_seed;
    switch (m.kind) {
        case ModelKind::logistic:
            j["hyperparameters"] = {{"l2", m.logistic_hyper.l2},
                                    {"epochs", m.logistic_hyper.epochs},
                                    {"learning_rate", m.logistic_hyper.learning_rate}};
            j["parameters"] = {{"weights", m.logistic.weights},
                               {"bias", m.logistic.bias},
                               {"mean", m.logistic.mean},
                               {"sd", m.logistic.sd}};
            break;
        case ModelKind::forest: {
            j["hyperparameters"] = {{"n_trees", m.forest_hyper.n_trees},
                                    {"max_depth", m.forest_hyper.max_depth},
                                    {"feature_frac", m.forest_hyper.feature_frac},
                                    {"bootstrap", m.forest_hyper.bootstrap},
                                    {"min_leaf", m.forest_hyper.min_leaf}};
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& t : m.forest.trees) trees.push_back(tree_to_json(t));
            j["parameters"] = {{"trees", trees}};
            break;
        }
        case ModelKind::gbm: {
            j["hyperparameters"] = {{"n_rounds", m.gbm_hyper.n_rounds},
                                    {"learning_rate", m.gbm_hyper.learning_rate},
                                    {"max_depth", m.gbm_hyper.max_depth},
                                    {"min_leaf", m.gbm_hyper.min_leaf}};
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& t : m.gbm.trees) trees.push_back(tree_to_json(t));
            j["parameters"] = {{"base_score", m.gbm.base_score},
                               {"trees", trees},
                               {"scales", m.gbm.scales},
                               {"training_loss", m.gbm.training_loss}};
            break;
        }
    }
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    TrainedModel m;
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.feature_schema_version = j.at("schema_version").get<std::string>();
    m.training_seed = j.at("seed").get<uint64_t>();
    const auto& h = j.at("hyperparameters");
    const auto& p = j.at("parameters");
    switch (m.kind) {
        case ModelKind::logistic:
            m.logistic_hyper.l2 = h.at("l2").get<double>();
            m.logistic_hyper.epochs = h.at("epochs").get<int>();
            m.logistic_hyper.learning_rate = h.at("learning_rate").get<double>();
            m.logistic_hyper.seed = m.training_seed;
            m.logistic.weights = p.at("weights").get<std::vector<double>>();
            m.logistic.bias = p.at("bias").get<double>();
            m.logistic.mean = p.at("mean").get<std::vector<double>>();
            m.logistic.sd = p.at("sd").get<std::vector<double>>();
            break;
        case ModelKind::forest:
            m.forest_hyper.n_trees = h.at("n_trees").get<int>();
            m.forest_hyper.max_depth = h.at("max_depth").get<int>();
            m.forest_hyper.feature_frac = h.at("feature_frac").get<double>();
            m.forest_hyper.bootstrap = h.at("bootstrap").get<bool>();
            m.forest_hyper.min_leaf = h.at("min_leaf").get<int>();
            m.forest_hyper.seed = m.training_seed;
            for (const auto& t : p.at("trees")) m.forest.trees.push_back(tree_from_json(t));
            break;
        case ModelKind::gbm:
            m.gbm_hyper.n_rounds = h.at("n_rounds").get<int>();
            m.gbm_hyper.learning_rate = h.at("learning_rate").get<double>();
            m.gbm_hyper.max_depth = h.at("max_depth").get<int>();
            m.gbm_hyper.min_leaf = h.at("min_leaf").get<int>();
            m.gbm_hyper.seed = m.training_seed;
            m.gbm.base_score = p.at("base_score").get<double>();
            for (const auto& t : p.at("trees")) m.gbm.trees.push_back(tree_from_json(t));
            m.gbm.scales = p.at("scales").get<std::vector<double>>();
            m.gbm.training_loss = p.at("training_loss").get<std::vector<double>>();
            break;
    }
    return m;
}

inline void save_model(const std::string& path, const TrainedModel& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << model_to_json(m).dump(2) << '\n';
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    return model_from_json(j);
}

} // namespace citeaudit::classify
