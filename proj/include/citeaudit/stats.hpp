#pragma once

// Chi-squared with Cramer's V, percentile bootstrap, Spearman rank
// correlation. The incomplete-gamma p-value is computed in-house (series +
// continued fraction) so the whole stack stays dependency-free and testable
// against quadrature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace citeaudit::stats {

struct ZeroMarginal : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZeroVariance : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- regularized incomplete gamma -------------------------------------------

namespace detail {

inline constexpr double kGammaEps = 1e-14;
inline constexpr int kGammaMaxIter = 1000;

// Lower regularized P(a,x) by power series; valid fastest for x < a+1.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kGammaMaxIter; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kGammaEps)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("incomplete gamma series failed to converge");
}

// Upper regularized Q(a,x) by modified Lentz continued fraction; x >= a+1.
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kGammaMaxIter; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kGammaEps)
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("incomplete gamma continued fraction failed to converge");
}

} // namespace detail

// Lower regularized incomplete gamma P(a,x).
inline double gamma_p(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("gamma_p needs a > 0");
    if (x < 0.0) throw std::invalid_argument("gamma_p needs x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

// Upper regularized incomplete gamma Q(a,x) = 1 - P(a,x).
inline double gamma_q(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("gamma_q needs a > 0");
    if (x < 0.0) throw std::invalid_argument("gamma_q needs x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

// Survival function of the chi-squared distribution.
inline double chi2_sf(double chi2, int dof) {
    if (dof < 1) throw std::invalid_argument("dof must be at least 1");
    if (chi2 < 0.0) throw std::invalid_argument("chi2 must be non-negative");
    return gamma_q(static_cast<double>(dof) / 2.0, chi2 / 2.0);
}

// ---- chi-squared test --------------------------------------------------------

struct ContingencyTable {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<long long>> counts;
};

inline ContingencyTable make_table(std::vector<std::vector<long long>> counts) {
    ContingencyTable t;
    t.counts = std::move(counts);
    for (size_t i = 0; i < t.counts.size(); ++i) t.row_labels.push_back("r" + std::to_string(i));
    for (size_t j = 0; t.counts.size() && j < t.counts[0].size(); ++j)
        t.col_labels.push_back("c" + std::to_string(j));
    return t;
}

struct ChiSquaredResult {
    double chi2 = 0.0;
    int dof = 0;
    double p = 1.0;
    double cramers_v = 0.0;
};

inline ChiSquaredResult chi_squared(const ContingencyTable& t) {
    const size_t r = t.counts.size();
    if (r < 2) throw std::invalid_argument("contingency table needs at least 2 rows");
    const size_t c = t.counts[0].size();
    if (c < 2) throw std::invalid_argument("contingency table needs at least 2 columns");

    std::vector<double> row_sum(r, 0.0), col_sum(c, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < r; ++i) {
        if (t.counts[i].size() != c) throw std::invalid_argument("ragged contingency table");
        for (size_t j = 0; j < c; ++j) {
            if (t.counts[i][j] < 0) throw std::invalid_argument("negative count");
            double v = static_cast<double>(t.counts[i][j]);
            row_sum[i] += v;
            col_sum[j] += v;
            total += v;
        }
    }
    if (total <= 0.0) throw ZeroMarginal("empty contingency table");
    for (size_t i = 0; i < r; ++i)
        if (row_sum[i] == 0.0) throw ZeroMarginal("zero row marginal: " + std::to_string(i));
    for (size_t j = 0; j < c; ++j)
        if (col_sum[j] == 0.0) throw ZeroMarginal("zero column marginal: " + std::to_string(j));

    ChiSquaredResult res;
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) {
            double expected = row_sum[i] * col_sum[j] / total;
            double diff = static_cast<double>(t.counts[i][j]) - expected;
            res.chi2 += diff * diff / expected;
        }
    res.dof = static_cast<int>((r - 1) * (c - 1));
    res.p = chi2_sf(res.chi2, res.dof);
    double denom = total * static_cast<double>(std::min(r, c) - 1);
    res.cramers_v = std::sqrt(std::max(0.0, res.chi2 / denom));
    res.cramers_v = std::min(res.cramers_v, 1.0);
    return res;
}

// ---- percentile bootstrap ------------------------------------------------------

// Percentile CI of the resampled mean, nearest-rank on both tails. Each
// resample runs on its own derived stream so shards stay reproducible.
inline std::pair<double, double> bootstrap_ci(const std::vector<int>& outcomes,
                                              int resamples = 10000, double level = 0.95,
                                              uint64_t seed = 0) {
    if (outcomes.empty()) throw std::invalid_argument("bootstrap needs a non-empty sample");
    if (resamples < 1) throw std::invalid_argument("resamples must be positive");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0,1)");

    const size_t n = outcomes.size();
    std::vector<double> means(static_cast<size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        rng::Stream st(rng::derive_seed(seed, static_cast<uint64_t>(b)));
        long long acc = 0;
        for (size_t i = 0; i < n; ++i) acc += outcomes[st.index_below(n)];
        means[static_cast<size_t>(b)] = static_cast<double>(acc) / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());

    auto nearest_rank = [&](double q) {
        double pos = q * static_cast<double>(resamples);
        long idx = static_cast<long>(std::ceil(pos)) - 1;
        idx = std::clamp(idx, 0l, static_cast<long>(resamples) - 1);
        return means[static_cast<size_t>(idx)];
    };
    double alpha = 1.0 - level;
    double lo = nearest_rank(alpha / 2.0);
    double hi = nearest_rank(1.0 - alpha / 2.0);
    return {lo, hi};
}

// ---- rank correlation ------------------------------------------------------------

namespace detail {

inline std::vector<double> mid_ranks(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && x[order[j]] == x[order[i]]) ++j;
        double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t t = i; t < j; ++t) ranks[order[t]] = mid;
        i = j;
    }
    return ranks;
}

} // namespace detail

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman inputs differ in length");
    if (x.size() < 2) throw std::invalid_argument("spearman needs at least 2 pairs");
    auto rx = detail::mid_ranks(x);
    auto ry = detail::mid_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double a = rx[i] - mx, b = ry[i] - my;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) throw ZeroVariance("constant ranks have no correlation");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---- small helpers ---------------------------------------------------------------

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median of empty set");
    std::sort(xs.begin(), xs.end());
    size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty set");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

} // namespace citeaudit::stats
