// Test-only oracles: deliberately naive, independent implementations used to
// cross-check the library. Nothing here may call into the code under test
// beyond plain data types.
#pragma once

#include "trajkit/common.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

namespace oracles {

using trajkit::Mat;
using trajkit::Vec;

/// Element-by-element mean squared error, double loop.
inline double mse_bruteforce(const Mat& a, const Mat& b) {
    double total = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) total += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
    return total / static_cast<double>(a.rows() * a.cols());
}

/// O(n^2) silhouette on 1-D points with |x-y| distances; labels are 0/1.
inline double silhouette_bruteforce(const std::vector<double>& x, const std::vector<int>& labels) {
    const auto n = x.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double intra = 0.0, inter = 0.0;
        std::size_t n_intra = 0, n_inter = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (labels[j] == labels[i]) {
                intra += std::abs(x[i] - x[j]);
                ++n_intra;
            } else {
                inter += std::abs(x[i] - x[j]);
                ++n_inter;
            }
        }
        if (n_intra == 0) continue;  // singleton cluster contributes 0
        const double a = intra / static_cast<double>(n_intra);
        const double b = inter / static_cast<double>(n_inter);
        if (std::max(a, b) > 0.0) total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

/// Closed-form responsibilities of a 2-component 1-D Gaussian mixture.
inline std::pair<double, double> gmm_responsibility(double x, const std::array<double, 2>& w,
                                                    const std::array<double, 2>& mu,
                                                    const std::array<double, 2>& var) {
    auto pdf = [](double v, double m, double s2) {
        return std::exp(-(v - m) * (v - m) / (2.0 * s2)) / std::sqrt(2.0 * M_PI * s2);
    };
    const double p0 = w[0] * pdf(x, mu[0], var[0]);
    const double p1 = w[1] * pdf(x, mu[1], var[1]);
    return {p0 / (p0 + p1), p1 / (p0 + p1)};
}

/// Exhaustive k-nearest-neighbour lists (Euclidean, ties by index).
inline std::vector<std::vector<std::size_t>> knn_bruteforce(const std::vector<Vec>& points, int k) {
    std::vector<std::vector<std::size_t>> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j == i) continue;
            d.emplace_back((points[i] - points[j]).norm(), j);
        }
        std::sort(d.begin(), d.end());
        for (int q = 0; q < k && q < static_cast<int>(d.size()); ++q) out[i].push_back(d[q].second);
    }
    return out;
}

/// Mean absolute consecutive difference per coordinate over a frame sequence.
inline std::vector<double> mean_abs_diff(const std::vector<std::array<double, 34>>& frames) {
    std::vector<double> d(34, 0.0);
    for (std::size_t f = 1; f < frames.size(); ++f)
        for (int c = 0; c < 34; ++c) d[c] += std::abs(frames[f][c] - frames[f - 1][c]);
    for (auto& v : d) v /= static_cast<double>(frames.size() - 1);
    return d;
}

// --- classification metric oracles, recomputed from raw label/probability
// --- triples rather than a confusion matrix.

struct MetricOracle {
    double overall = 0.0;
    double macro = 0.0;
    double weighted_recall = 0.0;
    double weighted_precision = 0.0;
    double weighted_f1 = 0.0;
    double iba = 0.0;
    std::vector<double> per_class_recall;
};

inline MetricOracle metrics_bruteforce(const std::vector<int>& truth, const std::vector<int>& pred, int C) {
    MetricOracle m;
    const double n = static_cast<double>(truth.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
    m.overall = static_cast<double>(correct) / n;
    m.per_class_recall.assign(static_cast<std::size_t>(C), 0.0);
    int with_support = 0;
    for (int c = 0; c < C; ++c) {
        double tp = 0, fn = 0, fp = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == c && pred[i] == c) tp += 1;
            if (truth[i] == c && pred[i] != c) fn += 1;
            if (truth[i] != c && pred[i] == c) fp += 1;
        }
        const double support = tp + fn;
        const double recall = support > 0 ? tp / support : 0.0;
        const double precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
        const double f1 = (precision + recall) > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        const double tn = n - support - fp;
        const double spec = (tn + fp) > 0 ? tn / (tn + fp) : 0.0;
        m.per_class_recall[static_cast<std::size_t>(c)] = recall;
        if (support > 0) {
            m.macro += recall;
            ++with_support;
        }
        m.weighted_recall += (support / n) * recall;
        m.weighted_precision += (support / n) * precision;
        m.weighted_f1 += (support / n) * f1;
        m.iba += (support / n) * (1.0 + 0.1 * (recall - spec)) * recall * spec;
    }
    if (with_support > 0) m.macro /= with_support;
    return m;
}

/// Sort-based top-k: stable sort by (probability desc, class index asc).
inline double topk_bruteforce(const std::vector<Vec>& probs, const std::vector<int>& truth, int k) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        std::vector<int> order(static_cast<std::size_t>(probs[i].size()));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (probs[i](a) != probs[i](b)) return probs[i](a) > probs[i](b);
            return a < b;
        });
        for (int q = 0; q < k; ++q)
            if (order[static_cast<std::size_t>(q)] == truth[i]) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(probs.size());
}

/// Exact two-sided Wilcoxon signed-rank p by recursive enumeration over sign
/// patterns (independent of the library's bitmask loop). Takes the doubled
/// ranks of the non-zero differences and the observed doubled W+.
inline double wilcoxon_exact_recursive(const std::vector<long long>& rank2, long long w2_observed) {
    long long total2 = 0;
    for (auto r : rank2) total2 += r;
    const long long lo = std::min(w2_observed, total2 - w2_observed);
    const long long hi = total2 - lo;
    std::size_t extreme = 0, patterns = 0;
    // depth-first over +/- choices
    std::vector<std::size_t> stack;
    std::function<void(std::size_t, long long)> rec = [&](std::size_t i, long long acc) {
        if (i == rank2.size()) {
            ++patterns;
            if (acc <= lo || acc >= hi) ++extreme;
            return;
        }
        rec(i + 1, acc);
        rec(i + 1, acc + rank2[i]);
    };
    rec(0, 0);
    return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(patterns));
}

/// Reference Adam recurrence on a scalar parameter.
struct ScalarAdam {
    double m = 0, v = 0;
    long t = 0;
    double step(double& theta, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
        t += 1;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        theta -= lr * mhat / (std::sqrt(vhat) + eps);
        return theta;
    }
};

}  // namespace oracles
