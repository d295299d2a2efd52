// Multiclass evaluation: confusion matrices, macro/weighted metrics, top-k
// accuracy, index of balanced accuracy, and the model-comparison statistics
// (Shapiro-Wilk routing to a paired t-test or a Wilcoxon signed-rank test).
#pragma once

#include "trajkit/common.hpp"

#include <array>
#include <optional>

namespace trajkit {

using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct ConfusionMatrix {
    std::vector<std::string> classes;
    IMat counts;  // row = true class, column = predicted

    std::int64_t total() const { return counts.sum(); }

    Mat row_normalized() const {
        Mat out = Mat::Zero(counts.rows(), counts.cols());
        for (Eigen::Index r = 0; r < counts.rows(); ++r) {
            const double row_sum = static_cast<double>(counts.row(r).sum());
            if (row_sum > 0)
                for (Eigen::Index c = 0; c < counts.cols(); ++c)
                    out(r, c) = static_cast<double>(counts(r, c)) / row_sum;
        }
        return out;
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& true_labels, const std::vector<int>& pred_labels,
                                 const std::vector<std::string>& classes) {
    if (true_labels.size() != pred_labels.size()) throw ValidationError("confusion: label list size mismatch");
    const auto C = static_cast<int>(classes.size());
    ConfusionMatrix cm;
    cm.classes = classes;
    cm.counts = IMat::Zero(C, C);
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i], p = pred_labels[i];
        if (t < 0 || t >= C || p < 0 || p >= C)
            throw ValidationError("confusion: label outside class list at sample " + std::to_string(i));
        cm.counts(t, p) += 1;
    }
    return cm;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Per-sample probability rows with their true labels; needed for top-k.
struct SampleProbs {
    std::vector<Vec> probabilities;
    std::vector<int> true_labels;
};

struct MetricsReport {
    double overall_accuracy = 0.0;   // trace / total
    double macro_accuracy = 0.0;     // unweighted mean per-class recall (classes with support)
    double weighted_accuracy = 0.0;  // support-weighted recall; equals overall by identity
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    std::optional<double> top3;
    std::optional<double> top5;
    double iba = 0.0;  // support-weighted index of balanced accuracy, alpha = 0.1
    std::vector<double> per_class_recall;
    std::int64_t total = 0;
};

/// Fraction of samples whose true class is among the k largest probabilities;
/// ties resolved toward the smaller class index.
inline double topk_accuracy(const std::vector<Vec>& probabilities, const std::vector<int>& true_labels, int k) {
    if (probabilities.size() != true_labels.size()) throw ValidationError("topk_accuracy: size mismatch");
    if (probabilities.empty()) throw ValidationError("topk_accuracy: empty input");
    const auto C = probabilities.front().size();
    if (k < 1 || k > C) throw ValidationError("topk_accuracy: k must be in [1, C]");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const Vec& p = probabilities[i];
        if (p.size() != C) throw ValidationError("topk_accuracy: inconsistent class count");
        const int t = true_labels[i];
        if (t < 0 || t >= C) throw ValidationError("topk_accuracy: label out of range");
        int rank = 0;  // classes ranked strictly ahead of the true class
        for (Eigen::Index j = 0; j < C; ++j) {
            if (j == t) continue;
            if (p(j) > p(t) || (p(j) == p(t) && j < t)) ++rank;
        }
        if (rank < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(probabilities.size());
}

/// Per-class IBA = (1 + 0.1*(recall - specificity)) * recall * specificity,
/// one-vs-rest specificity, support-weighted across classes.
inline MetricsReport metrics(const ConfusionMatrix& cm, const SampleProbs* probs = nullptr) {
    const auto C = cm.counts.rows();
    const double total = static_cast<double>(cm.total());
    if (total <= 0) throw ValidationError("metrics: empty confusion matrix");

    MetricsReport rep;
    rep.total = cm.total();
    rep.overall_accuracy = static_cast<double>(cm.counts.trace()) / total;

    double macro_sum = 0.0;
    int macro_classes = 0;
    double w_recall = 0.0, w_precision = 0.0, w_f1 = 0.0, w_iba = 0.0;
    rep.per_class_recall.assign(static_cast<std::size_t>(C), 0.0);
    for (Eigen::Index c = 0; c < C; ++c) {
        const double tp = static_cast<double>(cm.counts(c, c));
        const double support = static_cast<double>(cm.counts.row(c).sum());
        const double predicted = static_cast<double>(cm.counts.col(c).sum());
        const double recall = support > 0 ? tp / support : 0.0;
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double f1 = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        const double fp = predicted - tp;
        const double tn = total - support - fp;
        const double specificity = (tn + fp) > 0 ? tn / (tn + fp) : 0.0;
        const double iba = (1.0 + 0.1 * (recall - specificity)) * recall * specificity;
        rep.per_class_recall[static_cast<std::size_t>(c)] = recall;
        if (support > 0) {
            macro_sum += recall;
            ++macro_classes;
        }
        const double w = support / total;
        w_recall += w * recall;
        w_precision += w * precision;
        w_f1 += w * f1;
        w_iba += w * iba;
    }
    rep.macro_accuracy = macro_classes > 0 ? macro_sum / macro_classes : 0.0;
    rep.weighted_recall = w_recall;
    rep.weighted_accuracy = w_recall;
    rep.weighted_precision = w_precision;
    rep.weighted_f1 = w_f1;
    rep.iba = w_iba;

    if (probs) {
        if (probs->probabilities.size() != static_cast<std::size_t>(rep.total))
            throw ValidationError("metrics: probability list size does not match confusion total");
        const int c_int = static_cast<int>(C);
        rep.top3 = topk_accuracy(probs->probabilities, probs->true_labels, std::min(3, c_int));
        rep.top5 = topk_accuracy(probs->probabilities, probs->true_labels, std::min(5, c_int));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Normal distribution helpers
// ---------------------------------------------------------------------------

namespace detail {

/// Upper-tail standard normal probability.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Inverse standard normal CDF (Wichura's PPND16, AS 241). |error| < 1e-15.
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("inverse_normal_cdf: p must be in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                 4.5921953931549871457e4) * r + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                 2.1213794301586595867e4) * r + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                 1.27045825245236838258e0) * r + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                 7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return (q < 0.0) ? -val : val;
}

/// Regularized incomplete beta via Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

inline double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - lbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

/// Two-sided p of a Student-t value with nu degrees of freedom.
inline double student_t_two_sided(double t, double nu) {
    return reg_inc_beta(nu / 2.0, 0.5, nu / (nu + t * t));
}

inline double poly(const double* c, int n, double x) {
    double v = 0.0;
    for (int i = n - 1; i >= 0; --i) v = v * x + c[i];
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shapiro-Wilk (Royston 1995 / AS R94 approximation), 3 <= n <= 5000
// ---------------------------------------------------------------------------

struct ShapiroResult {
    double w = 0.0;
    double p = 0.0;
};

inline ShapiroResult shapiro_wilk(std::vector<double> sample) {
    const auto n = sample.size();
    if (n < 3) throw ValidationError("shapiro_wilk: need at least 3 observations");
    if (n > 5000) throw ValidationError("shapiro_wilk: n > 5000 not supported");
    std::sort(sample.begin(), sample.end());
    const double range = sample.back() - sample.front();
    if (range <= 0.0) throw ValidationError("shapiro_wilk: zero-variance sample, test undefined");

    static constexpr double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static constexpr double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static constexpr double c3[4] = {0.544, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static constexpr double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[3] = {-0.4803, -0.082676, 0.0030302};
    static constexpr double g[2] = {-2.273, 0.459};
    constexpr double pi6 = 1.90985931710274;   // 6/pi
    constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))

    const double an = static_cast<double>(n);
    const std::size_t n2 = n / 2;
    std::vector<double> a(n2 + 1, 0.0);  // 1-based, lower-half coefficients

    if (n == 3) {
        a[1] = std::sqrt(0.5);
    } else {
        const double an25 = an + 0.25;
        double summ2 = 0.0;
        for (std::size_t i = 1; i <= n2; ++i) {
            a[i] = detail::inverse_normal_cdf((static_cast<double>(i) - 0.375) / an25);
            summ2 += a[i] * a[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = detail::poly(c1, 6, rsn) - a[1] / ssumm2;
        std::size_t i1;
        double fac;
        if (n > 5) {
            i1 = 3;
            const double a2 = -a[2] / ssumm2 + detail::poly(c2, 6, rsn);
            fac = std::sqrt((summ2 - 2.0 * a[1] * a[1] - 2.0 * a[2] * a[2]) /
                            (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[2] = a2;
        } else {
            i1 = 2;
            fac = std::sqrt((summ2 - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1));
        }
        a[1] = a1;
        for (std::size_t i = i1; i <= n2; ++i) a[i] = -a[i] / fac;
    }

    // Full coefficient vector is antisymmetric: c_i = -a[i] for the lower half,
    // +a[n+1-i] for the upper half. W is the squared correlation between the
    // scaled sample and the coefficients.
    auto coeff = [&](std::size_t i, std::size_t j) {
        // i is the 1-based position, j = n + 1 - i its mirror
        if (i == j) return 0.0;
        return (i < j) ? -a[i] : a[j];
    };
    double sx = 0.0, sa = 0.0;
    {
        std::size_t j = n;
        for (std::size_t i = 1; i <= n; ++i, --j) {
            sx += sample[i - 1] / range;
            sa += coeff(i, j);
        }
    }
    sa /= static_cast<double>(n);
    sx /= static_cast<double>(n);
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    {
        std::size_t j = n;
        for (std::size_t i = 1; i <= n; ++i, --j) {
            const double asa = coeff(i, j) - sa;
            const double xsx = sample[i - 1] / range - sx;
            ssa += asa * asa;
            ssx += xsx * xsx;
            sax += asa * xsx;
        }
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    ShapiroResult res;
    res.w = 1.0 - w1;

    if (n == 3) {
        res.p = std::clamp(pi6 * (std::asin(std::sqrt(res.w)) - stqr), 0.0, 1.0);
        return res;
    }
    const double y = std::log(w1);
    double m, s;
    if (n <= 11) {
        const double gamma = detail::poly(g, 2, an);
        if (y >= gamma) {
            res.p = 1e-19;
            return res;
        }
        const double y2 = -std::log(gamma - y);
        m = detail::poly(c3, 4, an);
        s = std::exp(detail::poly(c4, 4, an));
        res.p = detail::normal_sf((y2 - m) / s);
    } else {
        const double lx = std::log(an);
        m = detail::poly(c5, 4, lx);
        s = std::exp(detail::poly(c6, 3, lx));
        res.p = detail::normal_sf((y - m) / s);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Paired two-sided t-test
// ---------------------------------------------------------------------------

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    bool degenerate = false;  // constant non-zero differences: t = +/-inf, p = 0
};

inline TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("paired_ttest: unequal lengths");
    const auto n = a.size();
    if (n < 2) throw ValidationError("paired_ttest: need at least 2 pairs");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const bool all_zero = std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; });
    if (all_zero) throw ValidationError("paired_ttest: identical results (all differences zero)");
    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);
    TTestResult res;
    if (var == 0.0) {
        // Fold accuracies can legitimately tie; constant non-zero differences
        // get the limiting convention rather than an error.
        res.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        res.p = 0.0;
        res.degenerate = true;
        return res;
    }
    res.t = mean / std::sqrt(var / static_cast<double>(n));
    res.p = detail::student_t_two_sided(res.t, static_cast<double>(n - 1));
    return res;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

struct WilcoxonResult {
    double statistic = 0.0;  // W+ (sum of ranks of positive differences)
    double p = 1.0;
    bool exact = false;  // exact enumeration for m <= 15, else normal approximation
};

inline WilcoxonResult wilcoxon(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("wilcoxon: unequal lengths");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = a[i] - b[i];
        if (v != 0.0) d.push_back(v);  // zero differences dropped
    }
    if (d.empty()) throw ValidationError("wilcoxon: all differences zero");
    const auto m = d.size();

    // Average ranks of |d|, scaled by 2 so ties keep integer arithmetic.
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
    std::vector<std::int64_t> rank2(m, 0);
    std::vector<std::size_t> tie_sizes;
    for (std::size_t s = 0; s < m;) {
        std::size_t e = s;
        while (e + 1 < m && std::abs(d[idx[e + 1]]) == std::abs(d[idx[s]])) ++e;
        const std::int64_t sum2 = static_cast<std::int64_t>(s + 1 + e + 1);  // 2 * average rank
        for (std::size_t q = s; q <= e; ++q) rank2[idx[q]] = sum2;
        tie_sizes.push_back(e - s + 1);
        s = e + 1;
    }

    std::int64_t w_plus2 = 0, total2 = 0;
    for (std::size_t i = 0; i < m; ++i) {
        total2 += rank2[i];
        if (d[i] > 0) w_plus2 += rank2[i];
    }

    WilcoxonResult res;
    res.statistic = static_cast<double>(w_plus2) / 2.0;

    if (m <= 15) {
        // Exact two-sided p over all 2^m sign patterns of the observed ranks.
        res.exact = true;
        const std::int64_t lo = std::min(w_plus2, total2 - w_plus2);
        const std::int64_t hi = total2 - lo;
        std::uint64_t extreme = 0;
        const std::uint64_t patterns = 1ULL << m;
        for (std::uint64_t mask = 0; mask < patterns; ++mask) {
            std::int64_t t2 = 0;
            for (std::size_t i = 0; i < m; ++i)
                if (mask & (1ULL << i)) t2 += rank2[i];
            if (t2 <= lo || t2 >= hi) ++extreme;
        }
        res.p = std::min(1.0, static_cast<double>(extreme) / static_cast<double>(patterns));
    } else {
        const double md = static_cast<double>(m);
        const double mean = md * (md + 1.0) / 4.0;
        double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0;
        for (std::size_t t : tie_sizes) {
            const double td = static_cast<double>(t);
            var -= (td * td * td - td) / 48.0;
        }
        if (var <= 0.0) throw ValidationError("wilcoxon: degenerate variance (all |d| tied?)");
        const double z = (static_cast<double>(w_plus2) / 2.0 - mean) / std::sqrt(var);
        res.p = std::min(1.0, 2.0 * detail::normal_sf(std::abs(z)));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Model comparison (Shapiro-Wilk routing)
// ---------------------------------------------------------------------------

enum class ChosenTest { paired_t, wilcoxon };

inline const char* to_string(ChosenTest t) { return t == ChosenTest::paired_t ? "paired-t" : "wilcoxon"; }

struct ComparisonResult {
    std::string model_a, model_b;
    double normality_p = 0.0;
    ChosenTest chosen = ChosenTest::paired_t;
    double statistic = 0.0;
    double test_p = 1.0;
    double alpha = 0.05;
    bool reject_null = false;  // null: the two models' fold results share a distribution
};

/// Shapiro-Wilk on the paired differences; normality p > alpha routes to the
/// paired t-test, otherwise to the Wilcoxon signed-rank test.
inline ComparisonResult compare_models(const std::string& name_a, const std::string& name_b,
                                       const std::vector<double>& acc_a, const std::vector<double>& acc_b,
                                       double alpha = 0.05) {
    if (acc_a.size() != acc_b.size()) throw ValidationError("compare_models: fold vectors of unequal length");
    ComparisonResult res;
    res.model_a = name_a;
    res.model_b = name_b;
    res.alpha = alpha;
    std::vector<double> diff(acc_a.size());
    for (std::size_t i = 0; i < acc_a.size(); ++i) diff[i] = acc_a[i] - acc_b[i];
    try {
        res.normality_p = shapiro_wilk(diff).p;
    } catch (const ValidationError& e) {
        throw ValidationError("compare_models(" + name_a + " vs " + name_b + "): " + e.what());
    }
    try {
        if (res.normality_p > alpha) {
            res.chosen = ChosenTest::paired_t;
            const auto t = paired_ttest(acc_a, acc_b);
            res.statistic = t.t;
            res.test_p = t.p;
        } else {
            res.chosen = ChosenTest::wilcoxon;
            const auto w = wilcoxon(acc_a, acc_b);
            res.statistic = w.statistic;
            res.test_p = w.p;
        }
    } catch (const ValidationError& e) {
        throw ValidationError("compare_models(" + name_a + " vs " + name_b + "): " + e.what());
    }
    res.reject_null = res.test_p < alpha;
    return res;
}

// ---------------------------------------------------------------------------
// Confusion matrix artifacts: CSV and a row-normalized SVG heatmap
// ---------------------------------------------------------------------------

inline void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path,
                                const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_confusion_csv: cannot write " + path);
    for (const auto& c : metadata) out << "# " << c << '\n';
    out << "true\\pred";
    for (const auto& c : cm.classes) out << ',' << c;
    out << '\n';
    for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
        out << cm.classes[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) out << ',' << cm.counts(r, c);
        out << '\n';
    }
}

/// Deterministic byte-for-byte: cell fill encodes the row-normalized value v
/// as rgb(round(255*(1-v)), round(255*(1-0.6*v)), 255).
inline std::string confusion_svg(const ConfusionMatrix& cm) {
    const auto C = cm.counts.rows();
    const int cell = 40, margin = 110;
    const int size = margin + static_cast<int>(C) * cell + 10;
    const Mat norm = cm.row_normalized();
    std::string svg;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n", size, size);
    svg += buf;
    svg += "<style>text{font-family:monospace;font-size:11px;}</style>\n";
    for (Eigen::Index r = 0; r < C; ++r) {
        for (Eigen::Index c = 0; c < C; ++c) {
            const double v = norm(r, c);
            const int red = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            const int green = static_cast<int>(std::lround(255.0 * (1.0 - 0.6 * v)));
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,255)\"/>\n",
                          margin + static_cast<int>(c) * cell, margin + static_cast<int>(r) * cell, cell, cell,
                          red, green);
            svg += buf;
            std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\">%.2f</text>\n",
                          margin + static_cast<int>(c) * cell + 4,
                          margin + static_cast<int>(r) * cell + cell / 2 + 4, v);
            svg += buf;
        }
    }
    for (Eigen::Index i = 0; i < C; ++i) {
        // row labels (true class) and column labels (predicted, rotated)
        std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%d\">%s</text>\n",
                      margin + static_cast<int>(i) * cell + cell / 2 + 4,
                      cm.classes[static_cast<std::size_t>(i)].c_str());
        svg += buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%d\" transform=\"rotate(-60 %d %d)\">%s</text>\n",
                      margin + static_cast<int>(i) * cell + cell / 2, margin - 6,
                      margin + static_cast<int>(i) * cell + cell / 2, margin - 6,
                      cm.classes[static_cast<std::size_t>(i)].c_str());
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_confusion_svg(const ConfusionMatrix& cm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_confusion_svg: cannot write " + path);
    out << confusion_svg(cm);
}

}  // namespace trajkit
