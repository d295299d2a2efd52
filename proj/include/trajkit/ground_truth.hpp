// Trajectory-level ground truth: per-trajectory anomaly scores from
// reconstruction error, a 1-D two-component GMM fitted by EM, silhouette
// scoring, threshold selection, and the two-step relabeling that turns
// video-level classes into trajectory-level normal/abnormal labels.
#pragma once

#include "trajkit/backbone.hpp"

namespace trajkit {

/// Mean per-segment perceptual loss of one trajectory.
struct AnomalyScore {
    std::string video_id;
    std::string person_id;
    std::string class_label;  // video-level
    double alpha = 0.0;
    std::size_t segment_count = 0;
};

/// Mean squared error between a segment and its reconstruction.
inline double perceptual_loss(const Mat& original, const Mat& reconstruction) {
    if (original.rows() != reconstruction.rows() || original.cols() != reconstruction.cols())
        throw ValidationError("perceptual_loss: shape mismatch");
    if (!original.allFinite() || !reconstruction.allFinite())
        throw ValidationError("perceptual_loss: non-finite input");
    return (original - reconstruction).squaredNorm() / static_cast<double>(original.size());
}

/// alpha = arithmetic mean of per-segment perceptual losses over one trajectory.
inline AnomalyScore anomaly_score(const std::vector<Segment>& segments,
                                  const std::vector<Reconstruction>& reconstructions) {
    if (segments.empty()) throw ValidationError("anomaly_score: trajectory too short to score (no segments)");
    if (segments.size() != reconstructions.size())
        throw ValidationError("anomaly_score: segments/reconstructions size mismatch");
    AnomalyScore out;
    out.video_id = segments.front().ref.video_id;
    out.person_id = segments.front().ref.person_id;
    out.segment_count = segments.size();
    double total = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& ref = segments[i].ref;
        if (ref.video_id != out.video_id || ref.person_id != out.person_id)
            throw ValidationError("anomaly_score: segments from more than one trajectory");
        total += perceptual_loss(segments[i].raw, reconstructions[i].raw_hat);
    }
    out.alpha = total / static_cast<double>(segments.size());
    return out;
}

// ---------------------------------------------------------------------------
// 1-D two-component Gaussian mixture via EM
// ---------------------------------------------------------------------------

inline constexpr double kVarianceFloor = 1e-12;

struct GmmModel {
    std::array<double, 2> weight{0.5, 0.5};
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 2> variance{1.0, 1.0};
    std::vector<double> log_likelihood;  // one entry per EM iteration
    bool converged = false;
};

namespace detail {

inline double log_normal_pdf(double x, double mean, double var) {
    constexpr double log_2pi = 1.8378770664093454836;
    const double d = x - mean;
    return -0.5 * (log_2pi + std::log(var)) - d * d / (2.0 * var);
}

/// Responsibility of each component for one point, plus the point's log-likelihood.
inline std::pair<std::array<double, 2>, double> gmm_estep_point(const GmmModel& m, double x) {
    const double l0 = std::log(m.weight[0]) + log_normal_pdf(x, m.mean[0], m.variance[0]);
    const double l1 = std::log(m.weight[1]) + log_normal_pdf(x, m.mean[1], m.variance[1]);
    const double hi = std::max(l0, l1);
    const double lse = hi + std::log(std::exp(l0 - hi) + std::exp(l1 - hi));
    return {{std::exp(l0 - lse), std::exp(l1 - lse)}, lse};
}

}  // namespace detail

/// EM with K=2 on scalar scores. Initialization puts the means at the 25th and
/// 75th percentiles (min/max if those coincide) with equal weights and pooled
/// variance, so the fit is deterministic; the seed parameter is kept for
/// interface stability. Variance collapse is handled by flooring, never an error.
inline GmmModel fit_gmm(const std::vector<double>& scores, int max_iter = 100, double tol = 1e-3,
                        std::uint64_t seed = 0) {
    (void)seed;
    {
        std::vector<double> distinct = scores;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2) throw ValidationError("fit_gmm: need at least 2 distinct score values");
    }
    const auto n = static_cast<double>(scores.size());

    GmmModel m;
    m.mean[0] = percentile(scores, 0.25);
    m.mean[1] = percentile(scores, 0.75);
    if (m.mean[0] == m.mean[1]) {
        m.mean[0] = *std::min_element(scores.begin(), scores.end());
        m.mean[1] = *std::max_element(scores.begin(), scores.end());
    }
    double total_mean = 0.0;
    for (double x : scores) total_mean += x;
    total_mean /= n;
    double pooled = 0.0;
    for (double x : scores) pooled += (x - total_mean) * (x - total_mean);
    pooled = std::max(pooled / n, kVarianceFloor);
    m.variance = {pooled, pooled};

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        // E-step (also the log-likelihood of the current parameters)
        std::vector<std::array<double, 2>> resp(scores.size());
        double ll = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            auto [r, lse] = detail::gmm_estep_point(m, scores[i]);
            resp[i] = r;
            ll += lse;
        }
        m.log_likelihood.push_back(ll);
        if (iter > 0 && ll - prev_ll < tol) {
            m.converged = true;
            break;
        }
        prev_ll = ll;

        // M-step
        for (int k = 0; k < 2; ++k) {
            double nk = 0.0, sum = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                nk += resp[i][static_cast<std::size_t>(k)];
                sum += resp[i][static_cast<std::size_t>(k)] * scores[i];
            }
            if (nk < 1e-300) continue;  // component starved; keep previous parameters
            const double mu = sum / nk;
            double var = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i)
                var += resp[i][static_cast<std::size_t>(k)] * (scores[i] - mu) * (scores[i] - mu);
            m.mean[static_cast<std::size_t>(k)] = mu;
            m.variance[static_cast<std::size_t>(k)] = std::max(var / nk, kVarianceFloor);
            m.weight[static_cast<std::size_t>(k)] = std::clamp(nk / n, 1e-12, 1.0 - 1e-12);
        }
        const double wsum = m.weight[0] + m.weight[1];
        m.weight[0] /= wsum;
        m.weight[1] /= wsum;
    }
    return m;
}

/// Maximum-responsibility assignment; the lower-mean component is "normal".
inline std::vector<TrajLabel> assign_clusters(const GmmModel& m, const std::vector<double>& scores) {
    const std::size_t normal_comp = (m.mean[0] <= m.mean[1]) ? 0 : 1;
    std::vector<TrajLabel> out;
    out.reserve(scores.size());
    for (double x : scores) {
        const auto [r, lse] = detail::gmm_estep_point(m, x);
        (void)lse;
        out.push_back(r[normal_comp] >= r[1 - normal_comp] ? TrajLabel::normal : TrajLabel::abnormal);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Silhouette score (1-D, absolute-difference metric)
// ---------------------------------------------------------------------------

/// Mean over points of s(i) = (b - a) / max(a, b) with a = mean intra-cluster
/// distance (excluding self) and b = mean distance to the other cluster;
/// points in singleton clusters contribute 0. Computed with sorted prefix sums
/// (O(n log n)) rather than the O(n^2) pairwise sweep.
inline double silhouette(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ValidationError("silhouette: scores/labels size mismatch");
    if (scores.size() < 2) throw ValidationError("silhouette: need at least 2 points");
    std::vector<int> ids = labels;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() != 2) throw ValidationError("silhouette: need exactly 2 non-empty clusters, got " +
                                               std::to_string(ids.size()));

    std::array<std::vector<double>, 2> sorted;
    for (std::size_t i = 0; i < scores.size(); ++i)
        sorted[labels[i] == ids[0] ? 0 : 1].push_back(scores[i]);
    std::array<std::vector<double>, 2> prefix;
    for (int c = 0; c < 2; ++c) {
        auto& v = sorted[static_cast<std::size_t>(c)];
        std::sort(v.begin(), v.end());
        auto& p = prefix[static_cast<std::size_t>(c)];
        p.assign(v.size() + 1, 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) p[i + 1] = p[i] + v[i];
    }
    // Sum of |x - y| over cluster c via binary search on the sorted values.
    auto abs_dist_sum = [&](double x, int c) {
        const auto& v = sorted[static_cast<std::size_t>(c)];
        const auto& p = prefix[static_cast<std::size_t>(c)];
        const auto k = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x) - v.begin());
        const double below = x * static_cast<double>(k) - p[k];
        const double above = (p.back() - p[k]) - x * static_cast<double>(v.size() - k);
        return below + above;
    };

    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int own = labels[i] == ids[0] ? 0 : 1;
        const auto n_own = sorted[static_cast<std::size_t>(own)].size();
        if (n_own == 1) continue;  // singleton convention: s(i) = 0
        const double a = abs_dist_sum(scores[i], own) / static_cast<double>(n_own - 1);
        const double b =
            abs_dist_sum(scores[i], 1 - own) / static_cast<double>(sorted[static_cast<std::size_t>(1 - own)].size());
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------------------
// Supervised threshold selection
// ---------------------------------------------------------------------------

struct ThresholdChoice {
    double threshold = 0.0;
    double silhouette = -1.0;
};

/// Partitions scores at each candidate (<= threshold is normal, > abnormal),
/// scores the partition by silhouette, returns the argmax; ties break toward
/// the smaller threshold. Candidates that leave a side empty are skipped.
/// The paired video-level labels are accepted for interface completeness and
/// diagnostics; the silhouette is computed on the partition itself.
inline ThresholdChoice select_threshold(const std::vector<std::pair<double, TrajLabel>>& scores_with_labels,
                                        std::vector<double> candidates) {
    if (candidates.empty()) throw ValidationError("select_threshold: no candidates");
    if (scores_with_labels.size() < 2) throw ValidationError("select_threshold: need at least 2 scores");
    std::vector<double> scores;
    scores.reserve(scores_with_labels.size());
    for (const auto& [s, l] : scores_with_labels) scores.push_back(s);

    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    bool found = false;
    ThresholdChoice best;
    for (double c : candidates) {
        std::vector<int> part(scores.size());
        std::size_t n_low = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            part[i] = scores[i] <= c ? 0 : 1;
            n_low += static_cast<std::size_t>(part[i] == 0);
        }
        if (n_low == 0 || n_low == scores.size()) {
            log_warn("select_threshold: candidate " + std::to_string(c) + " leaves one side empty, skipped");
            continue;
        }
        const double sil = silhouette(scores, part);
        if (!found || sil > best.silhouette) {
            best = {c, sil};
            found = true;
        }
    }
    if (!found) throw ValidationError("select_threshold: no candidate splits the scores into two non-empty groups");
    return best;
}

/// Geometric candidate grid between the 1st and 99th percentile of positive
/// scores (linear grid when the low end is not positive).
inline std::vector<double> make_candidate_grid(const std::vector<double>& scores, int count = 50) {
    if (count < 1) throw ValidationError("make_candidate_grid: count must be positive");
    const double lo = percentile(scores, 0.01);
    const double hi = percentile(scores, 0.99);
    if (!(hi > lo)) throw ValidationError("make_candidate_grid: degenerate score range");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    if (lo > 0.0) {
        const double step = std::log(hi / lo) / std::max(1, count - 1);
        for (int i = 0; i < count; ++i) out.push_back(lo * std::exp(step * i));
    } else {
        const double step = (hi - lo) / std::max(1, count - 1);
        for (int i = 0; i < count; ++i) out.push_back(lo + step * i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Relabeling
// ---------------------------------------------------------------------------

enum class Disposition { keep, moved_to_normal, removed_outlier };
enum class LabelMethod { unsupervised, supervised };

inline const char* to_string(Disposition d) {
    switch (d) {
        case Disposition::keep: return "keep-as-crime-class";
        case Disposition::moved_to_normal: return "moved-to-normal";
        case Disposition::removed_outlier: return "removed-outlier";
    }
    return "?";
}

inline const char* to_string(LabelMethod m) {
    return m == LabelMethod::unsupervised ? "gmm" : "threshold";
}

struct TrajectoryRecord {
    std::string video_id;
    std::string person_id;
    std::string class_label;  // video-level
    double alpha = 0.0;
    TrajLabel cluster = TrajLabel::normal;
    Disposition disposition = Disposition::keep;
};

struct TrajectoryLabeling {
    std::vector<TrajectoryRecord> records;
    LabelMethod method = LabelMethod::unsupervised;
    std::optional<double> threshold;  // supervised only
    std::size_t kept = 0, moved = 0, removed = 0;

    /// Trajectory-level class after relabeling; nullopt when removed.
    static std::optional<std::string> effective_class(const TrajectoryRecord& r) {
        switch (r.disposition) {
            case Disposition::keep: return r.class_label;
            case Disposition::moved_to_normal: return std::string(kNormalLabel);
            case Disposition::removed_outlier: return std::nullopt;
        }
        return std::nullopt;
    }
};

/// Rule (a): a trajectory in a crime-labelled video assigned to the normal
/// cluster moves to the normal category. Rule (b): a trajectory in a normal
/// video assigned to the abnormal cluster is removed as an outlier.
inline TrajectoryLabeling relabel_trajectories(const std::vector<AnomalyScore>& scores,
                                               const std::vector<TrajLabel>& clusters, LabelMethod method,
                                               std::optional<double> threshold = std::nullopt) {
    if (scores.size() != clusters.size())
        throw ValidationError("relabel_trajectories: scores/clusters size mismatch");
    TrajectoryLabeling out;
    out.method = method;
    out.threshold = threshold;
    out.records.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        TrajectoryRecord r;
        r.video_id = scores[i].video_id;
        r.person_id = scores[i].person_id;
        r.class_label = scores[i].class_label;
        r.alpha = scores[i].alpha;
        r.cluster = clusters[i];
        const bool crime_video = r.class_label != kNormalLabel;
        if (crime_video && r.cluster == TrajLabel::normal) {
            r.disposition = Disposition::moved_to_normal;
            ++out.moved;
        } else if (!crime_video && r.cluster == TrajLabel::abnormal) {
            r.disposition = Disposition::removed_outlier;
            ++out.removed;
        } else {
            r.disposition = Disposition::keep;
            ++out.kept;
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Labeling CSV IO
// ---------------------------------------------------------------------------

inline void write_labeling(const TrajectoryLabeling& lab, const std::string& path,
                           const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_labeling: cannot write " + path);
    for (const auto& c : metadata) out << "# " << c << '\n';
    out << "video_id,person_id,class_label,alpha,cluster,disposition,method,threshold\n";
    for (const auto& r : lab.records) {
        out << r.video_id << ',' << r.person_id << ',' << r.class_label << ','
            << detail::format_double(r.alpha) << ',' << to_string(r.cluster) << ',' << to_string(r.disposition)
            << ',' << to_string(lab.method) << ',';
        if (lab.threshold) out << detail::format_double(*lab.threshold);
        out << '\n';
    }
}

inline TrajectoryLabeling read_labeling(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_labeling: cannot open " + path);
    TrajectoryLabeling lab;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        const auto f = detail::split_csv(line);
        const std::string context = "(" + path + ", line " + std::to_string(lineno) + ")";
        if (f.size() != 8) throw ValidationError("read_labeling: expected 8 columns " + context);
        TrajectoryRecord r;
        r.video_id = std::string(f[0]);
        r.person_id = std::string(f[1]);
        r.class_label = std::string(f[2]);
        r.alpha = detail::parse_double(f[3], context);
        if (f[4] == "normal")
            r.cluster = TrajLabel::normal;
        else if (f[4] == "abnormal")
            r.cluster = TrajLabel::abnormal;
        else
            throw ValidationError("read_labeling: bad cluster '" + std::string(f[4]) + "' " + context);
        if (f[5] == "keep-as-crime-class")
            r.disposition = Disposition::keep;
        else if (f[5] == "moved-to-normal")
            r.disposition = Disposition::moved_to_normal;
        else if (f[5] == "removed-outlier")
            r.disposition = Disposition::removed_outlier;
        else
            throw ValidationError("read_labeling: bad disposition '" + std::string(f[5]) + "' " + context);
        lab.method = (f[6] == "threshold") ? LabelMethod::supervised : LabelMethod::unsupervised;
        if (!f[7].empty()) lab.threshold = detail::parse_double(f[7], context);
        switch (r.disposition) {
            case Disposition::keep: ++lab.kept; break;
            case Disposition::moved_to_normal: ++lab.moved; break;
            case Disposition::removed_outlier: ++lab.removed; break;
        }
        lab.records.push_back(std::move(r));
    }
    return lab;
}

}  // namespace trajkit
