// Class-balancing augmenters: whole-trajectory coordinate shifting driven by
// per-joint average movement, and SMOTE oversampling of flattened segments.
#pragma once

#include "trajkit/trajectory.hpp"

#include <map>

namespace trajkit {

/// Per-joint, per-axis shift magnitudes for one trajectory.
struct ShiftDeltas {
    std::array<double, kCoordDims> delta{};
};

enum class AugmentMethod { shift, smote };

inline const char* to_string(AugmentMethod m) { return m == AugmentMethod::shift ? "shift" : "smote"; }

struct AugmentationPlan {
    std::map<std::string, std::size_t> target_counts;  // per class
    AugmentMethod method = AugmentMethod::shift;
    std::uint64_t seed = 0;
    double rho = 0.1;  // shift randomness amplitude
    int k = 5;         // smote neighbour count
};

/// Targets every class at the majority count.
inline AugmentationPlan make_plan(const std::map<std::string, std::size_t>& counts, AugmentMethod method,
                                  std::uint64_t seed) {
    AugmentationPlan plan;
    plan.method = method;
    plan.seed = seed;
    std::size_t majority = 0;
    for (const auto& [cls, n] : counts) majority = std::max(majority, n);
    for (const auto& [cls, n] : counts) plan.target_counts[cls] = majority;
    return plan;
}

// ---------------------------------------------------------------------------
// Coordinate shift
// ---------------------------------------------------------------------------

/// delta_c = mean over consecutive frame pairs of |c_{f+1} - c_f|. The absolute
/// value keeps oscillating joints from telescoping to zero; static joints get
/// exactly zero.
inline ShiftDeltas compute_shift_deltas(const Trajectory& t) {
    if (t.frames.size() < 2) throw ValidationError("compute_shift_deltas: trajectory has fewer than 2 frames");
    ShiftDeltas d;
    for (std::size_t f = 1; f < t.frames.size(); ++f)
        for (int c = 0; c < kCoordDims; ++c)
            d.delta[static_cast<std::size_t>(c)] +=
                std::abs(t.frames[f].joints[static_cast<std::size_t>(c)] -
                         t.frames[f - 1].joints[static_cast<std::size_t>(c)]);
    const double pairs = static_cast<double>(t.frames.size() - 1);
    for (auto& v : d.delta) v /= pairs;
    return d;
}

/// One shifted copy: coordinate c moves by direction * (delta_c + u*rho*delta_c)
/// with u ~ U[-1,1] drawn once per coordinate (constant across frames), then
/// clamped to [0,1]. Randomness is multiplicative on delta so static joints
/// stay static.
inline Trajectory shift_augment(const Trajectory& t, const ShiftDeltas& deltas, int direction, double rho,
                                std::uint64_t seed) {
    if (direction != 1 && direction != -1) throw ValidationError("shift_augment: direction must be +1 or -1");
    if (rho < 0.0) throw ValidationError("shift_augment: rho must be non-negative");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::array<double, kCoordDims> offset{};
    for (int c = 0; c < kCoordDims; ++c) {
        const double d = deltas.delta[static_cast<std::size_t>(c)];
        offset[static_cast<std::size_t>(c)] = direction * (d + unit(rng) * rho * d);
    }
    Trajectory out = t;
    for (auto& f : out.frames)
        for (int c = 0; c < kCoordDims; ++c)
            f.joints[static_cast<std::size_t>(c)] =
                std::clamp(f.joints[static_cast<std::size_t>(c)] + offset[static_cast<std::size_t>(c)], 0.0, 1.0);
    return out;
}

/// Grows one class to target_count by shifted copies of round-robin base
/// trajectories, alternating direction. Returns only the generated trajectories,
/// renamed "<video_id>_aug<i>".
inline std::vector<Trajectory> shift_oversample(const std::vector<Trajectory>& originals,
                                                std::size_t target_count, double rho, std::uint64_t seed) {
    if (originals.empty()) throw ValidationError("shift_oversample: empty class");
    std::vector<Trajectory> out;
    if (target_count <= originals.size()) return out;
    std::vector<ShiftDeltas> deltas;
    deltas.reserve(originals.size());
    for (const auto& t : originals) deltas.push_back(compute_shift_deltas(t));
    const std::size_t n_new = target_count - originals.size();
    for (std::size_t i = 0; i < n_new; ++i) {
        const std::size_t base = i % originals.size();
        const int direction = (i / originals.size()) % 2 == 0 ? 1 : -1;
        Trajectory aug = shift_augment(originals[base], deltas[base], direction, rho,
                                       seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
        aug.video_id += "_aug" + std::to_string(i);
        out.push_back(std::move(aug));
    }
    return out;
}

// ---------------------------------------------------------------------------
// SMOTE
// ---------------------------------------------------------------------------

/// Brings every class up to the majority count. Each synthetic point is
/// x + lambda*(nn - x) with lambda ~ U[0,1] and nn one of x's k nearest
/// same-class neighbours (Euclidean, ties by index). Originals are retained
/// unchanged and come first in the output.
inline std::map<std::string, std::vector<Vec>> smote_oversample(
    const std::map<std::string, std::vector<Vec>>& segments_by_class, int k = 5, std::uint64_t seed = 0) {
    if (k < 1) throw ValidationError("smote_oversample: k must be >= 1");
    std::size_t majority = 0;
    for (const auto& [cls, v] : segments_by_class) majority = std::max(majority, v.size());

    std::map<std::string, std::vector<Vec>> out;
    for (const auto& [cls, samples] : segments_by_class) {
        out[cls] = samples;
        if (samples.size() >= majority) continue;
        if (samples.size() < 2)
            throw ValidationError("smote_oversample: class '" + cls + "' has fewer than 2 samples");
        int k_eff = k;
        if (static_cast<std::size_t>(k) > samples.size() - 1) {
            k_eff = static_cast<int>(samples.size()) - 1;
            log_warn("smote_oversample: k clipped to " + std::to_string(k_eff) + " for class '" + cls + "'");
        }

        // Brute-force neighbour lists, deterministic tie order.
        std::vector<std::vector<std::size_t>> nn(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::vector<std::pair<double, std::size_t>> dist;
            dist.reserve(samples.size() - 1);
            for (std::size_t j = 0; j < samples.size(); ++j) {
                if (j == i) continue;
                dist.emplace_back((samples[i] - samples[j]).squaredNorm(), j);
            }
            std::sort(dist.begin(), dist.end());
            nn[i].reserve(static_cast<std::size_t>(k_eff));
            for (int q = 0; q < k_eff; ++q) nn[i].push_back(dist[static_cast<std::size_t>(q)].second);
        }

        std::mt19937_64 rng(seed ^ hash_bytes(cls));
        std::uniform_real_distribution<double> lambda(0.0, 1.0);
        std::uniform_int_distribution<int> pick(0, k_eff - 1);
        const std::size_t n_new = majority - samples.size();
        for (std::size_t i = 0; i < n_new; ++i) {
            const std::size_t base = i % samples.size();
            const Vec& x = samples[base];
            const Vec& neighbour = samples[nn[base][static_cast<std::size_t>(pick(rng))]];
            const double l = lambda(rng);
            out[cls].push_back(x + l * (neighbour - x));
        }
    }
    return out;
}

/// Row-major flatten of a 12x34 segment into the 408-dim vector SMOTE consumes.
inline Vec flatten_segment(const Mat& m) {
    Vec v(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v(k++) = m(r, c);
    return v;
}

inline Mat unflatten_segment(const Vec& v, Eigen::Index rows = kSegmentLen, Eigen::Index cols = kCoordDims) {
    if (v.size() != rows * cols) throw ValidationError("unflatten_segment: size mismatch");
    Mat m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v(k++);
    return m;
}

}  // namespace trajkit
