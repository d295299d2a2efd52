#include "trajkit/augmentation.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

using namespace trajkit;

namespace {

Trajectory linear_trajectory(double step_x, double step_y, int frames, double start = 0.3) {
    Trajectory t;
    t.video_id = "v";
    t.person_id = "p";
    t.class_label = "theft";
    for (int f = 0; f < frames; ++f) {
        JointFrame jf;
        jf.frame_index = f;
        for (int j = 0; j < kJointCount; ++j) {
            jf.joints[static_cast<std::size_t>(2 * j)] = start + 0.001 * j + step_x * f;
            jf.joints[static_cast<std::size_t>(2 * j + 1)] = start + 0.001 * j + step_y * f;
        }
        t.frames.push_back(jf);
    }
    return t;
}

Trajectory random_trajectory(std::mt19937_64& rng, int frames) {
    std::uniform_real_distribution<double> u(0.2, 0.8);
    Trajectory t;
    t.video_id = "v";
    t.person_id = "p";
    t.class_label = "theft";
    for (int f = 0; f < frames; ++f) {
        JointFrame jf;
        jf.frame_index = f;
        for (auto& v : jf.joints) v = u(rng);
        t.frames.push_back(jf);
    }
    return t;
}

}  // namespace

TEST_CASE("compute_shift_deltas: linear, static and random trajectories", "[augmentation]") {
    const auto lin = linear_trajectory(0.02, 0.0, 10);
    const auto d = compute_shift_deltas(lin);
    for (int j = 0; j < kJointCount; ++j) {
        CHECK(d.delta[static_cast<std::size_t>(2 * j)] == Catch::Approx(0.02).margin(1e-12));
        CHECK(d.delta[static_cast<std::size_t>(2 * j + 1)] == 0.0);
    }

    const auto stat = linear_trajectory(0.0, 0.0, 8);
    for (double v : compute_shift_deltas(stat).delta) CHECK(v == 0.0);

    Trajectory single = linear_trajectory(0.0, 0.0, 1);
    CHECK_THROWS_AS(compute_shift_deltas(single), ValidationError);

    std::mt19937_64 rng(3);
    const auto rnd = random_trajectory(rng, 20);
    std::vector<std::array<double, 34>> frames;
    for (const auto& f : rnd.frames) frames.push_back(f.joints);
    const auto oracle = oracles::mean_abs_diff(frames);
    const auto mine = compute_shift_deltas(rnd);
    for (int c = 0; c < kCoordDims; ++c)
        REQUIRE(std::abs(mine.delta[static_cast<std::size_t>(c)] - oracle[static_cast<std::size_t>(c)]) < 1e-12);
}

TEST_CASE("shift_augment: rho=0 is a pure per-coordinate translation", "[augmentation]") {
    std::mt19937_64 rng(7);
    const auto t = random_trajectory(rng, 15);
    const auto d = compute_shift_deltas(t);
    for (int direction : {+1, -1}) {
        const auto shifted = shift_augment(t, d, direction, 0.0, 99);
        for (std::size_t f = 0; f < t.frames.size(); ++f)
            for (int c = 0; c < kCoordDims; ++c) {
                const double moved = shifted.frames[f].joints[static_cast<std::size_t>(c)] -
                                     t.frames[f].joints[static_cast<std::size_t>(c)];
                // interior coordinates: no clamping, so the offset is exact
                const double target = direction * d.delta[static_cast<std::size_t>(c)];
                const double unclamped = t.frames[f].joints[static_cast<std::size_t>(c)] + target;
                if (unclamped >= 0.0 && unclamped <= 1.0)
                    REQUIRE(std::abs(moved - target) < 1e-12);
            }
    }
}

TEST_CASE("shift_augment: zero deltas give the identity", "[augmentation]") {
    const auto t = linear_trajectory(0.0, 0.0, 9);
    const auto d = compute_shift_deltas(t);
    const auto out = shift_augment(t, d, 1, 0.5, 3);
    for (std::size_t f = 0; f < t.frames.size(); ++f) REQUIRE(out.frames[f].joints == t.frames[f].joints);
}

TEST_CASE("shift_augment: multiplicative randomness stays in [0.9d, 1.1d]", "[augmentation]") {
    const auto t = linear_trajectory(0.004, 0.002, 20, 0.4);
    const auto d = compute_shift_deltas(t);
    const auto out = shift_augment(t, d, 1, 0.1, 42);
    for (int c = 0; c < kCoordDims; ++c) {
        const double offset =
            out.frames[0].joints[static_cast<std::size_t>(c)] - t.frames[0].joints[static_cast<std::size_t>(c)];
        const double dc = d.delta[static_cast<std::size_t>(c)];
        if (dc == 0.0) {
            CHECK(offset == 0.0);
            continue;
        }
        CHECK(offset >= 0.9 * dc - 1e-12);
        CHECK(offset <= 1.1 * dc + 1e-12);
        // constant across frames
        for (std::size_t f = 1; f < t.frames.size(); ++f) {
            const double o2 = out.frames[f].joints[static_cast<std::size_t>(c)] -
                              t.frames[f].joints[static_cast<std::size_t>(c)];
            REQUIRE(std::abs(o2 - offset) < 1e-12);
        }
    }
    // bit-identical under the same seed
    const auto again = shift_augment(t, d, 1, 0.1, 42);
    for (std::size_t f = 0; f < out.frames.size(); ++f) REQUIRE(out.frames[f].joints == again.frames[f].joints);
}

TEST_CASE("shift with equal deltas moves the center and keeps locals", "[augmentation]") {
    // every coordinate moves by the same per-frame step, so all 34 deltas agree
    const auto t = linear_trajectory(0.003, 0.003, 14, 0.35);
    const auto d = compute_shift_deltas(t);
    for (int c = 1; c < kCoordDims; ++c)
        REQUIRE(std::abs(d.delta[static_cast<std::size_t>(c)] - d.delta[0]) < 1e-12);
    const auto shifted = shift_augment(t, d, 1, 0.0, 5);
    const auto segs_orig = segment_trajectory(t);
    const auto segs_shift = segment_trajectory(shifted);
    REQUIRE(!segs_orig.empty());
    for (std::size_t s = 0; s < segs_orig.size(); ++s) {
        CHECK((segs_orig[s].local - segs_shift[s].local).cwiseAbs().maxCoeff() < 1e-9);
        const Mat center_delta = segs_shift[s].global.leftCols(2) - segs_orig[s].global.leftCols(2);
        for (Eigen::Index r = 0; r < center_delta.rows(); ++r) {
            CHECK(center_delta(r, 0) == Catch::Approx(d.delta[0]).margin(1e-9));
            CHECK(center_delta(r, 1) == Catch::Approx(d.delta[0]).margin(1e-9));
        }
        // box size unchanged
        CHECK((segs_shift[s].global.rightCols(2) - segs_orig[s].global.rightCols(2)).cwiseAbs().maxCoeff() <
              1e-9);
    }
}

namespace {

std::map<std::string, std::vector<Vec>> random_classes(std::mt19937_64& rng,
                                                       const std::map<std::string, int>& sizes, int dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::map<std::string, std::vector<Vec>> out;
    for (const auto& [cls, n] : sizes) {
        for (int i = 0; i < n; ++i) {
            Vec v(dim);
            for (Eigen::Index k = 0; k < dim; ++k) v(k) = u(rng);
            out[cls].push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("smote: counts reach the majority, originals retained", "[augmentation]") {
    std::mt19937_64 rng(13);
    auto data = random_classes(rng, {{"A", 10}, {"B", 4}}, 8);
    const auto original_b = data["B"];
    const auto out = smote_oversample(data, 3, 7);
    CHECK(out.at("A").size() == 10);
    CHECK(out.at("B").size() == 10);
    for (std::size_t i = 0; i < original_b.size(); ++i)
        REQUIRE((out.at("B")[i] - original_b[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("smote: two-point class interpolates on the segment", "[augmentation]") {
    std::mt19937_64 rng(1);
    std::map<std::string, std::vector<Vec>> data = random_classes(rng, {{"big", 9}}, 3);
    Vec a(3), b(3);
    a << 0.0, 0.0, 0.0;
    b << 1.0, 2.0, 3.0;
    data["tiny"] = {a, b};
    const auto out = smote_oversample(data, 1, 3);
    REQUIRE(out.at("tiny").size() == 9);
    for (std::size_t i = 2; i < out.at("tiny").size(); ++i) {
        const Vec& p = out.at("tiny")[i];
        const double lambda = p(0) / 1.0;  // p = a + l*(b-a) or b + l*(a-b)
        const double mu = 1.0 - lambda;
        const bool on_ab = std::abs(p(1) - 2.0 * lambda) < 1e-9 && std::abs(p(2) - 3.0 * lambda) < 1e-9 &&
                           lambda >= -1e-9 && lambda <= 1.0 + 1e-9;
        const bool on_ba = std::abs(p(1) - 2.0 * mu) < 1e-9 && std::abs(p(2) - 3.0 * mu) < 1e-9;
        REQUIRE((on_ab || on_ba));
    }
}

TEST_CASE("smote: synthetic points decompose against brute-force neighbour lists", "[augmentation]") {
    std::mt19937_64 rng(29);
    auto data = random_classes(rng, {{"maj", 40}, {"min", 12}}, 6);
    const int k = 5;
    const auto nn = oracles::knn_bruteforce(data["min"], k);
    const auto out = smote_oversample(data, k, 17);
    const auto& originals = data["min"];
    REQUIRE(out.at("min").size() == 40);
    for (std::size_t i = originals.size(); i < out.at("min").size(); ++i) {
        const Vec& p = out.at("min")[i];
        bool explained = false;
        for (std::size_t x = 0; x < originals.size() && !explained; ++x) {
            for (auto nidx : nn[x]) {
                const Vec diff = originals[nidx] - originals[x];
                const double denom = diff.squaredNorm();
                if (denom == 0.0) continue;
                const double lambda = (p - originals[x]).dot(diff) / denom;
                if (lambda < -1e-9 || lambda > 1.0 + 1e-9) continue;
                if ((originals[x] + lambda * diff - p).cwiseAbs().maxCoeff() < 1e-9) {
                    explained = true;
                    break;
                }
            }
        }
        REQUIRE(explained);
    }
    // convex-combination consequence: inside the class bounding box
    Vec lo = originals[0], hi = originals[0];
    for (const auto& v : originals) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    for (const auto& p : out.at("min")) {
        CHECK((p - lo).minCoeff() >= -1e-9);
        CHECK((hi - p).minCoeff() >= -1e-9);
    }
}

TEST_CASE("smote: errors and determinism", "[augmentation]") {
    std::mt19937_64 rng(31);
    auto bad = random_classes(rng, {{"big", 5}}, 4);
    bad["lonely"] = {Vec::Zero(4)};
    CHECK_THROWS_WITH(smote_oversample(bad, 5, 1), Catch::Matchers::ContainsSubstring("lonely"));

    auto data = random_classes(rng, {{"A", 20}, {"B", 6}}, 5);
    const auto a = smote_oversample(data, 50, 3);  // k clipped to 5 with a warning
    const auto b = smote_oversample(data, 50, 3);
    REQUIRE(a.at("B").size() == b.at("B").size());
    for (std::size_t i = 0; i < a.at("B").size(); ++i)
        REQUIRE((a.at("B")[i] - b.at("B")[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(smote_oversample(data, 0, 3), ValidationError);
}

TEST_CASE("shift_oversample grows a class to the target count", "[augmentation]") {
    std::vector<Trajectory> originals;
    for (int i = 0; i < 3; ++i) {
        auto t = linear_trajectory(0.002 + 0.001 * i, 0.001, 24);
        t.video_id = "v" + std::to_string(i);
        originals.push_back(std::move(t));
    }
    const auto generated = shift_oversample(originals, 8, 0.1, 5);
    CHECK(generated.size() == 5);
    std::set<std::string> ids;
    for (const auto& g : generated) {
        CHECK(ids.insert(g.video_id).second);
        CHECK(g.video_id.find("_aug") != std::string::npos);
        CHECK(g.frames.size() == originals[0].frames.size());
    }
    CHECK(shift_oversample(originals, 3, 0.1, 5).empty());
    CHECK(shift_oversample(originals, 2, 0.1, 5).empty());
}

TEST_CASE("segment flatten round trip", "[augmentation]") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat m(kSegmentLen, kCoordDims);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    const Vec v = flatten_segment(m);
    REQUIRE(v.size() == 408);
    CHECK((unflatten_segment(v) - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_plan targets the majority class", "[augmentation]") {
    const auto plan = make_plan({{"a", 10}, {"b", 25}, {"c", 3}}, AugmentMethod::shift, 7);
    CHECK(plan.target_counts.at("a") == 25);
    CHECK(plan.target_counts.at("b") == 25);
    CHECK(plan.target_counts.at("c") == 25);
}
