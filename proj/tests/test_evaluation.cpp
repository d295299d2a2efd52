#include "trajkit/evaluation.hpp"

#include "oracles.hpp"
#include "stats_reference.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <numeric>
#include <random>

using namespace trajkit;

TEST_CASE("confusion: examples and counting oracle", "[evaluation]") {
    {
        const auto cm = confusion({0, 0, 1}, {0, 1, 1}, {"a", "b"});
        CHECK(cm.counts(0, 0) == 1);
        CHECK(cm.counts(0, 1) == 1);
        CHECK(cm.counts(1, 0) == 0);
        CHECK(cm.counts(1, 1) == 1);
        CHECK(cm.total() == 3);
    }
    {
        const auto cm = confusion({0, 1, 2}, {0, 1, 2}, {"a", "b", "c"});
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) CHECK(cm.counts(r, c) == (r == c ? 1 : 0));
    }
    CHECK_THROWS_AS(confusion({0, 5}, {0, 0}, {"a", "b"}), ValidationError);
    CHECK_THROWS_AS(confusion({0}, {0, 1}, {"a", "b"}), ValidationError);

    std::mt19937_64 rng(3);
    std::vector<int> t, p;
    for (int i = 0; i < 500; ++i) {
        t.push_back(static_cast<int>(rng() % 4));
        p.push_back(static_cast<int>(rng() % 4));
    }
    const auto cm = confusion(t, p, {"a", "b", "c", "d"});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            std::int64_t n = 0;
            for (std::size_t i = 0; i < t.size(); ++i) n += (t[i] == r && p[i] == c);
            REQUIRE(cm.counts(r, c) == n);
        }
}

TEST_CASE("metrics: hand-checked values", "[evaluation]") {
    {
        const auto cm = confusion({0, 1, 2, 0}, {0, 1, 2, 0}, {"a", "b", "c"});
        const auto m = metrics(cm);
        CHECK(m.overall_accuracy == 1.0);
        CHECK(m.macro_accuracy == 1.0);
        CHECK(m.weighted_accuracy == 1.0);
        CHECK(m.weighted_precision == 1.0);
        CHECK(m.weighted_f1 == 1.0);
        CHECK(m.iba == Catch::Approx(1.0));
    }
    {
        // counts [[1,1],[0,1]]
        const auto cm = confusion({0, 0, 1}, {0, 1, 1}, {"a", "b"});
        const auto m = metrics(cm);
        CHECK(m.overall_accuracy == Catch::Approx(2.0 / 3.0));
        CHECK(m.per_class_recall[0] == Catch::Approx(0.5));
        CHECK(m.per_class_recall[1] == Catch::Approx(1.0));
        CHECK(m.macro_accuracy == Catch::Approx(0.75));
    }
}

TEST_CASE("metrics: brute-force oracle equivalence on random runs", "[evaluation]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const int C = 2 + static_cast<int>(rng() % 13);
        const int n = 10 + static_cast<int>(rng() % 300);
        std::vector<int> t, p;
        std::vector<Vec> probs;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<std::string> classes;
        for (int c = 0; c < C; ++c) classes.push_back("c" + std::to_string(c));
        for (int i = 0; i < n; ++i) {
            t.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(C)));
            Vec pr(C);
            double total = 0.0;
            for (int c = 0; c < C; ++c) {
                pr(c) = u(rng);
                total += pr(c);
            }
            pr /= total;
            Eigen::Index arg;
            pr.maxCoeff(&arg);
            probs.push_back(pr);
            p.push_back(static_cast<int>(arg));
        }
        const auto cm = confusion(t, p, classes);
        SampleProbs sp{probs, t};
        const auto mine = metrics(cm, &sp);
        const auto oracle = oracles::metrics_bruteforce(t, p, C);
        REQUIRE(std::abs(mine.overall_accuracy - oracle.overall) < 1e-12);
        REQUIRE(std::abs(mine.macro_accuracy - oracle.macro) < 1e-12);
        REQUIRE(std::abs(mine.weighted_recall - oracle.weighted_recall) < 1e-12);
        REQUIRE(std::abs(mine.weighted_precision - oracle.weighted_precision) < 1e-12);
        REQUIRE(std::abs(mine.weighted_f1 - oracle.weighted_f1) < 1e-12);
        REQUIRE(std::abs(mine.iba - oracle.iba) < 1e-12);
        // identity: overall == support-weighted recall
        REQUIRE(std::abs(mine.overall_accuracy - mine.weighted_recall) < 1e-12);
        // top-k oracle + monotonicity
        const double top1 = oracles::topk_bruteforce(probs, t, 1);
        REQUIRE(std::abs(topk_accuracy(probs, t, 1) - top1) < 1e-12);
        if (C >= 3) {
            REQUIRE(std::abs(*mine.top3 - oracles::topk_bruteforce(probs, t, 3)) < 1e-12);
            REQUIRE(top1 <= *mine.top3 + 1e-12);
        }
        if (C >= 5) REQUIRE(*mine.top3 <= *mine.top5 + 1e-12);
        REQUIRE(topk_accuracy(probs, t, C) == 1.0);
    }
}

TEST_CASE("topk: tie-breaking by ascending class index", "[evaluation]") {
    Vec p(4);
    p << 0.25, 0.25, 0.25, 0.25;
    // all tied: rank of class c is c, so k=1 hits only class 0
    CHECK(topk_accuracy({p}, {0}, 1) == 1.0);
    CHECK(topk_accuracy({p}, {1}, 1) == 0.0);
    CHECK(topk_accuracy({p}, {1}, 2) == 1.0);
    CHECK(topk_accuracy({p}, {3}, 3) == 0.0);
    CHECK(topk_accuracy({p}, {3}, 4) == 1.0);

    Vec q(3);
    q << 0.2, 0.5, 0.3;  // true class ranked 2nd counts as a top-3 hit
    CHECK(topk_accuracy({q}, {2}, 3) == 1.0);
    CHECK_THROWS_AS(topk_accuracy({q}, {0}, 4), ValidationError);
    CHECK_THROWS_AS(topk_accuracy({q}, {0}, 0), ValidationError);
}

TEST_CASE("shapiro_wilk: bounds, errors, qualitative behaviour", "[evaluation][stats]") {
    CHECK_THROWS_AS(shapiro_wilk({1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(shapiro_wilk(std::vector<double>(10, 3.14)), ValidationError);

    std::vector<double> regular;
    for (int i = 1; i <= 20; ++i) regular.push_back(static_cast<double>(i));
    const auto reg = shapiro_wilk(regular);
    CHECK(reg.w > 0.95);
    CHECK(reg.w <= 1.0);
    CHECK(std::abs(reg.w - stats_reference::regular_sample_w) < 1e-6);

    const auto exp_res = shapiro_wilk(stats_reference::exp_sample());
    CHECK(exp_res.p < 0.05);
    CHECK(std::abs(exp_res.p - stats_reference::exp_sample_p) < 1e-6);
}

TEST_CASE("shapiro_wilk matches the frozen reference implementation", "[evaluation][stats]") {
    for (const auto& c : stats_reference::shapiro_cases()) {
        const auto r = shapiro_wilk(c.sample);
        REQUIRE(std::abs(r.w - c.w) < 1e-6);
        REQUIRE(std::abs(r.p - c.p) < 1e-6);
    }
}

TEST_CASE("paired_ttest: symmetry, degeneracy, frozen reference", "[evaluation][stats]") {
    const std::vector<double> a{1.0, 2.0, 3.5, 2.2, 5.1};
    const std::vector<double> b{0.8, 2.5, 3.0, 2.9, 4.2};
    const auto ab = paired_ttest(a, b);
    const auto ba = paired_ttest(b, a);
    CHECK(ab.t == Catch::Approx(-ba.t));
    CHECK(ab.p == Catch::Approx(ba.p));

    CHECK_THROWS_WITH(paired_ttest(a, a), Catch::Matchers::ContainsSubstring("identical"));

    std::vector<double> c = a;
    for (auto& v : c) v += 0.5;  // constant non-zero differences
    const auto deg = paired_ttest(c, a);
    CHECK(deg.degenerate);
    CHECK(deg.p == 0.0);
    CHECK(std::isinf(deg.t));
    CHECK(deg.t > 0);

    for (const auto& tc : stats_reference::ttest_cases()) {
        const auto r = paired_ttest(tc.a, tc.b);
        REQUIRE(std::abs(r.t - tc.t) < 1e-9);
        REQUIRE(std::abs(r.p - tc.p) < 1e-9);
    }
}

TEST_CASE("wilcoxon: exact branch equals enumeration", "[evaluation][stats]") {
    {
        // single non-zero pair: two sign patterns, two-sided p = 1
        const auto r = wilcoxon({1.0, 2.0}, {1.0, 2.5});
        CHECK(r.exact);
        CHECK(r.p == 1.0);
    }
    CHECK_THROWS_AS(wilcoxon({1.0, 2.0}, {1.0, 2.0}), ValidationError);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = 2 + rng() % 14;
        std::vector<double> a, b;
        for (std::size_t i = 0; i < m; ++i) {
            const double base = noise(rng);
            a.push_back(base);
            double d = noise(rng);
            if (trial % 3 == 0) d = std::round(d * 2.0) / 2.0;  // force ties in |d|
            if (d == 0.0) d = 0.5;
            b.push_back(base + d);
        }
        const auto r = wilcoxon(a, b);
        REQUIRE(r.exact);
        // rebuild doubled ranks for the oracle
        std::vector<double> diffs;
        for (std::size_t i = 0; i < m; ++i) diffs.push_back(a[i] - b[i]);
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t x, std::size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });
        std::vector<long long> rank2(m);
        for (std::size_t s = 0; s < m;) {
            std::size_t e = s;
            while (e + 1 < m && std::abs(diffs[idx[e + 1]]) == std::abs(diffs[idx[s]])) ++e;
            for (std::size_t q = s; q <= e; ++q) rank2[idx[q]] = static_cast<long long>(s + 1 + e + 1);
            s = e + 1;
        }
        long long w2 = 0;
        for (std::size_t i = 0; i < m; ++i)
            if (diffs[i] > 0) w2 += rank2[i];
        const double oracle = oracles::wilcoxon_exact_recursive(rank2, w2);
        REQUIRE(r.p == Catch::Approx(oracle).margin(1e-15));
    }
}

TEST_CASE("wilcoxon: normal approximation above the exact cutoff", "[evaluation][stats]") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> noise(0.4, 1.0);
    std::vector<double> a, b;
    for (int i = 0; i < 40; ++i) {
        a.push_back(noise(rng));
        b.push_back(noise(rng) - 0.6);
    }
    const auto r = wilcoxon(a, b);
    CHECK(!r.exact);
    CHECK(r.p > 0.0);
    CHECK(r.p <= 1.0);
}

TEST_CASE("compare_models routes on the normality p-value", "[evaluation][stats]") {
    std::mt19937_64 rng(17);
    {
        // near-normal differences: expect the t-test branch
        std::normal_distribution<double> n(0.0, 0.05);
        std::vector<double> a, b;
        for (int i = 0; i < 15; ++i) {
            const double base = 0.5 + n(rng);
            a.push_back(base + 0.02 + n(rng));
            b.push_back(base);
        }
        const auto res = compare_models("m1", "m2", a, b);
        REQUIRE(res.normality_p > 0.05);
        CHECK(res.chosen == ChosenTest::paired_t);
        CHECK(res.reject_null == (res.test_p < 0.05));
    }
    {
        // heavy-tailed differences: expect the wilcoxon branch
        std::exponential_distribution<double> e(1.0);
        std::vector<double> a, b;
        for (int i = 0; i < 40; ++i) {
            const double base = 0.4;
            a.push_back(base + e(rng) * e(rng));
            b.push_back(base);
        }
        const auto res = compare_models("m1", "m2", a, b);
        REQUIRE(res.normality_p < 0.05);
        CHECK(res.chosen == ChosenTest::wilcoxon);
    }
    {
        // degenerate differences propagate with context
        const std::vector<double> a{0.5, 0.5, 0.5};
        CHECK_THROWS_WITH(compare_models("x", "y", a, a), Catch::Matchers::ContainsSubstring("compare_models"));
    }
}

TEST_CASE("confusion artifacts: csv and svg shading agree", "[evaluation]") {
    const auto cm = confusion({0, 0, 0, 1, 1, 2}, {0, 1, 0, 1, 1, 0}, {"ant", "bee", "cat"});
    const auto dir = std::filesystem::temp_directory_path() / "trajkit_tests";
    std::filesystem::create_directories(dir);
    write_confusion_csv(cm, (dir / "cm.csv").string(), {"meta"});
    const std::string svg = confusion_svg(cm);

    // independently parse the CSV back into counts
    std::ifstream in(dir / "cm.csv");
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("true", 0) == 0) continue;
        std::vector<double> row;
        std::size_t start = line.find(',') + 1;
        while (start != 0 && start <= line.size()) {
            const auto pos = line.find(',', start);
            row.push_back(std::stod(line.substr(start, pos - start)));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        rows.push_back(row);
    }
    REQUIRE(rows.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) {
        double total = 0.0;
        for (double v : rows[r]) total += v;
        for (std::size_t c = 0; c < 3; ++c) {
            const double norm = total > 0 ? rows[r][c] / total : 0.0;
            const int red = static_cast<int>(std::lround(255.0 * (1.0 - norm)));
            const int green = static_cast<int>(std::lround(255.0 * (1.0 - 0.6 * norm)));
            char expected[64];
            std::snprintf(expected, sizeof expected, "fill=\"rgb(%d,%d,255)\"", red, green);
            REQUIRE(svg.find(expected) != std::string::npos);
        }
    }
    // byte-deterministic regeneration
    CHECK(confusion_svg(cm) == svg);
}
