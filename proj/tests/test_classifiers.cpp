#include "trajkit/classifiers.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace trajkit;

namespace {

Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

Vec random_simplex(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec v(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = u(rng) + 1e-9;
        total += v(i);
    }
    return v / total;
}

/// A small labelled corpus: crime regimes plus a normal pool, all kept.
struct Corpus {
    std::vector<Trajectory> trajs;
    TrajectoryLabeling labeling;

    std::vector<LabeledTrajectory> labeled() const { return resolve_labels(trajs, labeling); }
};

Corpus make_corpus(const std::vector<std::string>& crime_classes, int per_class, int normals,
                   std::uint64_t seed) {
    // cycle through three distinct motion families so classes stay separable
    std::vector<MotionRegime> regimes;
    for (std::size_t i = 0; i < crime_classes.size(); ++i) {
        const double bump = 0.0015 * static_cast<double>(i / 3);
        switch (i % 3) {
            case 0: regimes.push_back({crime_classes[i], 0.010 + bump, 0.0, 0.002, 0.02, 0.0005, 36}); break;
            case 1: regimes.push_back({crime_classes[i], 0.0, 0.0, 0.045 + bump, 0.30, 0.0005, 36}); break;
            default: regimes.push_back({crime_classes[i], 0.0, 0.006, 0.025 + bump, 0.50, 0.0005, 36}); break;
        }
    }
    Corpus corpus;
    for (auto& t : generate_synthetic(regimes, per_class, seed)) corpus.trajs.push_back(std::move(t));
    const MotionRegime normal_regime{kNormalLabel, 0.001, 0.0003, 0.002, 0.04, 0.0005, 36};
    for (auto& t : generate_synthetic({normal_regime}, normals, seed ^ 0x5a5a5a5aULL))
        corpus.trajs.push_back(std::move(t));
    std::vector<AnomalyScore> scores;
    std::vector<TrajLabel> clusters;
    for (const auto& t : corpus.trajs) {
        scores.push_back({t.video_id, t.person_id, t.class_label, 0.1, 3});
        clusters.push_back(t.class_label == kNormalLabel ? TrajLabel::normal : TrajLabel::abnormal);
    }
    corpus.labeling = relabel_trajectories(scores, clusters, LabelMethod::unsupervised);
    return corpus;
}

}  // namespace

TEST_CASE("build_architecture: shapes and trunk rules", "[classifiers]") {
    auto a3 = build_architecture(ArchitectureId::a3, {12, 16}, 13, HeadMode::full, 1);
    CHECK(a3.output_shape().cols == 13);
    std::mt19937_64 rng(2);
    const Mat out = a3.predict(random_mat(rng, 12, 16));
    CHECK(out.rows() == 1);
    CHECK(out.cols() == 13);
    CHECK(out.minCoeff() >= 0.0);
    CHECK(out.sum() == Catch::Approx(1.0).margin(1e-9));

    auto trunk = build_architecture(ArchitectureId::a3, {12, 16}, 13, HeadMode::trunk, 1);
    CHECK(trunk.output_shape().cols == 64);
    CHECK(trunk.output_shape().rows == 1);
    const Mat feats = trunk.predict(random_mat(rng, 12, 16));
    CHECK(feats.cols() == 64);

    CHECK_THROWS_WITH(build_architecture(ArchitectureId::a1, {12, 16}, 13, HeadMode::trunk, 1),
                      Catch::Matchers::ContainsSubstring("unsupported"));
    CHECK_THROWS_AS(build_architecture(ArchitectureId::a2, {12, 16}, 13, HeadMode::trunk, 1), ValidationError);

    auto a1 = build_architecture(ArchitectureId::a1, {12, 16}, 5, HeadMode::full, 1);
    CHECK(a1.output_shape().cols == 5);
    auto a2 = build_architecture(ArchitectureId::a2, {12, 16}, 7, HeadMode::full, 1);
    CHECK(a2.output_shape().cols == 7);
}

TEST_CASE("fuse_early: aggregate and concat contracts", "[classifiers]") {
    std::mt19937_64 rng(5);
    const Mat z_l = random_mat(rng, 12, 16);
    const Mat z_g = random_mat(rng, 12, 16);

    FusionSpec spec = FusionSpec::early_aggregate(16);
    spec.w_local = Mat::Ones(1, 16);
    spec.w_global = Mat::Zero(1, 16);
    CHECK((fuse_early(z_l, z_g, spec) - z_l).cwiseAbs().maxCoeff() == 0.0);  // bit-exact

    FusionSpec half = FusionSpec::early_aggregate(16);
    CHECK((fuse_early(z_l, z_l, half) - z_l).cwiseAbs().maxCoeff() < 1e-15);

    const Mat cat = fuse_early(z_l, z_g, FusionSpec::early_concat());
    CHECK(cat.cols() == 32);
    CHECK((cat.leftCols(16) - z_l).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cat.rightCols(16) - z_g).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(fuse_early(z_l, random_mat(rng, 12, 8), FusionSpec::early_aggregate(16)), ValidationError);
    CHECK_THROWS_AS(fuse_early(z_l, z_g, FusionSpec::late()), ValidationError);
}

TEST_CASE("fuse_late: arithmetic and invariants", "[classifiers]") {
    Vec uniform = Vec::Constant(4, 0.25);
    CHECK((fuse_late(uniform, uniform) - uniform).cwiseAbs().maxCoeff() < 1e-15);

    Vec onehot = Vec::Zero(4);
    onehot(2) = 1.0;
    CHECK((fuse_late(onehot, onehot) - onehot).cwiseAbs().maxCoeff() < 1e-15);

    Vec p1(2), p2(2);
    p1 << 0.7, 0.3;
    p2 << 0.5, 0.5;
    const Vec fused = fuse_late(p1, p2);
    CHECK(fused(0) == Catch::Approx(0.6));
    CHECK(fused(1) == Catch::Approx(0.4));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 2 + rng() % 12;
        const Vec a = random_simplex(rng, static_cast<Eigen::Index>(n));
        const Vec b = random_simplex(rng, static_cast<Eigen::Index>(n));
        const Vec f = fuse_late(a, b);
        REQUIRE(f.sum() == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(f.minCoeff() >= 0.0);
        // permutation equivariance in class order
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Vec ap(n), bp(n);
        for (std::size_t i = 0; i < n; ++i) {
            ap(static_cast<Eigen::Index>(i)) = a(perm[i]);
            bp(static_cast<Eigen::Index>(i)) = b(perm[i]);
        }
        const Vec fp = fuse_late(ap, bp);
        for (std::size_t i = 0; i < n; ++i)
            REQUIRE(fp(static_cast<Eigen::Index>(i)) == Catch::Approx(f(perm[i])).margin(1e-12));
    }
}

TEST_CASE("resolve_labels: dispositions and missing-label error", "[classifiers]") {
    auto corpus = make_corpus({"theft"}, 4, 4, 3);
    corpus.labeling.records[0].disposition = Disposition::removed_outlier;
    const auto labeled = resolve_labels(corpus.trajs, corpus.labeling);
    CHECK(labeled.size() == corpus.trajs.size() - 1);

    Trajectory stranger = corpus.trajs[0];
    stranger.video_id = "unknown_video";
    CHECK_THROWS_WITH(resolve_labels({stranger}, corpus.labeling),
                      Catch::Matchers::ContainsSubstring("make-labels"));
}

TEST_CASE("undersample_normal matches the crime trajectory count", "[classifiers]") {
    const auto corpus = make_corpus({"a", "b"}, 5, 20, 9);
    const auto labeled = corpus.labeled();
    const auto balanced = undersample_normal(labeled, 4);
    std::size_t normals = 0, crimes = 0;
    for (const auto& lt : balanced) (lt.effective_class == kNormalLabel ? normals : crimes)++;
    CHECK(crimes == 10);
    CHECK(normals == 10);
    // deterministic
    const auto again = undersample_normal(labeled, 4);
    REQUIRE(again.size() == balanced.size());
    for (std::size_t i = 0; i < balanced.size(); ++i)
        REQUIRE(balanced[i].traj->video_id == again[i].traj->video_id);
}

TEST_CASE("dataset assembly: class lists and variant rules", "[classifiers]") {
    const auto corpus = make_corpus({"assault", "theft"}, 4, 6, 11);
    const BackboneModel backbone(8, 1);
    const auto labeled = corpus.labeled();

    const auto ds_c = build_encoded_dataset(backbone, labeled, ClassifierVariant::mped_c, 1);
    CHECK(ds_c.classes == std::vector<std::string>{"assault", "theft"});
    CHECK(!ds_c.z_local.empty());
    CHECK(ds_c.z_local.front().rows() == 12);
    CHECK(ds_c.z_local.front().cols() == 8);

    const auto ds_nc = build_encoded_dataset(backbone, labeled, ClassifierVariant::mped_nc, 1);
    REQUIRE(ds_nc.classes.size() == 3);
    CHECK(ds_nc.classes.back() == kNormalLabel);

    const auto ds_dec = build_decoded_dataset(backbone, labeled);
    CHECK(ds_dec.classes == std::vector<std::string>{"assault", "theft"});
    CHECK(ds_dec.inputs.front().cols() == kCoordDims);

    // normal-only data cannot feed mped-c
    std::vector<LabeledTrajectory> normal_only;
    for (const auto& lt : labeled)
        if (lt.effective_class == kNormalLabel) normal_only.push_back(lt);
    CHECK_THROWS_WITH(build_encoded_dataset(backbone, normal_only, ClassifierVariant::mped_c, 1),
                      Catch::Matchers::ContainsSubstring("normal-only"));
}

TEST_CASE("13 crime classes give 13- and 14-way heads", "[classifiers]") {
    std::vector<std::string> crimes;
    for (int i = 0; i < 13; ++i) crimes.push_back("crime" + std::string(1, static_cast<char>('a' + i)));
    const auto corpus = make_corpus(crimes, 2, 4, 13);
    const BackboneModel backbone(8, 2);
    const auto labeled = corpus.labeled();
    const auto ds_c = build_encoded_dataset(backbone, labeled, ClassifierVariant::mped_c, 1);
    REQUIRE(ds_c.classes.size() == 13);
    const auto ds_nc = build_encoded_dataset(backbone, labeled, ClassifierVariant::mped_nc, 1);
    REQUIRE(ds_nc.classes.size() == 14);
    CHECK(ds_nc.classes.back() == kNormalLabel);

    nn::TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.seed = 3;
    const auto model_c =
        train_encoded(backbone, ds_c, ClassifierVariant::mped_c, ArchitectureId::a1, FusionMode::late, cfg);
    CHECK(model_c.net_local.output_shape().cols == 13);
    const auto model_nc =
        train_encoded(backbone, ds_nc, ClassifierVariant::mped_nc, ArchitectureId::a1, FusionMode::late, cfg);
    CHECK(model_nc.net_local.output_shape().cols == 14);
}

TEST_CASE("train_encoded: frozen backbone, fusion weight learning", "[classifiers]") {
    const auto corpus = make_corpus({"dash", "spin"}, 8, 8, 21);
    BackboneModel backbone(8, 5);
    const auto before = backbone.checksum();
    const auto ds = build_encoded_dataset(backbone, corpus.labeled(), ClassifierVariant::mped_c, 1);

    nn::TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.seed = 13;
    const auto model = train_encoded(backbone, ds, ClassifierVariant::mped_c, ArchitectureId::a3,
                                     FusionMode::early_aggregate, cfg);
    CHECK(backbone.checksum() == before);  // freeze contract
    CHECK(model.backbone_checksum == before);
    // fusion weights were initialized at 0.5 and received gradient
    REQUIRE(model.w_local.size() == 8);
    bool moved = false;
    for (Eigen::Index i = 0; i < model.w_local.size(); ++i)
        moved |= model.w_local(0, i) != 0.5 || model.w_global(0, i) != 0.5;
    CHECK(moved);

    CHECK_THROWS_WITH(train_encoded(backbone, ds, ClassifierVariant::mped_c, ArchitectureId::a1,
                                    FusionMode::early_aggregate, cfg),
                      Catch::Matchers::ContainsSubstring("a3"));
}

TEST_CASE("train_encoded on separable corpus reaches high held-out accuracy", "[classifiers]") {
    const auto corpus = make_corpus({"dash", "spin", "wave"}, 20, 30, 31);
    std::vector<Segment> normal_segs;
    std::vector<std::string> normal_lab;
    for (const auto& t : corpus.trajs)
        if (t.class_label == kNormalLabel)
            for (auto& s : segment_trajectory(t)) {
                normal_segs.push_back(std::move(s));
                normal_lab.push_back(kNormalLabel);
            }
    const auto backbone = train_backbone(normal_segs, normal_lab, 40, 3);

    // split trajectories: first 15 per class train, rest test
    std::map<std::string, int> seen;
    std::vector<Trajectory> train_t, test_t;
    for (const auto& t : corpus.trajs) (seen[t.class_label]++ < 15 ? train_t : test_t).push_back(t);
    const auto ltrain = resolve_labels(train_t, corpus.labeling);
    const auto ltest = resolve_labels(test_t, corpus.labeling);

    const auto ds_train = build_encoded_dataset(backbone, ltrain, ClassifierVariant::mped_c, 1);
    const auto ds_test = build_encoded_dataset(backbone, ltest, ClassifierVariant::mped_c, 1, &ds_train.classes, false);
    nn::TrainConfig cfg;
    cfg.seed = 7;
    cfg.learning_rate = 0.005;
    cfg.batch_size = 16;
    const auto model = train_encoded(backbone, ds_train, ClassifierVariant::mped_c, ArchitectureId::a3,
                                     FusionMode::early_aggregate, cfg);
    const auto preds = predict_encoded(model, ds_test);
    const auto oracle = oracles::metrics_bruteforce(ds_test.labels, preds.predicted,
                                                    static_cast<int>(ds_train.classes.size()));
    CHECK(oracle.macro >= 0.9);
}

namespace {

Trajectory drift_trajectory(const std::string& cls, double dx, double dy, int frames) {
    Trajectory t;
    t.video_id = cls;
    t.person_id = "p";
    t.class_label = cls;
    for (int f = 0; f < frames; ++f) {
        JointFrame jf;
        jf.frame_index = f;
        for (int j = 0; j < kJointCount; ++j) {
            jf.joints[static_cast<std::size_t>(2 * j)] = 0.25 + 0.01 * j + dx * f;
            jf.joints[static_cast<std::size_t>(2 * j + 1)] = 0.25 + 0.012 * j + dy * f;
        }
        t.frames.push_back(jf);
    }
    return t;
}

}  // namespace

TEST_CASE("train_decoded: simplex output, overfit, normal rejection", "[classifiers]") {
    // two drift directions share a start, so the reconstructed centre paths
    // carry the class signal: 10 segments, 2 classes
    const auto a = drift_trajectory("glide_x", 0.006, 0.0, 60);
    const auto b = drift_trajectory("glide_y", 0.0, 0.006, 60);
    std::vector<Segment> all_segs;
    for (const auto* t : {&a, &b})
        for (auto& s : segment_trajectory(*t)) all_segs.push_back(std::move(s));
    const auto backbone =
        train_backbone(all_segs, std::vector<std::string>(all_segs.size(), kNormalLabel), 60, 7);
    DecodedDataset ds;
    ds.classes = {"glide_x", "glide_y"};
    for (const auto* t : {&a, &b}) {
        const int label = t->class_label == "glide_x" ? 0 : 1;
        for (const auto& s : segment_trajectory(*t)) {
            ds.inputs.push_back(backbone.reconstruct(s).raw_hat);
            ds.labels.push_back(label);
            ds.refs.push_back(s.ref);
        }
    }
    REQUIRE(ds.inputs.size() == 10);

    nn::TrainConfig cfg;
    cfg.seed = 5;
    cfg.learning_rate = 0.01;
    cfg.patience = 25;
    cfg.batch_size = 4;
    const auto model = train_decoded(backbone, ds, cfg);
    const auto preds = predict_decoded(model, ds);
    for (const auto& p : preds.probabilities) {
        REQUIRE(p.sum() == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(p.minCoeff() >= 0.0);
        REQUIRE(p.size() == 2);
    }
    // overfit contract: training accuracy 1.0 within 25 epochs on 10 segments
    int correct = 0;
    for (std::size_t i = 0; i < preds.predicted.size(); ++i) correct += preds.predicted[i] == ds.labels[i];
    CHECK(correct == static_cast<int>(ds.labels.size()));

    DecodedDataset bad = ds;
    bad.classes.push_back(kNormalLabel);
    CHECK_THROWS_WITH(train_decoded(backbone, bad, cfg), Catch::Matchers::ContainsSubstring("normal"));
}

TEST_CASE("predict: checkpoint mismatch and vote semantics", "[classifiers]") {
    const auto corpus = make_corpus({"x", "y"}, 4, 4, 51);
    const BackboneModel backbone(8, 3);
    const auto ds = build_encoded_dataset(backbone, corpus.labeled(), ClassifierVariant::mped_c, 1);
    nn::TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.seed = 9;
    const auto model = train_encoded(backbone, ds, ClassifierVariant::mped_c, ArchitectureId::a1,
                                     FusionMode::late, cfg);
    const BackboneModel other(8, 4);
    std::vector<Segment> segs = segment_trajectory(*corpus.labeled()[0].traj);
    CHECK_THROWS_WITH(predict(model, other, segs), Catch::Matchers::ContainsSubstring("checkpoint"));

    const auto preds = predict(model, backbone, segs);
    REQUIRE(preds.refs.size() == segs.size());
    for (const auto& p : preds.probabilities) REQUIRE(p.sum() == Catch::Approx(1.0).margin(1e-9));

    // single-segment trajectory: vote equals the segment argmax
    PredictionSet single;
    Vec p1(2);
    p1 << 0.2, 0.8;
    single.refs.push_back({"v", "p", 0});
    single.probabilities.push_back(p1);
    single.predicted.push_back(1);
    const auto votes1 = majority_vote(single);
    REQUIRE(votes1.size() == 1);
    CHECK(votes1[0].label == 1);

    // (A, A, B) -> A
    PredictionSet three;
    Vec pa(2), pb(2);
    pa << 0.9, 0.1;
    pb << 0.1, 0.9;
    three.refs = {{"v", "p", 0}, {"v", "p", 12}, {"v", "p", 24}};
    three.probabilities = {pa, pa, pb};
    three.predicted = {0, 0, 1};
    CHECK(majority_vote(three)[0].label == 0);

    // tie (A, B) with summed probability favouring B -> B
    PredictionSet tie;
    Vec weak_a(2), strong_b(2);
    weak_a << 0.55, 0.45;
    strong_b << 0.05, 0.95;
    tie.refs = {{"v", "p", 0}, {"v", "p", 12}};
    tie.probabilities = {weak_a, strong_b};
    tie.predicted = {0, 1};
    CHECK(majority_vote(tie)[0].label == 1);
}
