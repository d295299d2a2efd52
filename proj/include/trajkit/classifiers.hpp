// Classification heads over the frozen backbone: encoded-based models (crime
// classes only, or crimes + normal) with early/late fusion of the local and
// global latents, and the decoded-based LSTM classifier over coordinate-space
// reconstructions. Predicted at segment level, trajectory labels by majority
// vote.
#pragma once

#include "trajkit/backbone.hpp"
#include "trajkit/ground_truth.hpp"
#include "trajkit/tinynet.hpp"

#include <map>
#include <set>

namespace trajkit {

enum class ArchitectureId { a1, a2, a3 };
enum class FusionMode { early_aggregate, early_concat, late };
enum class ClassifierVariant { mped_c, mped_nc, decoded };
enum class HeadMode { full, trunk };

inline const char* to_string(ArchitectureId a) {
    switch (a) {
        case ArchitectureId::a1: return "a1";
        case ArchitectureId::a2: return "a2";
        case ArchitectureId::a3: return "a3";
    }
    return "?";
}

inline const char* to_string(FusionMode f) {
    switch (f) {
        case FusionMode::early_aggregate: return "early-agg";
        case FusionMode::early_concat: return "early-cat";
        case FusionMode::late: return "late";
    }
    return "?";
}

inline const char* to_string(ClassifierVariant v) {
    switch (v) {
        case ClassifierVariant::mped_c: return "mped-c";
        case ClassifierVariant::mped_nc: return "mped-nc";
        case ClassifierVariant::decoded: return "decoded";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Architectures
// ---------------------------------------------------------------------------

inline constexpr int kDenseUnits = 64;
inline constexpr int kConvFilters = 64;  // filter-count ablation winner
inline constexpr int kConvKernel = 3;

/// A1: flatten -> dense(64, relu) -> dense(C, softmax)
/// A2: lstm(64) -> dense(64, relu) -> dense(C, softmax)
/// A3: conv1d(64 filters, kernel 3, relu) -> global-max-pool
///       -> dense(64, relu) -> dense(C, softmax)
/// head = trunk drops the two dense layers (A3 only), leaving pooled features.
inline nn::Network build_architecture(ArchitectureId id, nn::Shape input_shape, int classes,
                                      HeadMode head = HeadMode::full, std::uint64_t seed = 0,
                                      int conv_filters = kConvFilters) {
    if (head == HeadMode::full && classes < 2) throw ValidationError("build_architecture: need >= 2 classes");
    std::vector<nn::LayerSpec> specs;
    switch (id) {
        case ArchitectureId::a1:
            if (head == HeadMode::trunk)
                throw ValidationError("build_architecture: trunk head is unsupported for a1");
            specs = {nn::LayerSpec::flatten(), nn::LayerSpec::dense(kDenseUnits), nn::LayerSpec::relu(),
                     nn::LayerSpec::dense(classes), nn::LayerSpec::softmax()};
            break;
        case ArchitectureId::a2:
            if (head == HeadMode::trunk)
                throw ValidationError("build_architecture: trunk head is unsupported for a2");
            specs = {nn::LayerSpec::lstm(kDenseUnits), nn::LayerSpec::dense(kDenseUnits), nn::LayerSpec::relu(),
                     nn::LayerSpec::dense(classes), nn::LayerSpec::softmax()};
            break;
        case ArchitectureId::a3:
            specs = {nn::LayerSpec::conv1d(conv_filters, kConvKernel), nn::LayerSpec::relu(),
                     nn::LayerSpec::global_max_pool()};
            if (head == HeadMode::full) {
                specs.push_back(nn::LayerSpec::dense(kDenseUnits));
                specs.push_back(nn::LayerSpec::relu());
                specs.push_back(nn::LayerSpec::dense(classes));
                specs.push_back(nn::LayerSpec::softmax());
            }
            break;
    }
    return nn::Network(specs, input_shape, seed);
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

struct FusionSpec {
    FusionMode mode = FusionMode::late;
    Mat w_local;   // 1 x H, early-aggregate only, initialized at 0.5
    Mat w_global;  // 1 x H

    static FusionSpec early_aggregate(int hidden) {
        FusionSpec s;
        s.mode = FusionMode::early_aggregate;
        s.w_local = Mat::Constant(1, hidden, 0.5);
        s.w_global = Mat::Constant(1, hidden, 0.5);
        return s;
    }
    static FusionSpec early_concat() { return {FusionMode::early_concat, {}, {}}; }
    static FusionSpec late() { return {FusionMode::late, {}, {}}; }
};

/// Early aggregation: z_f[t,i] = w_l[i]*z_l[t,i] + w_g[i]*z_g[t,i] (weights
/// broadcast over time). Early concat: [z_l, z_g] along the feature axis.
inline Mat fuse_early(const Mat& z_l, const Mat& z_g, const FusionSpec& spec) {
    if (spec.mode == FusionMode::early_aggregate) {
        if (z_l.rows() != z_g.rows() || z_l.cols() != z_g.cols())
            throw ValidationError("fuse_early: latent shape mismatch");
        if (spec.w_local.cols() != z_l.cols() || spec.w_global.cols() != z_g.cols())
            throw ValidationError("fuse_early: fusion weight length mismatch");
        Mat out(z_l.rows(), z_l.cols());
        for (Eigen::Index t = 0; t < z_l.rows(); ++t)
            out.row(t) =
                z_l.row(t).cwiseProduct(spec.w_local.row(0)) + z_g.row(t).cwiseProduct(spec.w_global.row(0));
        return out;
    }
    if (spec.mode == FusionMode::early_concat) {
        if (z_l.rows() != z_g.rows()) throw ValidationError("fuse_early: latent length mismatch");
        Mat out(z_l.rows(), z_l.cols() + z_g.cols());
        out.leftCols(z_l.cols()) = z_l;
        out.rightCols(z_g.cols()) = z_g;
        return out;
    }
    throw ValidationError("fuse_early: spec is not an early-fusion mode");
}

/// Element-wise sum of the two branch probability vectors, L1-renormalized.
inline Vec fuse_late(const Vec& p_local, const Vec& p_global) {
    if (p_local.size() != p_global.size()) throw ValidationError("fuse_late: length mismatch");
    Vec q = p_local + p_global;
    return q / q.sum();
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

/// A trajectory with the class it carries after ground-truth relabeling.
struct LabeledTrajectory {
    const Trajectory* traj = nullptr;
    std::string effective_class;
};

/// Applies the labeling dispositions: kept trajectories keep their video-level
/// class, moved ones become normal, removed outliers are dropped. Trajectories
/// absent from the labeling are an error.
inline std::vector<LabeledTrajectory> resolve_labels(const std::vector<Trajectory>& trajectories,
                                                     const TrajectoryLabeling& labeling) {
    std::map<std::pair<std::string, std::string>, const TrajectoryRecord*> by_id;
    for (const auto& r : labeling.records) by_id[{r.video_id, r.person_id}] = &r;
    std::vector<LabeledTrajectory> out;
    for (const auto& t : trajectories) {
        const auto it = by_id.find({t.video_id, t.person_id});
        if (it == by_id.end())
            throw ValidationError("no trajectory-level label for " + t.video_id + "/" + t.person_id +
                                  "; generate labels with make-labels first");
        const auto cls = TrajectoryLabeling::effective_class(*it->second);
        if (!cls) continue;  // removed outlier
        out.push_back({&t, *cls});
    }
    return out;
}

/// Seeded under-sampling of the normal pool down to the total crime-trajectory
/// count (identity when normals are not the majority).
inline std::vector<LabeledTrajectory> undersample_normal(std::vector<LabeledTrajectory> labeled,
                                                         std::uint64_t seed) {
    std::vector<std::size_t> normal_idx;
    std::size_t n_crime = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        if (labeled[i].effective_class == kNormalLabel)
            normal_idx.push_back(i);
        else
            ++n_crime;
    }
    if (normal_idx.size() <= n_crime) return labeled;
    std::mt19937_64 rng(seed);
    std::shuffle(normal_idx.begin(), normal_idx.end(), rng);
    std::set<std::size_t> drop(normal_idx.begin() + static_cast<std::ptrdiff_t>(n_crime), normal_idx.end());
    std::vector<LabeledTrajectory> out;
    for (std::size_t i = 0; i < labeled.size(); ++i)
        if (!drop.count(i)) out.push_back(labeled[i]);
    return out;
}

struct EncodedDataset {
    std::vector<std::string> classes;
    std::vector<Mat> z_local;   // per segment, 12 x H
    std::vector<Mat> z_global;  // per segment, 12 x H
    std::vector<int> labels;
    std::vector<SegmentRef> refs;
};

struct DecodedDataset {
    std::vector<std::string> classes;
    std::vector<Mat> inputs;  // reconstructions, 12 x 34
    std::vector<int> labels;
    std::vector<SegmentRef> refs;
};

namespace detail {

inline std::vector<std::string> class_list(const std::vector<LabeledTrajectory>& labeled, bool with_normal) {
    std::set<std::string> crimes;
    for (const auto& lt : labeled)
        if (lt.effective_class != kNormalLabel) crimes.insert(lt.effective_class);
    std::vector<std::string> classes(crimes.begin(), crimes.end());
    if (with_normal) classes.push_back(kNormalLabel);  // normal is always the last class
    return classes;
}

inline int class_index(const std::vector<std::string>& classes, const std::string& label) {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw ValidationError("unknown class label '" + label + "'");
    return static_cast<int>(it - classes.begin());
}

}  // namespace detail

/// Encodes the segments of the selected trajectories through the frozen
/// backbone. mped-c consumes crime trajectories only; mped-nc adds the normal
/// pool, under-sampled to the crime total when `undersample` is set (training
/// data; evaluation sets keep their natural balance).
///
/// class_override fixes the class list (e.g. an already-trained model's);
/// trajectories whose class is absent from it are skipped.
inline EncodedDataset build_encoded_dataset(const BackboneModel& backbone,
                                            const std::vector<LabeledTrajectory>& labeled,
                                            ClassifierVariant variant, std::uint64_t seed = 0,
                                            const std::vector<std::string>* class_override = nullptr,
                                            bool undersample = true) {
    if (variant == ClassifierVariant::decoded)
        throw ValidationError("build_encoded_dataset: use build_decoded_dataset for the decoded variant");
    std::vector<LabeledTrajectory> selected;
    if (variant == ClassifierVariant::mped_c) {
        for (const auto& lt : labeled)
            if (lt.effective_class != kNormalLabel) selected.push_back(lt);
        if (selected.empty())
            throw ValidationError("build_encoded_dataset: mped-c requires crime trajectories, got normal-only data");
    } else {
        selected = undersample ? undersample_normal(labeled, seed) : labeled;
    }
    EncodedDataset ds;
    ds.classes = class_override ? *class_override : detail::class_list(selected, variant == ClassifierVariant::mped_nc);
    for (const auto& lt : selected) {
        if (class_override &&
            std::find(ds.classes.begin(), ds.classes.end(), lt.effective_class) == ds.classes.end())
            continue;
        const int label = detail::class_index(ds.classes, lt.effective_class);
        for (const auto& seg : segment_trajectory(*lt.traj)) {
            LatentPair lp = backbone.encode(seg);
            ds.z_local.push_back(std::move(lp.z_local));
            ds.z_global.push_back(std::move(lp.z_global));
            ds.labels.push_back(label);
            ds.refs.push_back(seg.ref);
        }
    }
    if (ds.labels.empty()) throw ValidationError("build_encoded_dataset: no segments (trajectories too short?)");
    return ds;
}

/// Reconstructions of crime-trajectory segments; the normal class is excluded
/// from the decoded pipeline by design.
inline DecodedDataset build_decoded_dataset(const BackboneModel& backbone,
                                            const std::vector<LabeledTrajectory>& labeled,
                                            const std::vector<std::string>* class_override = nullptr) {
    DecodedDataset ds;
    std::vector<LabeledTrajectory> selected;
    for (const auto& lt : labeled)
        if (lt.effective_class != kNormalLabel) selected.push_back(lt);
    if (selected.empty()) throw ValidationError("build_decoded_dataset: no crime trajectories");
    ds.classes = class_override ? *class_override : detail::class_list(selected, false);
    for (const auto& lt : selected) {
        if (class_override &&
            std::find(ds.classes.begin(), ds.classes.end(), lt.effective_class) == ds.classes.end())
            continue;
        const int label = detail::class_index(ds.classes, lt.effective_class);
        for (const auto& seg : segment_trajectory(*lt.traj)) {
            ds.inputs.push_back(backbone.reconstruct(seg).raw_hat);
            ds.labels.push_back(label);
            ds.refs.push_back(seg.ref);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

struct ClassifierModel {
    ClassifierVariant variant = ClassifierVariant::mped_c;
    ArchitectureId arch = ArchitectureId::a3;
    FusionMode fusion = FusionMode::late;
    std::vector<std::string> classes;
    std::uint64_t backbone_checksum = 0;
    int latent_hidden = 0;  // encoded variants

    nn::Network net;         // early fusion / decoded
    nn::Network net_local;   // late fusion
    nn::Network net_global;  // late fusion
    Mat w_local, w_global;   // early-aggregate fusion weights (1 x H)

    int class_count() const { return static_cast<int>(classes.size()); }
};

/// Encoded-based training over frozen backbone latents. The backbone is never
/// part of the optimized parameter set; early-aggregate fusion weights are.
/// Early fusion is wired to A3 only.
inline ClassifierModel train_encoded(const BackboneModel& backbone, const EncodedDataset& ds,
                                     ClassifierVariant variant, ArchitectureId arch, FusionMode fusion,
                                     const nn::TrainConfig& cfg,
                                     const std::vector<std::size_t>* val_indices = nullptr,
                                     nn::TrainResult* result = nullptr) {
    if (variant == ClassifierVariant::decoded)
        throw ValidationError("train_encoded: decoded variant is trained by train_decoded");
    if (variant == ClassifierVariant::mped_c) {
        bool any_crime = false;
        for (const auto& c : ds.classes) any_crime |= (c != kNormalLabel);
        if (!any_crime) throw ValidationError("train_encoded: mped-c given normal-only data");
    }
    if ((fusion == FusionMode::early_aggregate || fusion == FusionMode::early_concat) &&
        arch != ArchitectureId::a3)
        throw ValidationError("train_encoded: early fusion is wired to a3 only");
    if (ds.z_local.empty()) throw ValidationError("train_encoded: empty dataset");

    const auto H = ds.z_local.front().cols();
    const auto T = ds.z_local.front().rows();
    const int classes = static_cast<int>(ds.classes.size());

    ClassifierModel model;
    model.variant = variant;
    model.arch = arch;
    model.fusion = fusion;
    model.classes = ds.classes;
    model.backbone_checksum = backbone.checksum();
    model.latent_hidden = static_cast<int>(H);

    if (fusion == FusionMode::late) {
        model.net_local = build_architecture(arch, {T, H}, classes, HeadMode::full, cfg.seed);
        model.net_global = build_architecture(arch, {T, H}, classes, HeadMode::full, cfg.seed ^ 0xabcdefULL);
        nn::DataSource src_l;
        src_l.size = ds.z_local.size();
        src_l.labels = ds.labels;
        src_l.input = [&ds](std::size_t i) { return ds.z_local[i]; };
        nn::TrainResult r = nn::train(model.net_local, src_l, cfg, val_indices);
        nn::DataSource src_g;
        src_g.size = ds.z_global.size();
        src_g.labels = ds.labels;
        src_g.input = [&ds](std::size_t i) { return ds.z_global[i]; };
        nn::train(model.net_global, src_g, cfg, val_indices);
        if (result) *result = r;
        return model;
    }

    if (fusion == FusionMode::early_concat) {
        model.net = build_architecture(arch, {T, 2 * H}, classes, HeadMode::full, cfg.seed);
        nn::DataSource src;
        src.size = ds.z_local.size();
        src.labels = ds.labels;
        src.input = [&ds](std::size_t i) { return fuse_early(ds.z_local[i], ds.z_global[i], FusionSpec::early_concat()); };
        nn::TrainResult r = nn::train(model.net, src, cfg, val_indices);
        if (result) *result = r;
        return model;
    }

    // early-aggregate: learnable per-feature fusion weights, trained jointly.
    model.net = build_architecture(arch, {T, H}, classes, HeadMode::full, cfg.seed);
    nn::ParamTensor w_l{"fusion.w_local", Mat::Constant(1, H, 0.5), Mat::Zero(1, H)};
    nn::ParamTensor w_g{"fusion.w_global", Mat::Constant(1, H, 0.5), Mat::Zero(1, H)};
    nn::DataSource src;
    src.size = ds.z_local.size();
    src.labels = ds.labels;
    src.input = [&ds, &w_l, &w_g](std::size_t i) {
        FusionSpec spec;
        spec.mode = FusionMode::early_aggregate;
        spec.w_local = w_l.value;
        spec.w_global = w_g.value;
        return fuse_early(ds.z_local[i], ds.z_global[i], spec);
    };
    src.on_input_grad = [&ds, &w_l, &w_g](std::size_t i, const Mat& dzf) {
        // z_f[t,k] = w_l[k] z_l[t,k] + w_g[k] z_g[t,k]
        for (Eigen::Index t = 0; t < dzf.rows(); ++t) {
            w_l.grad.row(0) += dzf.row(t).cwiseProduct(ds.z_local[i].row(t));
            w_g.grad.row(0) += dzf.row(t).cwiseProduct(ds.z_global[i].row(t));
        }
    };
    src.extra_params = {&w_l, &w_g};
    nn::TrainResult r = nn::train(model.net, src, cfg, val_indices);
    model.w_local = w_l.value;
    model.w_global = w_g.value;
    if (result) *result = r;
    return model;
}

/// Decoded-based classifier: lstm(64) -> dense(C, softmax) over reconstructed
/// 12x34 segments, crime classes only.
inline ClassifierModel train_decoded(const BackboneModel& backbone, const DecodedDataset& ds,
                                     const nn::TrainConfig& cfg,
                                     const std::vector<std::size_t>* val_indices = nullptr,
                                     nn::TrainResult* result = nullptr) {
    if (ds.inputs.empty()) throw ValidationError("train_decoded: empty dataset");
    for (const auto& c : ds.classes)
        if (c == kNormalLabel) throw ValidationError("train_decoded: normal-class data supplied");
    ClassifierModel model;
    model.variant = ClassifierVariant::decoded;
    model.fusion = FusionMode::late;  // unused
    model.classes = ds.classes;
    model.backbone_checksum = backbone.checksum();
    const auto T = ds.inputs.front().rows();
    const auto F = ds.inputs.front().cols();
    model.net = nn::Network({nn::LayerSpec::lstm(kDenseUnits), nn::LayerSpec::dense(static_cast<int>(ds.classes.size())),
                             nn::LayerSpec::softmax()},
                            {T, F}, cfg.seed);
    nn::DataSource src;
    src.size = ds.inputs.size();
    src.labels = ds.labels;
    src.input = [&ds](std::size_t i) { return ds.inputs[i]; };
    nn::TrainResult r = nn::train(model.net, src, cfg, val_indices);
    if (result) *result = r;
    return model;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct PredictionSet {
    std::vector<SegmentRef> refs;
    std::vector<Vec> probabilities;  // per segment, simplex over model.classes
    std::vector<int> predicted;      // per segment argmax
};

struct TrajectoryVote {
    std::string video_id;
    std::string person_id;
    int label = 0;
    Vec mean_probs;  // mean of the trajectory's per-segment probability vectors
};

inline Vec predict_segment(const ClassifierModel& model, const BackboneModel& backbone, const Segment& seg) {
    Mat out;
    if (model.variant == ClassifierVariant::decoded) {
        out = model.net.predict(backbone.reconstruct(seg).raw_hat);
    } else {
        const LatentPair lp = backbone.encode(seg);
        switch (model.fusion) {
            case FusionMode::late: {
                const Mat pl = model.net_local.predict(lp.z_local);
                const Mat pg = model.net_global.predict(lp.z_global);
                return fuse_late(pl.row(0).transpose(), pg.row(0).transpose());
            }
            case FusionMode::early_concat:
                out = model.net.predict(fuse_early(lp.z_local, lp.z_global, FusionSpec::early_concat()));
                break;
            case FusionMode::early_aggregate: {
                FusionSpec spec;
                spec.mode = FusionMode::early_aggregate;
                spec.w_local = model.w_local;
                spec.w_global = model.w_global;
                out = model.net.predict(fuse_early(lp.z_local, lp.z_global, spec));
                break;
            }
        }
    }
    return out.row(0).transpose();
}

namespace detail {

inline void push_prediction(PredictionSet& out, const SegmentRef& ref, Vec p) {
    int best = 0;
    for (Eigen::Index j = 1; j < p.size(); ++j)
        if (p(j) > p(best)) best = static_cast<int>(j);
    out.refs.push_back(ref);
    out.probabilities.push_back(std::move(p));
    out.predicted.push_back(best);
}

}  // namespace detail

/// Prediction over pre-encoded latents (skips the backbone pass).
inline PredictionSet predict_encoded(const ClassifierModel& model, const EncodedDataset& ds) {
    if (model.variant == ClassifierVariant::decoded)
        throw ValidationError("predict_encoded: model is the decoded variant");
    PredictionSet out;
    for (std::size_t i = 0; i < ds.z_local.size(); ++i) {
        Vec p;
        switch (model.fusion) {
            case FusionMode::late: {
                const Mat pl = model.net_local.predict(ds.z_local[i]);
                const Mat pg = model.net_global.predict(ds.z_global[i]);
                p = fuse_late(pl.row(0).transpose(), pg.row(0).transpose());
                break;
            }
            case FusionMode::early_concat:
                p = model.net.predict(fuse_early(ds.z_local[i], ds.z_global[i], FusionSpec::early_concat()))
                        .row(0)
                        .transpose();
                break;
            case FusionMode::early_aggregate: {
                FusionSpec spec;
                spec.mode = FusionMode::early_aggregate;
                spec.w_local = model.w_local;
                spec.w_global = model.w_global;
                p = model.net.predict(fuse_early(ds.z_local[i], ds.z_global[i], spec)).row(0).transpose();
                break;
            }
        }
        detail::push_prediction(out, ds.refs[i], std::move(p));
    }
    return out;
}

/// Prediction over pre-computed reconstructions.
inline PredictionSet predict_decoded(const ClassifierModel& model, const DecodedDataset& ds) {
    if (model.variant != ClassifierVariant::decoded)
        throw ValidationError("predict_decoded: model is not the decoded variant");
    PredictionSet out;
    for (std::size_t i = 0; i < ds.inputs.size(); ++i)
        detail::push_prediction(out, ds.refs[i], model.net.predict(ds.inputs[i]).row(0).transpose());
    return out;
}

/// Per-segment simplex vectors plus argmax labels. The backbone must be the
/// one the classifier was trained against (checked by weight checksum).
inline PredictionSet predict(const ClassifierModel& model, const BackboneModel& backbone,
                             const std::vector<Segment>& segments) {
    if (model.backbone_checksum != backbone.checksum())
        throw ValidationError("predict: backbone checkpoint does not match the one this classifier was trained on");
    PredictionSet out;
    out.refs.reserve(segments.size());
    for (const auto& seg : segments) {
        Vec p = predict_segment(model, backbone, seg);
        int best = 0;
        for (Eigen::Index j = 1; j < p.size(); ++j)
            if (p(j) > p(best)) best = static_cast<int>(j);
        out.refs.push_back(seg.ref);
        out.probabilities.push_back(std::move(p));
        out.predicted.push_back(best);
    }
    return out;
}

/// Trajectory label = majority vote over its segments; ties broken by summed
/// probability, then by class index.
inline std::vector<TrajectoryVote> majority_vote(const PredictionSet& preds) {
    struct Group {
        std::vector<int> votes;
        Vec prob_sum;
        std::size_t segments = 0;
    };
    std::map<std::pair<std::string, std::string>, Group> groups;
    for (std::size_t i = 0; i < preds.refs.size(); ++i) {
        const auto key = std::make_pair(preds.refs[i].video_id, preds.refs[i].person_id);
        auto& g = groups[key];
        const auto C = preds.probabilities[i].size();
        if (g.votes.empty()) {
            g.votes.assign(static_cast<std::size_t>(C), 0);
            g.prob_sum = Vec::Zero(C);
        }
        g.votes[static_cast<std::size_t>(preds.predicted[i])] += 1;
        g.prob_sum += preds.probabilities[i];
        g.segments += 1;
    }
    std::vector<TrajectoryVote> out;
    for (const auto& [key, g] : groups) {
        int best = 0;
        for (std::size_t c = 1; c < g.votes.size(); ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            const auto bi = static_cast<Eigen::Index>(best);
            if (g.votes[c] > g.votes[static_cast<std::size_t>(best)] ||
                (g.votes[c] == g.votes[static_cast<std::size_t>(best)] && g.prob_sum(ci) > g.prob_sum(bi)))
                best = static_cast<int>(c);
        }
        out.push_back({key.first, key.second, best, g.prob_sum / static_cast<double>(g.segments)});
    }
    return out;
}

}  // namespace trajkit
