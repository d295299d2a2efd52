// trajkit command-line interface: dataset preparation, backbone training,
// trajectory-level ground truth, augmentation, classifier grids, evaluation,
// statistical comparison and full pipeline runs.
//
// Exit codes: 0 success, 1 validation/usage error, 2 runtime error.

#include "trajkit/pipeline.hpp"
#include "trajkit/reference.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace trajkit;

std::vector<std::string> meta_lines(const std::string& extra = "") {
    std::string line = kVersion;
    if (!extra.empty()) line += " " + extra;
    return {line};
}

std::map<std::pair<std::string, std::string>, Split> split_map(const DatasetManifest& m) {
    std::map<std::pair<std::string, std::string>, Split> out;
    for (const auto& e : m.entries) out[{e.video_id, e.person_id}] = e.split;
    return out;
}

std::vector<Trajectory> load_segmentable(const DatasetManifest& manifest, const fs::path& base) {
    auto trajs = load_trajectories(manifest, base);
    std::vector<Trajectory> kept;
    std::size_t dropped = 0;
    for (auto& t : trajs) {
        if (static_cast<int>(t.frames.size()) >= kSegmentLen)
            kept.push_back(std::move(t));
        else
            ++dropped;
    }
    if (dropped > 0) log_warn("dropped " + std::to_string(dropped) + " trajectories shorter than the window");
    return kept;
}

int cmd_synth(const std::string& out_dir, int per_class, std::uint64_t seed, const std::string& regimes_file) {
    std::vector<MotionRegime> regimes = default_regimes();
    if (!regimes_file.empty()) {
        std::ifstream in(regimes_file);
        if (!in) throw ValidationError("cannot open regimes file " + regimes_file);
        regimes = json::parse(in).get<std::vector<MotionRegime>>();
    }
    fs::create_directories(fs::path(out_dir) / "data");
    const auto trajs = generate_synthetic(regimes, per_class, seed);
    DatasetManifest manifest;
    const Resolution res{256, 256};
    for (const auto& t : trajs) {
        const std::string rel = "data/" + t.video_id + "_" + t.person_id + ".csv";
        export_trajectory(t, res, (fs::path(out_dir) / rel).string());
        manifest.entries.push_back({rel, t.video_id, t.person_id, t.class_label, Split::none});
        manifest.resolutions[t.video_id] = res;
    }
    write_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string(), meta_lines());
    std::cout << "wrote " << trajs.size() << " trajectories to " << out_dir << "\n";
    return 0;
}

int cmd_ingest(const std::string& manifest_path, const std::string& out_dir) {
    const auto src = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    DatasetManifest canonical;
    canonical.resolutions = src.resolutions;
    std::size_t frames = 0;
    for (auto e : src.entries) {
        fs::path p = e.path;
        if (p.is_relative()) p = base / p;
        const auto it = src.resolutions.find(e.video_id);
        if (it == src.resolutions.end()) throw ValidationError("no resolution for video " + e.video_id);
        frames += ingest_trajectory(p.string(), it->second, e.video_id, e.person_id, e.class_label).frames.size();
        e.path = fs::absolute(p).string();
        canonical.entries.push_back(std::move(e));
    }
    fs::create_directories(out_dir);
    write_manifest(canonical, (fs::path(out_dir) / "manifest.txt").string(), meta_lines());
    std::cout << "validated " << canonical.entries.size() << " trajectories (" << frames << " frames)\n";
    return 0;
}

int cmd_split(const std::string& manifest_path, const std::string& out, double ratio, std::uint64_t seed) {
    const auto manifest = read_manifest(manifest_path);
    const auto split = make_split(manifest, ratio, seed);
    write_manifest(split, out, meta_lines());
    std::map<std::string, std::pair<int, int>> counts;
    for (const auto& e : split.entries) {
        if (e.split == Split::train)
            counts[e.class_label].first++;
        else
            counts[e.class_label].second++;
    }
    for (const auto& [cls, c] : counts)
        std::cout << cls << ": " << c.first << " train / " << c.second << " test\n";
    return 0;
}

int cmd_train_backbone(const std::string& manifest_path, const std::string& out, int epochs, std::uint64_t seed,
                       int hidden, double lr, int batch) {
    const auto manifest = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    const auto trajs = load_segmentable(manifest, base);
    auto splits = split_map(manifest);
    std::vector<Segment> segs;
    std::vector<std::string> labels;
    for (const auto& t : trajs) {
        if (t.class_label != kNormalLabel || splits[{t.video_id, t.person_id}] != Split::train) continue;
        for (auto& s : segment_trajectory(t)) {
            segs.push_back(std::move(s));
            labels.push_back(t.class_label);
        }
    }
    if (segs.empty()) throw ValidationError("no normal-labelled training segments in " + manifest_path);
    BackboneConfig cfg;
    cfg.hidden = hidden;
    cfg.learning_rate = lr;
    cfg.batch_size = batch;
    const auto model = train_backbone(segs, labels, epochs, seed, cfg);
    model.save(out);
    std::cout << "trained on " << segs.size() << " segments, final mse " << model.train_info().final_loss
              << ", saved " << out << "\n";
    return 0;
}

int cmd_score(const std::string& backbone_path, const std::string& manifest_path, const std::string& out) {
    const auto backbone = BackboneModel::load(backbone_path);
    const auto manifest = read_manifest(manifest_path);
    const auto trajs = load_segmentable(manifest, fs::path(manifest_path).parent_path());
    std::vector<AnomalyScore> scores;
    for (const auto& t : trajs) {
        const auto segs = segment_trajectory(t);
        std::vector<Reconstruction> recs;
        recs.reserve(segs.size());
        for (const auto& s : segs) recs.push_back(backbone.reconstruct(s));
        auto sc = anomaly_score(segs, recs);
        sc.class_label = t.class_label;
        scores.push_back(std::move(sc));
    }
    write_scores(scores, out, meta_lines());
    std::cout << "scored " << scores.size() << " trajectories -> " << out << "\n";
    return 0;
}

int cmd_make_labels(const std::string& scores_path, const std::string& out, const std::string& method,
                    const std::vector<double>& candidates, int max_iter, double tol, int grid_count,
                    std::uint64_t seed) {
    const auto scores = read_scores(scores_path);
    std::vector<double> alphas;
    for (const auto& s : scores) alphas.push_back(s.alpha);
    TrajectoryLabeling labeling;
    if (parse_label_method(method) == LabelMethod::unsupervised) {
        const auto gmm = fit_gmm(alphas, max_iter, tol, seed);
        labeling = relabel_trajectories(scores, assign_clusters(gmm, alphas), LabelMethod::unsupervised);
        std::cout << "gmm means " << gmm.mean[0] << " / " << gmm.mean[1] << ", "
                  << gmm.log_likelihood.size() << " iterations\n";
    } else {
        std::vector<std::pair<double, TrajLabel>> swl;
        for (const auto& s : scores)
            swl.emplace_back(s.alpha, s.class_label == kNormalLabel ? TrajLabel::normal : TrajLabel::abnormal);
        auto cands = candidates;
        if (cands.empty()) cands = make_candidate_grid(alphas, grid_count);
        const auto choice = select_threshold(swl, cands);
        std::vector<TrajLabel> clusters;
        for (double a : alphas) clusters.push_back(a <= choice.threshold ? TrajLabel::normal : TrajLabel::abnormal);
        labeling = relabel_trajectories(scores, clusters, LabelMethod::supervised, choice.threshold);
        std::cout << "threshold " << choice.threshold << " (silhouette " << choice.silhouette << ")\n";
    }
    write_labeling(labeling, out, meta_lines());
    std::cout << "kept " << labeling.kept << ", moved-to-normal " << labeling.moved << ", removed-outlier "
              << labeling.removed << " -> " << out << "\n";
    return 0;
}

int cmd_augment(const std::string& method, const std::string& manifest_path, const std::string& labels_path,
                const std::string& out_dir, std::uint64_t seed, double rho, int k,
                const std::string& backbone_path) {
    const auto manifest = read_manifest(manifest_path);
    const auto labeling = read_labeling(labels_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    const auto trajs = load_segmentable(manifest, base);
    auto splits = split_map(manifest);
    fs::create_directories(out_dir);
    const fs::path out = out_dir;

    std::map<std::pair<std::string, std::string>, const TrajectoryRecord*> rec_of;
    for (const auto& r : labeling.records) rec_of[{r.video_id, r.person_id}] = &r;

    if (method == "shift") {
        std::map<std::string, std::vector<const Trajectory*>> by_class;
        for (const auto& t : trajs) {
            if (splits[{t.video_id, t.person_id}] != Split::train) continue;
            const auto it = rec_of.find({t.video_id, t.person_id});
            if (it == rec_of.end()) continue;
            const auto cls = TrajectoryLabeling::effective_class(*it->second);
            if (!cls || *cls == kNormalLabel) continue;
            by_class[*cls].push_back(&t);
        }
        if (by_class.empty()) throw ValidationError("augment: no crime-class training trajectories");
        std::size_t majority = 0;
        for (const auto& [cls, v] : by_class) majority = std::max(majority, v.size());

        DatasetManifest aug_manifest = manifest;
        // entry paths must stay valid from the new manifest's directory
        for (auto& e : aug_manifest.entries) {
            fs::path p = e.path;
            if (p.is_relative()) p = base / p;
            e.path = fs::absolute(p).string();
        }
        TrajectoryLabeling aug_labeling = labeling;
        std::size_t generated_total = 0;
        fs::create_directories(out / "aug");
        for (const auto& [cls, members] : by_class) {
            std::vector<Trajectory> originals;
            for (const auto* p : members) originals.push_back(*p);
            const auto generated = shift_oversample(originals, majority, rho, seed ^ hash_bytes(cls));
            for (const auto& g : generated) {
                const auto res = manifest.resolutions.at(originals.front().video_id);
                const std::string rel = "aug/" + g.video_id + "_" + g.person_id + ".csv";
                export_trajectory(g, res, (out / rel).string());
                aug_manifest.entries.push_back({rel, g.video_id, g.person_id, cls, Split::train});
                aug_manifest.resolutions[g.video_id] = res;
                TrajectoryRecord r;
                r.video_id = g.video_id;
                r.person_id = g.person_id;
                r.class_label = cls;
                r.cluster = TrajLabel::abnormal;
                r.disposition = Disposition::keep;
                aug_labeling.records.push_back(std::move(r));
                ++aug_labeling.kept;
            }
            generated_total += generated.size();
        }
        write_manifest(aug_manifest, (out / "manifest_aug.txt").string(), meta_lines());
        write_labeling(aug_labeling, (out / "labels_aug.csv").string(), meta_lines());
        std::cout << "generated " << generated_total << " shifted trajectories -> " << out_dir << "\n";
        return 0;
    }
    if (method == "smote") {
        if (backbone_path.empty()) throw ValidationError("augment --method smote requires --backbone");
        const auto backbone = BackboneModel::load(backbone_path);
        std::vector<Trajectory> train_trajs;
        for (const auto& t : trajs)
            if (splits[{t.video_id, t.person_id}] == Split::train) train_trajs.push_back(t);
        const auto labeled = resolve_labels(train_trajs, labeling);
        const auto ds = build_decoded_dataset(backbone, labeled);
        std::map<std::string, std::vector<Vec>> by_class;
        for (std::size_t i = 0; i < ds.inputs.size(); ++i)
            by_class[ds.classes[static_cast<std::size_t>(ds.labels[i])]].push_back(flatten_segment(ds.inputs[i]));
        const auto balanced = smote_oversample(by_class, k, seed);
        write_smote_segments(balanced, (out / "smote_segments.csv").string(), meta_lines());
        std::size_t total = 0;
        for (const auto& [cls, v] : balanced) total += v.size();
        std::cout << "balanced decoded segments: " << total << " -> " << out_dir << "/smote_segments.csv\n";
        return 0;
    }
    throw ValidationError("unknown augmentation method '" + method + "' (shift|smote)");
}

int cmd_train_clf(const std::string& variant, const std::string& arch, const std::string& fusion,
                  const std::string& backbone_path, const std::string& manifest_path,
                  const std::string& labels_path, const std::string& out_dir, int folds, std::uint64_t seed,
                  const nn::TrainConfig& base_cfg, const std::string& smote_file) {
    const auto backbone = BackboneModel::load(backbone_path);
    const auto manifest = read_manifest(manifest_path);
    const auto labeling = read_labeling(labels_path);
    const auto trajs = load_segmentable(manifest, fs::path(manifest_path).parent_path());
    auto splits = split_map(manifest);
    std::vector<Trajectory> train_trajs, test_trajs;
    for (const auto& t : trajs) {
        const auto s = splits[{t.video_id, t.person_id}];
        if (s == Split::train)
            train_trajs.push_back(t);
        else if (s == Split::test)
            test_trajs.push_back(t);
    }
    const auto labeled_train = resolve_labels(train_trajs, labeling);
    const auto labeled_test = resolve_labels(test_trajs, labeling);
    std::map<std::pair<std::string, std::string>, std::string> test_class_of;
    for (const auto& lt : labeled_test) test_class_of[{lt.traj->video_id, lt.traj->person_id}] = lt.effective_class;

    GridCell cell{parse_variant(variant), parse_arch(arch), parse_fusion(fusion)};
    nn::TrainConfig cfg = base_cfg;
    cfg.folds = folds;
    std::map<std::string, std::vector<Vec>> smote_by_class;
    const std::map<std::string, std::vector<Vec>>* smote_ptr = nullptr;
    if (!smote_file.empty()) {
        if (cell.variant != ClassifierVariant::decoded)
            throw ValidationError("--smote-file applies to the decoded variant only");
        smote_by_class = read_smote_segments(smote_file);
        smote_ptr = &smote_by_class;
    }
    fs::create_directories(out_dir);
    train_grid_cell(backbone, cell, labeled_train, labeled_test, test_class_of, cfg,
                    detail::cell_seed(seed, cell.id()), out_dir, meta_lines(), smote_ptr);
    std::cout << "trained " << cell.id() << " (" << folds << " folds) -> " << out_dir << "\n";
    for (int f = 0; f < folds; ++f) {
        const auto rows = read_predictions(
            (fs::path(out_dir) / "preds" / ("preds_" + cell.id() + "_fold" + std::to_string(f) + ".csv")).string());
        auto [cm, rep] = evaluate_predictions(rows);
        std::cout << "fold " << f << ": macro " << rep.macro_accuracy << ", weighted " << rep.weighted_accuracy
                  << "\n";
    }
    return 0;
}

int cmd_compare(const std::vector<std::string>& runs, std::string model_a, std::string model_b, double alpha) {
    if (runs.empty() || runs.size() > 2) throw ValidationError("compare: pass one or two run records via --runs");
    const RunRecord ra = load_run_record(runs[0]);
    const RunRecord rb = load_run_record(runs.size() == 2 ? runs[1] : runs[0]);
    auto pick = [](const RunRecord& r, std::string& id, const char* which) -> const ModelRunRecord* {
        if (id.empty()) {
            if (r.models.size() != 1)
                throw ValidationError(std::string("compare: run has several models; select one with ") + which);
            id = r.models.front().id;
        }
        const auto* m = r.find_model(id);
        if (!m) throw ValidationError("compare: model '" + id + "' not found in run record");
        return m;
    };
    const auto* ma = pick(ra, model_a, "--model-a");
    const auto* mb = pick(rb, model_b, "--model-b");
    const auto res = compare_models(ma->id, mb->id, ma->fold_weighted_accuracy, mb->fold_weighted_accuracy, alpha);
    std::printf("%s vs %s\n", res.model_a.c_str(), res.model_b.c_str());
    std::printf("normality p = %.6f -> %s\n", res.normality_p, to_string(res.chosen));
    std::printf("statistic = %.6f, p = %.6f\n", res.statistic, res.test_p);
    std::printf("null hypothesis (same distribution) %s at alpha = %.2f\n",
                res.reject_null ? "REJECTED" : "accepted", res.alpha);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajkit: skeleton-trajectory crime classification toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic trajectory corpus");
    std::string synth_out = "synth_data";
    int synth_n = 60;
    std::uint64_t synth_seed = 0;
    std::string synth_regimes;
    synth->add_option("--out-dir", synth_out, "output directory");
    synth->add_option("--per-class", synth_n, "trajectories per class");
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_option("--regimes", synth_regimes, "JSON file with motion regimes");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a dataset and write a canonical manifest");
    std::string ingest_manifest, ingest_out = ".";
    ingest->add_option("--manifest", ingest_manifest, "source manifest")->required();
    ingest->add_option("--out-dir", ingest_out, "output directory");

    // split
    auto* split = app.add_subcommand("split", "assign per-class train/test splits");
    std::string split_manifest, split_out = "manifest_split.txt";
    double split_ratio = 0.8;
    std::uint64_t split_seed = 0;
    split->add_option("--manifest", split_manifest, "input manifest")->required();
    split->add_option("--out", split_out, "output manifest");
    split->add_option("--ratio", split_ratio, "train fraction per class");
    split->add_option("--seed", split_seed, "random seed");

    // train-backbone
    auto* tb = app.add_subcommand("train-backbone", "train the reconstruction autoencoder on normal trajectories");
    std::string tb_manifest, tb_out = "model.tkbb";
    int tb_epochs = 60, tb_hidden = 16, tb_batch = 32;
    double tb_lr = 0.01;
    std::uint64_t tb_seed = 0;
    tb->add_option("--manifest", tb_manifest, "split manifest")->required();
    tb->add_option("--out", tb_out, "checkpoint path");
    tb->add_option("--epochs", tb_epochs, "training epochs");
    tb->add_option("--seed", tb_seed, "random seed");
    tb->add_option("--hidden", tb_hidden, "hidden units per branch");
    tb->add_option("--lr", tb_lr, "learning rate");
    tb->add_option("--batch", tb_batch, "batch size");

    // score
    auto* score = app.add_subcommand("score", "compute per-trajectory anomaly scores");
    std::string score_backbone, score_manifest, score_out = "scores.csv";
    score->add_option("--backbone", score_backbone, "backbone checkpoint")->required();
    score->add_option("--manifest", score_manifest, "split manifest")->required();
    score->add_option("--out", score_out, "output CSV");

    // make-labels
    auto* ml = app.add_subcommand("make-labels", "trajectory-level normal/abnormal ground truth");
    std::string ml_scores, ml_out = "labels.csv", ml_method = "gmm";
    std::vector<double> ml_candidates;
    int ml_max_iter = 100, ml_grid = 50;
    double ml_tol = 1e-3;
    std::uint64_t ml_seed = 0;
    ml->add_option("--scores", ml_scores, "scores CSV")->required();
    ml->add_option("--out", ml_out, "output labeling CSV");
    ml->add_option("--method", ml_method, "gmm|threshold");
    ml->add_option("--candidates", ml_candidates, "explicit threshold candidates");
    ml->add_option("--max-iter", ml_max_iter, "EM iteration cap");
    ml->add_option("--tol", ml_tol, "EM convergence threshold");
    ml->add_option("--grid-count", ml_grid, "auto candidate grid size");
    ml->add_option("--seed", ml_seed, "random seed");

    // augment
    auto* aug = app.add_subcommand("augment", "class-balancing augmentation (shift or smote)");
    std::string aug_method, aug_manifest, aug_labels, aug_out = "aug_out", aug_backbone;
    double aug_rho = 0.1;
    int aug_k = 5;
    std::uint64_t aug_seed = 0;
    aug->add_option("--method", aug_method, "shift|smote")->required();
    aug->add_option("--manifest", aug_manifest, "split manifest")->required();
    aug->add_option("--labels", aug_labels, "trajectory labeling CSV")->required();
    aug->add_option("--out-dir", aug_out, "output directory");
    aug->add_option("--seed", aug_seed, "random seed");
    aug->add_option("--rho", aug_rho, "shift randomness amplitude");
    aug->add_option("--k", aug_k, "smote neighbour count");
    aug->add_option("--backbone", aug_backbone, "backbone checkpoint (smote)");

    // train-clf
    auto* tc = app.add_subcommand("train-clf", "train one classifier cell with k-fold cross-validation");
    std::string tc_variant, tc_arch = "a3", tc_fusion = "late";
    std::string tc_backbone, tc_manifest, tc_labels, tc_out = "clf_out", tc_smote;
    int tc_folds = 3;
    std::uint64_t tc_seed = 0;
    nn::TrainConfig tc_cfg;
    tc->add_option("--variant", tc_variant, "mped-c|mped-nc|decoded")->required();
    tc->add_option("--arch", tc_arch, "a1|a2|a3");
    tc->add_option("--fusion", tc_fusion, "late|early-agg|early-cat");
    tc->add_option("--backbone", tc_backbone, "backbone checkpoint")->required();
    tc->add_option("--manifest", tc_manifest, "split manifest")->required();
    tc->add_option("--labels", tc_labels, "trajectory labeling CSV")->required();
    tc->add_option("--out-dir", tc_out, "output directory");
    tc->add_option("--folds", tc_folds, "cross-validation folds");
    tc->add_option("--seed", tc_seed, "random seed");
    tc->add_option("--epochs", tc_cfg.max_epochs, "max training epochs");
    tc->add_option("--lr", tc_cfg.learning_rate, "learning rate");
    tc->add_option("--batch", tc_cfg.batch_size, "batch size");
    tc->add_option("--patience", tc_cfg.patience, "early-stopping patience");
    tc->add_option("--smote-file", tc_smote, "balanced segment file (decoded variant)");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics and confusion artifacts from a predictions CSV");
    std::string ev_pred, ev_out = "report";
    ev->add_option("--pred", ev_pred, "predictions CSV")->required();
    ev->add_option("--out", ev_out, "output directory");

    // compare
    auto* cp = app.add_subcommand("compare", "statistical comparison of two models' fold accuracies");
    std::vector<std::string> cp_runs;
    std::string cp_a, cp_b;
    double cp_alpha = 0.05;
    cp->add_option("--runs", cp_runs, "one or two run_record.json files")->required();
    cp->add_option("--model-a", cp_a, "model id in the first run");
    cp->add_option("--model-b", cp_b, "model id in the second run");
    cp->add_option("--alpha", cp_alpha, "significance level");

    // report
    auto* rp = app.add_subcommand("report", "re-emit report files from a run record");
    std::string rp_run, rp_out = "report";
    rp->add_option("--run", rp_run, "run_record.json")->required();
    rp->add_option("--out", rp_out, "output directory");

    // run
    auto* rn = app.add_subcommand("run", "full pipeline: data -> labels -> classifiers -> report");
    std::string rn_config, rn_out;
    std::uint64_t rn_seed = static_cast<std::uint64_t>(-1);
    rn->add_option("--config", rn_config, "experiment config JSON (defaults used when omitted)");
    rn->add_option("--out-dir", rn_out, "override output directory");
    rn->add_option("--seed", rn_seed, "override seed");

    // reference
    auto* rf = app.add_subcommand("reference", "print published reference metrics for HR-Crime runs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_out, synth_n, synth_seed, synth_regimes);
        if (*ingest) return cmd_ingest(ingest_manifest, ingest_out);
        if (*split) return cmd_split(split_manifest, split_out, split_ratio, split_seed);
        if (*tb) return cmd_train_backbone(tb_manifest, tb_out, tb_epochs, tb_seed, tb_hidden, tb_lr, tb_batch);
        if (*score) return cmd_score(score_backbone, score_manifest, score_out);
        if (*ml)
            return cmd_make_labels(ml_scores, ml_out, ml_method, ml_candidates, ml_max_iter, ml_tol, ml_grid,
                                   ml_seed);
        if (*aug)
            return cmd_augment(aug_method, aug_manifest, aug_labels, aug_out, aug_seed, aug_rho, aug_k,
                               aug_backbone);
        if (*tc)
            return cmd_train_clf(tc_variant, tc_arch, tc_fusion, tc_backbone, tc_manifest, tc_labels, tc_out,
                                 tc_folds, tc_seed, tc_cfg, tc_smote);
        if (*ev) {
            evaluate_to_dir(ev_pred, ev_out);
            std::cout << "report written to " << ev_out << "\n";
            return 0;
        }
        if (*cp) return cmd_compare(cp_runs, cp_a, cp_b, cp_alpha);
        if (*rp) {
            emit_report(load_run_record(rp_run), rp_out);
            std::cout << "report written to " << rp_out << "\n";
            return 0;
        }
        if (*rn) {
            ExperimentConfig cfg;
            if (!rn_config.empty()) {
                std::ifstream in(rn_config);
                if (!in) throw ValidationError("cannot open config " + rn_config);
                cfg = config_from_json(json::parse(in));
            }
            if (!rn_out.empty()) cfg.out_dir = rn_out;
            if (rn_seed != static_cast<std::uint64_t>(-1)) cfg.seed = rn_seed;
            const auto run = run_pipeline(cfg);
            std::cout << "run complete: " << run.models.size() << " model(s), record at " << cfg.out_dir
                      << "/run_record.json\n";
            for (const auto& m : run.models) {
                double mean = 0;
                for (double w : m.fold_weighted_accuracy) mean += w;
                mean /= static_cast<double>(m.fold_weighted_accuracy.size());
                std::cout << "  " << m.id << ": mean weighted accuracy " << mean << "\n";
            }
            return 0;
        }
        if (*rf) {
            std::cout << reference::describe();
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
