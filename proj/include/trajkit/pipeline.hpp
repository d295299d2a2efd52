// Experiment orchestration: configuration, the staged ingest -> split ->
// train-backbone -> score -> make-labels -> augment -> train-clf -> evaluate ->
// compare -> report pipeline with content-hash caching, artifact persistence,
// and deterministic run records.
#pragma once

#include "trajkit/augmentation.hpp"
#include "trajkit/classifiers.hpp"
#include "trajkit/evaluation.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>

namespace trajkit {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct GridCell {
    ClassifierVariant variant = ClassifierVariant::mped_c;
    ArchitectureId arch = ArchitectureId::a3;
    FusionMode fusion = FusionMode::late;

    std::string id() const {
        std::string s = std::string(to_string(variant)) + "_" + to_string(arch);
        if (variant != ClassifierVariant::decoded) s += std::string("_") + to_string(fusion);
        return s;
    }
};

inline ClassifierVariant parse_variant(const std::string& s) {
    if (s == "mped-c") return ClassifierVariant::mped_c;
    if (s == "mped-nc") return ClassifierVariant::mped_nc;
    if (s == "decoded") return ClassifierVariant::decoded;
    throw ValidationError("unknown classifier variant '" + s + "' (mped-c|mped-nc|decoded)");
}

inline ArchitectureId parse_arch(const std::string& s) {
    if (s == "a1") return ArchitectureId::a1;
    if (s == "a2") return ArchitectureId::a2;
    if (s == "a3") return ArchitectureId::a3;
    throw ValidationError("unknown architecture '" + s + "' (a1|a2|a3)");
}

inline FusionMode parse_fusion(const std::string& s) {
    if (s == "late") return FusionMode::late;
    if (s == "early-agg") return FusionMode::early_aggregate;
    if (s == "early-cat") return FusionMode::early_concat;
    throw ValidationError("unknown fusion mode '" + s + "' (late|early-agg|early-cat)");
}

inline LabelMethod parse_label_method(const std::string& s) {
    if (s == "gmm") return LabelMethod::unsupervised;
    if (s == "threshold") return LabelMethod::supervised;
    throw ValidationError("unknown labeling method '" + s + "' (gmm|threshold)");
}

struct ExperimentConfig {
    std::string data_dir;  // directory with manifest.txt + trajectory CSVs; empty -> synthetic corpus
    std::string out_dir = "runs/out";
    std::uint64_t seed = 0;

    // synthetic corpus (when data_dir is empty)
    int synth_per_class = 60;
    std::vector<MotionRegime> regimes;  // empty -> built-in default set

    double split_ratio = 0.8;

    BackboneConfig backbone;
    int backbone_epochs = 60;

    LabelMethod label_method = LabelMethod::unsupervised;
    int gmm_max_iter = 100;
    double gmm_tol = 1e-3;
    std::vector<double> threshold_candidates;  // empty -> geometric grid
    int candidate_count = 50;

    std::string augment = "none";  // none | shift | smote
    double shift_rho = 0.1;
    int smote_k = 5;

    std::vector<GridCell> grid{{ClassifierVariant::mped_c, ArchitectureId::a3, FusionMode::early_aggregate}};
    nn::TrainConfig train;

    double compare_alpha = 0.05;
};

/// Clearly separable default regimes for desk-scale verification runs: the
/// normal regime moves gently so the backbone learns a tight manifold, the
/// crime regimes move fast or oscillate at frequencies the backbone never saw.
inline std::vector<MotionRegime> default_regimes() {
    return {
        {"normal", 0.001, 0.0003, 0.002, 0.04, 0.0005, 48},
        {"dash", 0.012, 0.0, 0.002, 0.02, 0.0005, 48},
        {"spin", 0.0, 0.0, 0.05, 0.30, 0.0005, 48},
        {"tremor", 0.0, 0.008, 0.03, 0.50, 0.0005, 48},
    };
}

inline void to_json(json& j, const MotionRegime& r) {
    j = json{{"class_label", r.class_label}, {"drift_x", r.drift_x},   {"drift_y", r.drift_y},
             {"osc_amplitude", r.osc_amplitude}, {"osc_frequency", r.osc_frequency},
             {"jitter", r.jitter},           {"frames", r.frames}};
}

inline void from_json(const json& j, MotionRegime& r) {
    r.class_label = j.at("class_label").get<std::string>();
    r.drift_x = j.value("drift_x", 0.0);
    r.drift_y = j.value("drift_y", 0.0);
    r.osc_amplitude = j.value("osc_amplitude", 0.0);
    r.osc_frequency = j.value("osc_frequency", 0.0);
    r.jitter = j.value("jitter", 0.0);
    r.frames = j.value("frames", 48);
}

inline json config_to_json(const ExperimentConfig& c) {
    json grid = json::array();
    for (const auto& g : c.grid)
        grid.push_back({{"variant", to_string(g.variant)}, {"arch", to_string(g.arch)}, {"fusion", to_string(g.fusion)}});
    return json{
        {"data_dir", c.data_dir},
        {"out_dir", c.out_dir},
        {"seed", c.seed},
        {"synthetic", {{"per_class", c.synth_per_class}, {"regimes", c.regimes}}},
        {"split", {{"ratio", c.split_ratio}}},
        {"backbone",
         {{"hidden", c.backbone.hidden},
          {"epochs", c.backbone_epochs},
          {"learning_rate", c.backbone.learning_rate},
          {"batch_size", c.backbone.batch_size}}},
        {"ground_truth",
         {{"method", to_string(c.label_method)},
          {"max_iter", c.gmm_max_iter},
          {"tol", c.gmm_tol},
          {"candidates", c.threshold_candidates},
          {"candidate_count", c.candidate_count}}},
        {"augmentation", {{"method", c.augment}, {"rho", c.shift_rho}, {"k", c.smote_k}}},
        {"classifiers",
         {{"grid", grid},
          {"train",
           {{"learning_rate", c.train.learning_rate},
            {"max_epochs", c.train.max_epochs},
            {"patience", c.train.patience},
            {"batch_size", c.train.batch_size},
            {"validation_fraction", c.train.validation_fraction},
            {"folds", c.train.folds}}}}},
        {"evaluation", {{"alpha", c.compare_alpha}}},
    };
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.data_dir = j.value("data_dir", std::string());
    c.out_dir = j.value("out_dir", std::string("runs/out"));
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        c.synth_per_class = s.value("per_class", 60);
        if (s.contains("regimes")) c.regimes = s.at("regimes").get<std::vector<MotionRegime>>();
    }
    if (j.contains("split")) c.split_ratio = j.at("split").value("ratio", 0.8);
    if (j.contains("backbone")) {
        const auto& b = j.at("backbone");
        c.backbone.hidden = b.value("hidden", 16);
        c.backbone_epochs = b.value("epochs", 30);
        c.backbone.learning_rate = b.value("learning_rate", 0.01);
        c.backbone.batch_size = b.value("batch_size", 32);
    }
    if (j.contains("ground_truth")) {
        const auto& g = j.at("ground_truth");
        c.label_method = parse_label_method(g.value("method", std::string("gmm")));
        c.gmm_max_iter = g.value("max_iter", 100);
        c.gmm_tol = g.value("tol", 1e-3);
        if (g.contains("candidates")) c.threshold_candidates = g.at("candidates").get<std::vector<double>>();
        c.candidate_count = g.value("candidate_count", 50);
    }
    if (j.contains("augmentation")) {
        const auto& a = j.at("augmentation");
        c.augment = a.value("method", std::string("none"));
        if (c.augment != "none" && c.augment != "shift" && c.augment != "smote")
            throw ValidationError("unknown augmentation method '" + c.augment + "'");
        c.shift_rho = a.value("rho", 0.1);
        c.smote_k = a.value("k", 5);
    }
    if (j.contains("classifiers")) {
        const auto& cl = j.at("classifiers");
        if (cl.contains("grid")) {
            c.grid.clear();
            for (const auto& g : cl.at("grid"))
                c.grid.push_back({parse_variant(g.at("variant").get<std::string>()),
                                  parse_arch(g.value("arch", std::string("a3"))),
                                  parse_fusion(g.value("fusion", std::string("late")))});
        }
        if (cl.contains("train")) {
            const auto& t = cl.at("train");
            c.train.learning_rate = t.value("learning_rate", 0.001);
            c.train.max_epochs = t.value("max_epochs", 25);
            c.train.patience = t.value("patience", 3);
            c.train.batch_size = t.value("batch_size", 64);
            c.train.validation_fraction = t.value("validation_fraction", 0.2);
            c.train.folds = t.value("folds", 3);
        }
    }
    if (j.contains("evaluation")) c.compare_alpha = j.at("evaluation").value("alpha", 0.05);
    return c;
}

inline std::string config_hash(const ExperimentConfig& c) { return hash_hex(hash_bytes(config_to_json(c).dump())); }

// ---------------------------------------------------------------------------
// Artifact IO: scores and predictions
// ---------------------------------------------------------------------------

inline void write_scores(const std::vector<AnomalyScore>& scores, const std::string& path,
                         const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_scores: cannot write " + path);
    for (const auto& m : metadata) out << "# " << m << '\n';
    out << "video_id,person_id,class_label,alpha,n_segments\n";
    for (const auto& s : scores)
        out << s.video_id << ',' << s.person_id << ',' << s.class_label << ',' << detail::format_double(s.alpha)
            << ',' << s.segment_count << '\n';
}

inline std::vector<AnomalyScore> read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_scores: cannot open " + path);
    std::vector<AnomalyScore> out;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto f = detail::split_csv(line);
        const std::string ctx = "(" + path + ", line " + std::to_string(lineno) + ")";
        if (f.size() != 5) throw ValidationError("read_scores: expected 5 columns " + ctx);
        AnomalyScore s;
        s.video_id = std::string(f[0]);
        s.person_id = std::string(f[1]);
        s.class_label = std::string(f[2]);
        s.alpha = detail::parse_double(f[3], ctx);
        s.segment_count = static_cast<std::size_t>(detail::parse_int(f[4], ctx));
        out.push_back(std::move(s));
    }
    return out;
}

/// Per-segment predictions: video_id,person_id,start_frame,p_1..p_C,pred,true.
struct PredictionRows {
    std::vector<std::string> classes;
    std::vector<SegmentRef> refs;
    std::vector<Vec> probabilities;
    std::vector<int> predicted;
    std::vector<int> true_labels;
};

inline void write_predictions(const PredictionRows& rows, const std::string& path,
                              const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_predictions: cannot write " + path);
    for (const auto& m : metadata) out << "# " << m << '\n';
    std::string classes_line = "# classes=";
    for (std::size_t i = 0; i < rows.classes.size(); ++i) {
        if (i) classes_line += ';';
        classes_line += rows.classes[i];
    }
    out << classes_line << '\n';
    out << "video_id,person_id,start_frame";
    for (std::size_t c = 1; c <= rows.classes.size(); ++c) out << ",p_" << c;
    out << ",pred,true\n";
    for (std::size_t i = 0; i < rows.refs.size(); ++i) {
        out << rows.refs[i].video_id << ',' << rows.refs[i].person_id << ',' << rows.refs[i].start_frame;
        for (Eigen::Index c = 0; c < rows.probabilities[i].size(); ++c)
            out << ',' << detail::format_double(rows.probabilities[i](c));
        out << ',' << rows.predicted[i] << ',' << rows.true_labels[i] << '\n';
    }
}

inline PredictionRows read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_predictions: cannot open " + path);
    PredictionRows rows;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# classes=", 0) == 0) {
            std::string rest = line.substr(10);
            std::size_t start = 0;
            while (true) {
                const auto pos = rest.find(';', start);
                rows.classes.push_back(rest.substr(start, pos == std::string::npos ? pos : pos - start));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
            continue;
        }
        if (line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto f = detail::split_csv(line);
        const std::string ctx = "(" + path + ", line " + std::to_string(lineno) + ")";
        if (rows.classes.empty()) throw ValidationError("read_predictions: missing '# classes=' metadata in " + path);
        const std::size_t expected = 3 + rows.classes.size() + 2;
        if (f.size() != expected)
            throw ValidationError("read_predictions: expected " + std::to_string(expected) + " columns " + ctx);
        SegmentRef ref{std::string(f[0]), std::string(f[1]), detail::parse_int(f[2], ctx)};
        Vec p(static_cast<Eigen::Index>(rows.classes.size()));
        for (std::size_t c = 0; c < rows.classes.size(); ++c)
            p(static_cast<Eigen::Index>(c)) = detail::parse_double(f[3 + c], ctx);
        rows.refs.push_back(std::move(ref));
        rows.probabilities.push_back(std::move(p));
        rows.predicted.push_back(static_cast<int>(detail::parse_int(f[3 + rows.classes.size()], ctx)));
        rows.true_labels.push_back(static_cast<int>(detail::parse_int(f[4 + rows.classes.size()], ctx)));
    }
    if (rows.classes.empty()) throw ValidationError("read_predictions: no class metadata in " + path);
    return rows;
}

// ---------------------------------------------------------------------------
// Classifier persistence: TKNN checkpoints plus a JSON descriptor
// ---------------------------------------------------------------------------

inline void save_classifier(const ClassifierModel& model, const std::string& prefix) {
    json meta{{"toolkit", kVersion},
              {"variant", to_string(model.variant)},
              {"arch", to_string(model.arch)},
              {"fusion", to_string(model.fusion)},
              {"classes", model.classes},
              {"backbone_checksum", hash_hex(model.backbone_checksum)},
              {"latent_hidden", model.latent_hidden}};
    if (model.variant != ClassifierVariant::decoded && model.fusion == FusionMode::late) {
        model.net_local.save(prefix + "_local.tknn");
        model.net_global.save(prefix + "_global.tknn");
    } else {
        model.net.save(prefix + ".tknn");
    }
    if (model.fusion == FusionMode::early_aggregate && model.variant != ClassifierVariant::decoded) {
        meta["w_local"] = std::vector<double>(model.w_local.data(), model.w_local.data() + model.w_local.size());
        meta["w_global"] = std::vector<double>(model.w_global.data(), model.w_global.data() + model.w_global.size());
    }
    std::ofstream out(prefix + ".json");
    if (!out) throw ValidationError("save_classifier: cannot write " + prefix + ".json");
    out << meta.dump(2) << '\n';
}

inline ClassifierModel load_classifier(const std::string& prefix) {
    std::ifstream in(prefix + ".json");
    if (!in) throw ValidationError("load_classifier: cannot open " + prefix + ".json");
    json meta = json::parse(in);
    ClassifierModel model;
    model.variant = parse_variant(meta.at("variant").get<std::string>());
    model.arch = parse_arch(meta.at("arch").get<std::string>());
    model.fusion = parse_fusion(meta.at("fusion").get<std::string>());
    model.classes = meta.at("classes").get<std::vector<std::string>>();
    model.latent_hidden = meta.value("latent_hidden", 0);
    model.backbone_checksum = std::stoull(meta.at("backbone_checksum").get<std::string>(), nullptr, 16);
    if (model.variant != ClassifierVariant::decoded && model.fusion == FusionMode::late) {
        model.net_local = nn::Network::load(prefix + "_local.tknn");
        model.net_global = nn::Network::load(prefix + "_global.tknn");
    } else {
        model.net = nn::Network::load(prefix + ".tknn");
    }
    if (meta.contains("w_local")) {
        const auto wl = meta.at("w_local").get<std::vector<double>>();
        const auto wg = meta.at("w_global").get<std::vector<double>>();
        model.w_local = Eigen::Map<const Eigen::RowVectorXd>(wl.data(), static_cast<Eigen::Index>(wl.size()));
        model.w_global = Eigen::Map<const Eigen::RowVectorXd>(wg.data(), static_cast<Eigen::Index>(wg.size()));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Run record
// ---------------------------------------------------------------------------

inline void to_json(json& j, const MetricsReport& m) {
    j = json{{"overall_accuracy", m.overall_accuracy},
             {"macro_accuracy", m.macro_accuracy},
             {"weighted_accuracy", m.weighted_accuracy},
             {"weighted_precision", m.weighted_precision},
             {"weighted_recall", m.weighted_recall},
             {"weighted_f1", m.weighted_f1},
             {"iba", m.iba},
             {"per_class_recall", m.per_class_recall},
             {"total", m.total}};
    if (m.top3) j["top3"] = *m.top3;
    if (m.top5) j["top5"] = *m.top5;
}

inline void from_json(const json& j, MetricsReport& m) {
    m.overall_accuracy = j.at("overall_accuracy").get<double>();
    m.macro_accuracy = j.at("macro_accuracy").get<double>();
    m.weighted_accuracy = j.at("weighted_accuracy").get<double>();
    m.weighted_precision = j.at("weighted_precision").get<double>();
    m.weighted_recall = j.at("weighted_recall").get<double>();
    m.weighted_f1 = j.at("weighted_f1").get<double>();
    m.iba = j.at("iba").get<double>();
    m.per_class_recall = j.at("per_class_recall").get<std::vector<double>>();
    m.total = j.at("total").get<std::int64_t>();
    if (j.contains("top3")) m.top3 = j.at("top3").get<double>();
    if (j.contains("top5")) m.top5 = j.at("top5").get<double>();
}

inline void to_json(json& j, const ComparisonResult& c) {
    j = json{{"model_a", c.model_a},       {"model_b", c.model_b}, {"normality_p", c.normality_p},
             {"chosen", to_string(c.chosen)}, {"statistic", c.statistic}, {"test_p", c.test_p},
             {"alpha", c.alpha},           {"reject_null", c.reject_null}};
}

inline void from_json(const json& j, ComparisonResult& c) {
    c.model_a = j.at("model_a").get<std::string>();
    c.model_b = j.at("model_b").get<std::string>();
    c.normality_p = j.at("normality_p").get<double>();
    c.chosen = j.at("chosen").get<std::string>() == "paired-t" ? ChosenTest::paired_t : ChosenTest::wilcoxon;
    c.statistic = j.at("statistic").get<double>();
    c.test_p = j.at("test_p").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.reject_null = j.at("reject_null").get<bool>();
}

struct ModelRunRecord {
    std::string id;
    std::vector<std::string> classes;
    std::vector<MetricsReport> fold_metrics;       // segment-level, fixed test split
    std::vector<MetricsReport> fold_traj_metrics;  // trajectory-level (majority vote)
    std::vector<double> fold_weighted_accuracy;
    IMat pooled_confusion;  // segment-level counts summed over folds
};

struct StageInfo {
    std::string name;
    double seconds = 0.0;
    bool cached = false;
};

struct RunRecord {
    std::string toolkit = kVersion;
    std::string config_hash;
    json config;
    std::vector<ModelRunRecord> models;
    std::vector<ComparisonResult> comparisons;
    std::vector<std::string> comparison_notes;  // skipped/degenerate pairs
    std::vector<StageInfo> stages;
    std::vector<std::pair<std::string, std::string>> artifacts;  // name -> content hash
    json ground_truth_summary;

    const ModelRunRecord* find_model(const std::string& id) const {
        for (const auto& m : models)
            if (m.id == id) return &m;
        return nullptr;
    }
};

inline json run_record_to_json(const RunRecord& r) {
    json models = json::array();
    for (const auto& m : r.models) {
        json cm = json::array();
        for (Eigen::Index i = 0; i < m.pooled_confusion.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index c = 0; c < m.pooled_confusion.cols(); ++c) row.push_back(m.pooled_confusion(i, c));
            cm.push_back(row);
        }
        models.push_back({{"id", m.id},
                          {"classes", m.classes},
                          {"fold_metrics", m.fold_metrics},
                          {"fold_traj_metrics", m.fold_traj_metrics},
                          {"fold_weighted_accuracy", m.fold_weighted_accuracy},
                          {"pooled_confusion", cm}});
    }
    json stages = json::array();
    for (const auto& s : r.stages) stages.push_back({{"name", s.name}, {"seconds", s.seconds}, {"cached", s.cached}});
    json artifacts = json::object();
    for (const auto& [k, v] : r.artifacts) artifacts[k] = v;
    return json{{"toolkit", r.toolkit},
                {"config_hash", r.config_hash},
                {"config", r.config},
                {"models", models},
                {"comparisons", r.comparisons},
                {"comparison_notes", r.comparison_notes},
                {"stages", stages},
                {"artifacts", artifacts},
                {"ground_truth", r.ground_truth_summary}};
}

inline RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.toolkit = j.value("toolkit", std::string());
    r.config_hash = j.value("config_hash", std::string());
    r.config = j.value("config", json::object());
    for (const auto& jm : j.value("models", json::array())) {
        ModelRunRecord m;
        m.id = jm.at("id").get<std::string>();
        m.classes = jm.at("classes").get<std::vector<std::string>>();
        m.fold_metrics = jm.at("fold_metrics").get<std::vector<MetricsReport>>();
        m.fold_traj_metrics = jm.at("fold_traj_metrics").get<std::vector<MetricsReport>>();
        m.fold_weighted_accuracy = jm.at("fold_weighted_accuracy").get<std::vector<double>>();
        const auto& cm = jm.at("pooled_confusion");
        const auto rows = cm.size();
        m.pooled_confusion = IMat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < rows; ++c)
                m.pooled_confusion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    cm[i][c].get<std::int64_t>();
        r.models.push_back(std::move(m));
    }
    for (const auto& jc : j.value("comparisons", json::array())) r.comparisons.push_back(jc.get<ComparisonResult>());
    r.comparison_notes = j.value("comparison_notes", std::vector<std::string>{});
    for (const auto& js : j.value("stages", json::array()))
        r.stages.push_back({js.at("name").get<std::string>(), js.at("seconds").get<double>(),
                            js.at("cached").get<bool>()});
    const json artifacts = j.value("artifacts", json::object());
    for (const auto& [k, v] : artifacts.items()) r.artifacts.emplace_back(k, v.get<std::string>());
    r.ground_truth_summary = j.value("ground_truth", json::object());
    return r;
}

inline RunRecord load_run_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("load_run_record: cannot open " + path);
    return run_record_from_json(json::parse(in));
}

// ---------------------------------------------------------------------------
// Stage caching
// ---------------------------------------------------------------------------

namespace detail {

/// A stage is up to date when its stamp records the same input hash and every
/// output file still matches the hash recorded at commit time.
class StageCache {
public:
    explicit StageCache(fs::path out_dir) : dir_(std::move(out_dir)) {}

    bool fresh(const std::string& name, std::uint64_t input_hash,
               const std::vector<fs::path>& outputs) const {
        const fs::path stamp = dir_ / ("stage_" + name + ".stamp");
        std::ifstream in(stamp);
        if (!in) return false;
        json j;
        try {
            j = json::parse(in);
        } catch (...) {
            return false;
        }
        if (j.value("input", std::string()) != hash_hex(input_hash)) return false;
        if (j.value("toolkit", std::string()) != kVersion) return false;
        const auto outs = j.value("outputs", json::object());
        for (const auto& p : outputs) {
            if (!fs::exists(p)) return false;
            const auto it = outs.find(p.filename().string());
            if (it == outs.end() || it->get<std::string>() != hash_hex(hash_file(p.string()))) return false;
        }
        return true;
    }

    void commit(const std::string& name, std::uint64_t input_hash, const std::vector<fs::path>& outputs) const {
        json outs = json::object();
        for (const auto& p : outputs) outs[p.filename().string()] = hash_hex(hash_file(p.string()));
        json j{{"input", hash_hex(input_hash)}, {"toolkit", kVersion}, {"outputs", outs}};
        std::ofstream out(dir_ / ("stage_" + name + ".stamp"));
        out << j.dump(2) << '\n';
    }

private:
    fs::path dir_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Data loading helpers
// ---------------------------------------------------------------------------

/// Loads every manifest entry; paths are resolved against base_dir.
inline std::vector<Trajectory> load_trajectories(const DatasetManifest& manifest, const fs::path& base_dir) {
    std::vector<Trajectory> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        const auto res_it = manifest.resolutions.find(e.video_id);
        if (res_it == manifest.resolutions.end())
            throw ValidationError("load_trajectories: no resolution for video " + e.video_id);
        fs::path p = e.path;
        if (p.is_relative()) p = base_dir / p;
        out.push_back(ingest_trajectory(p.string(), res_it->second, e.video_id, e.person_id, e.class_label));
    }
    return out;
}

inline std::uint64_t hash_manifest_data(const DatasetManifest& manifest, const fs::path& base_dir) {
    Fnv1a h;
    for (const auto& e : manifest.entries) {
        fs::path p = e.path;
        if (p.is_relative()) p = base_dir / p;
        h.update(e.video_id);
        h.update(e.person_id);
        h.update(e.class_label);
        h.update(std::string(to_string(e.split)));
        h.update(hash_file(p.string()));
    }
    for (const auto& [vid, res] : manifest.resolutions) {
        h.update(vid);
        h.update(static_cast<std::uint64_t>(res.width));
        h.update(static_cast<std::uint64_t>(res.height));
    }
    return h.digest();
}

// ---------------------------------------------------------------------------
// Evaluation of prediction artifacts
// ---------------------------------------------------------------------------

inline std::pair<ConfusionMatrix, MetricsReport> evaluate_predictions(const PredictionRows& rows) {
    if (rows.refs.empty()) throw ValidationError("evaluate_predictions: no rows");
    ConfusionMatrix cm = confusion(rows.true_labels, rows.predicted, rows.classes);
    SampleProbs sp{rows.probabilities, rows.true_labels};
    return {cm, metrics(cm, &sp)};
}

inline void write_metrics_json(const MetricsReport& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_metrics_json: cannot write " + path);
    json j = m;
    j["toolkit"] = kVersion;
    out << j.dump(2) << '\n';
}

inline std::string metrics_text(const MetricsReport& m) {
    char buf[512];
    std::string s;
    std::snprintf(buf, sizeof buf, "samples            %lld\n", static_cast<long long>(m.total));
    s += buf;
    std::snprintf(buf, sizeof buf, "overall accuracy   %.4f\n", m.overall_accuracy);
    s += buf;
    std::snprintf(buf, sizeof buf, "macro accuracy     %.4f\n", m.macro_accuracy);
    s += buf;
    std::snprintf(buf, sizeof buf, "weighted accuracy  %.4f\n", m.weighted_accuracy);
    s += buf;
    std::snprintf(buf, sizeof buf, "weighted precision %.4f\n", m.weighted_precision);
    s += buf;
    std::snprintf(buf, sizeof buf, "weighted recall    %.4f\n", m.weighted_recall);
    s += buf;
    std::snprintf(buf, sizeof buf, "weighted f-score   %.4f\n", m.weighted_f1);
    s += buf;
    if (m.top3) {
        std::snprintf(buf, sizeof buf, "top-3 accuracy     %.4f\n", *m.top3);
        s += buf;
    }
    if (m.top5) {
        std::snprintf(buf, sizeof buf, "top-5 accuracy     %.4f\n", *m.top5);
        s += buf;
    }
    std::snprintf(buf, sizeof buf, "iba                %.4f\n", m.iba);
    s += buf;
    return s;
}

/// CLI `evaluate`: metrics tables plus confusion CSV/SVG from one predictions file.
inline void evaluate_to_dir(const std::string& pred_csv, const std::string& out_dir) {
    const PredictionRows rows = read_predictions(pred_csv);
    auto [cm, rep] = evaluate_predictions(rows);
    fs::create_directories(out_dir);
    const fs::path dir = out_dir;
    write_metrics_json(rep, (dir / "metrics.json").string());
    std::ofstream txt(dir / "metrics.txt");
    txt << metrics_text(rep);
    write_confusion_csv(cm, (dir / "confusion.csv").string(), {std::string(kVersion)});
    write_confusion_svg(cm, (dir / "confusion.svg").string());
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() == 1) return {mean, 0.0};
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// Metrics tables (CSV + text), one confusion CSV/SVG per model (fold-pooled),
/// and the pairwise comparison summary. Byte-deterministic for a fixed record.
inline void emit_report(const RunRecord& run, const std::string& out_dir) {
    if (run.models.empty()) throw ValidationError("emit_report: run has no evaluated models");
    fs::create_directories(out_dir);
    const fs::path dir = out_dir;

    {
        std::ofstream csv(dir / "metrics_table.csv");
        if (!csv) throw ValidationError("emit_report: cannot write metrics_table.csv");
        csv << "# " << run.toolkit << " config=" << run.config_hash << '\n';
        csv << "model,level,fold,overall_accuracy,macro_accuracy,weighted_accuracy,weighted_precision,"
               "weighted_recall,weighted_f1,top3,top5,iba,samples\n";
        auto row = [&](const std::string& id, const char* level, int fold, const MetricsReport& m) {
            csv << id << ',' << level << ',' << fold << ',' << detail::format_double(m.overall_accuracy) << ','
                << detail::format_double(m.macro_accuracy) << ',' << detail::format_double(m.weighted_accuracy)
                << ',' << detail::format_double(m.weighted_precision) << ','
                << detail::format_double(m.weighted_recall) << ',' << detail::format_double(m.weighted_f1) << ','
                << (m.top3 ? detail::format_double(*m.top3) : "") << ','
                << (m.top5 ? detail::format_double(*m.top5) : "") << ',' << detail::format_double(m.iba) << ','
                << m.total << '\n';
        };
        for (const auto& m : run.models) {
            for (std::size_t f = 0; f < m.fold_metrics.size(); ++f)
                row(m.id, "segment", static_cast<int>(f), m.fold_metrics[f]);
            for (std::size_t f = 0; f < m.fold_traj_metrics.size(); ++f)
                row(m.id, "trajectory", static_cast<int>(f), m.fold_traj_metrics[f]);
        }
    }

    {
        std::ofstream txt(dir / "metrics_table.txt");
        txt << "model comparison over " << run.models.front().fold_metrics.size() << " folds ("
            << run.toolkit << ", config " << run.config_hash << ")\n\n";
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-28s %-18s %-18s %-18s %-18s\n", "model", "macro acc",
                      "weighted acc", "weighted f1", "top-3");
        txt << buf;
        for (const auto& m : run.models) {
            std::vector<double> macro, wacc, wf1, top3;
            for (const auto& fm : m.fold_metrics) {
                macro.push_back(fm.macro_accuracy);
                wacc.push_back(fm.weighted_accuracy);
                wf1.push_back(fm.weighted_f1);
                if (fm.top3) top3.push_back(*fm.top3);
            }
            const auto [m1, s1] = detail::mean_std(macro);
            const auto [m2, s2] = detail::mean_std(wacc);
            const auto [m3, s3] = detail::mean_std(wf1);
            const auto [m4, s4] = detail::mean_std(top3);
            std::snprintf(buf, sizeof buf, "%-28s %.3f +/- %.3f    %.3f +/- %.3f    %.3f +/- %.3f    %.3f +/- %.3f\n",
                          m.id.c_str(), m1, s1, m2, s2, m3, s3, m4, s4);
            txt << buf;
        }
    }

    for (const auto& m : run.models) {
        ConfusionMatrix cm;
        cm.classes = m.classes;
        cm.counts = m.pooled_confusion;
        write_confusion_csv(cm, (dir / ("confusion_" + m.id + ".csv")).string(),
                            {std::string(run.toolkit) + " config=" + run.config_hash});
        write_confusion_svg(cm, (dir / ("confusion_" + m.id + ".svg")).string());
    }

    {
        std::ofstream txt(dir / "comparisons.txt");
        txt << "pairwise model comparisons (alpha-routed normality -> paired-t / wilcoxon)\n\n";
        char buf[512];
        for (const auto& c : run.comparisons) {
            std::snprintf(buf, sizeof buf,
                          "%s vs %s: normality p=%.4f -> %s, statistic=%.4f, p=%.4f, null %s at alpha=%.2f\n",
                          c.model_a.c_str(), c.model_b.c_str(), c.normality_p, to_string(c.chosen), c.statistic,
                          c.test_p, c.reject_null ? "REJECTED" : "accepted", c.alpha);
            txt << buf;
        }
        for (const auto& note : run.comparison_notes) txt << note << '\n';
    }
}

// ---------------------------------------------------------------------------
// The pipeline
// ---------------------------------------------------------------------------

namespace detail {

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

inline std::uint64_t cell_seed(std::uint64_t base, const std::string& cell_id) {
    return base ^ hash_bytes(cell_id);
}

/// Writes the per-segment predictions plus the trajectory-level majority-vote
/// file for one fold. Trajectory rows use the mean segment probabilities.
inline void write_fold_predictions(
    const PredictionSet& preds, const std::vector<int>& true_labels, const std::vector<std::string>& classes,
    const std::map<std::pair<std::string, std::string>, std::string>& test_class_of, const fs::path& out,
    const std::string& id, int fold, const std::vector<std::string>& meta) {
    PredictionRows rows;
    rows.classes = classes;
    rows.refs = preds.refs;
    rows.probabilities = preds.probabilities;
    rows.predicted = preds.predicted;
    rows.true_labels = true_labels;
    write_predictions(rows, (out / "preds" / ("preds_" + id + "_fold" + std::to_string(fold) + ".csv")).string(),
                      meta);

    const auto votes = majority_vote(preds);
    PredictionRows trows;
    trows.classes = classes;
    for (const auto& v : votes) {
        const auto it = test_class_of.find({v.video_id, v.person_id});
        if (it == test_class_of.end()) continue;
        const auto cit = std::find(classes.begin(), classes.end(), it->second);
        if (cit == classes.end()) continue;
        trows.refs.push_back({v.video_id, v.person_id, 0});
        trows.probabilities.push_back(v.mean_probs);
        trows.predicted.push_back(v.label);
        trows.true_labels.push_back(static_cast<int>(cit - classes.begin()));
    }
    write_predictions(trows,
                      (out / "preds" / ("trajpreds_" + id + "_fold" + std::to_string(fold) + ".csv")).string(),
                      meta);
}

}  // namespace detail

/// SMOTE artifact: one row per (possibly synthetic) flattened segment.
inline void write_smote_segments(const std::map<std::string, std::vector<Vec>>& by_class,
                                 const std::string& path, const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_smote_segments: cannot write " + path);
    for (const auto& m : metadata) out << "# " << m << '\n';
    out << "class,values...\n";
    for (const auto& [cls, vecs] : by_class)
        for (const auto& v : vecs) {
            out << cls;
            for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << detail::format_double(v(i));
            out << '\n';
        }
}

inline std::map<std::string, std::vector<Vec>> read_smote_segments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_smote_segments: cannot open " + path);
    std::map<std::string, std::vector<Vec>> out;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto f = detail::split_csv(line);
        const std::string ctx = "(" + path + ", line " + std::to_string(lineno) + ")";
        if (f.size() < 2) throw ValidationError("read_smote_segments: malformed row " + ctx);
        Vec v(static_cast<Eigen::Index>(f.size() - 1));
        for (std::size_t i = 1; i < f.size(); ++i)
            v(static_cast<Eigen::Index>(i - 1)) = detail::parse_double(f[i], ctx);
        out[std::string(f[0])].push_back(std::move(v));
    }
    return out;
}

/// Trains one grid cell: k stratified folds on the training data (fold = the
/// early-stopping validation set), evaluates every fold model on the unchanged
/// test set, and writes per-fold predictions, trajectory votes and checkpoints
/// under out/preds and out/models.
inline void train_grid_cell(const BackboneModel& backbone, const GridCell& cell,
                            const std::vector<LabeledTrajectory>& labeled_train,
                            const std::vector<LabeledTrajectory>& labeled_test,
                            const std::map<std::pair<std::string, std::string>, std::string>& test_class_of,
                            const nn::TrainConfig& train_cfg, std::uint64_t cseed, const fs::path& out,
                            const std::vector<std::string>& meta,
                            const std::map<std::string, std::vector<Vec>>* smote_by_class = nullptr) {
    const std::string id = cell.id();
    fs::create_directories(out / "preds");
    fs::create_directories(out / "models");
    if (cell.variant == ClassifierVariant::decoded) {
        DecodedDataset ds_train;
        if (smote_by_class) {
            for (const auto& [cls, vecs] : *smote_by_class) ds_train.classes.push_back(cls);
            for (const auto& [cls, vecs] : *smote_by_class) {
                const int li = detail::class_index(ds_train.classes, cls);
                for (std::size_t i = 0; i < vecs.size(); ++i) {
                    ds_train.inputs.push_back(unflatten_segment(vecs[i]));
                    ds_train.labels.push_back(li);
                    ds_train.refs.push_back({"smote_" + cls, "s", static_cast<std::int64_t>(i)});
                }
            }
        } else {
            ds_train = build_decoded_dataset(backbone, labeled_train);
        }
        const auto ds_test = build_decoded_dataset(backbone, labeled_test, &ds_train.classes);
        const auto folds = nn::kfold_split(ds_train.labels.size(), train_cfg.folds, ds_train.labels, cseed);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            nn::TrainConfig cfg = train_cfg;
            cfg.seed = cseed ^ (0x9e3779b97f4a7c15ULL * (f + 1));
            const auto model = train_decoded(backbone, ds_train, cfg, &folds[f].val_idx);
            save_classifier(model, (out / "models" / ("clf_" + id + "_fold" + std::to_string(f))).string());
            const auto preds = predict_decoded(model, ds_test);
            detail::write_fold_predictions(preds, ds_test.labels, ds_train.classes, test_class_of, out, id,
                                           static_cast<int>(f), meta);
        }
    } else {
        const auto ds_train = build_encoded_dataset(backbone, labeled_train, cell.variant, cseed);
        const auto ds_test = build_encoded_dataset(backbone, labeled_test, cell.variant, 0, &ds_train.classes, false);
        const auto folds = nn::kfold_split(ds_train.labels.size(), train_cfg.folds, ds_train.labels, cseed);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            nn::TrainConfig cfg = train_cfg;
            cfg.seed = cseed ^ (0x9e3779b97f4a7c15ULL * (f + 1));
            const auto model =
                train_encoded(backbone, ds_train, cell.variant, cell.arch, cell.fusion, cfg, &folds[f].val_idx);
            save_classifier(model, (out / "models" / ("clf_" + id + "_fold" + std::to_string(f))).string());
            const auto preds = predict_encoded(model, ds_test);
            detail::write_fold_predictions(preds, ds_test.labels, ds_train.classes, test_class_of, out, id,
                                           static_cast<int>(f), meta);
        }
    }
}

inline RunRecord run_pipeline(const ExperimentConfig& config_in) {
    ExperimentConfig config = config_in;
    if (config.regimes.empty()) config.regimes = default_regimes();
    if (config.out_dir.empty()) throw ValidationError("run_pipeline: out_dir is required");
    if (!config.data_dir.empty() && !fs::exists(fs::path(config.data_dir) / "manifest.txt"))
        throw ValidationError("run_pipeline: data_dir has no manifest.txt: " + config.data_dir);

    const fs::path out = config.out_dir;
    fs::create_directories(out);
    fs::create_directories(out / "data");
    fs::create_directories(out / "models");
    fs::create_directories(out / "preds");

    RunRecord run;
    run.config = config_to_json(config);
    run.config_hash = config_hash(config);
    const std::vector<std::string> meta{std::string(kVersion) + " config=" + run.config_hash};
    detail::StageCache cache(out);

    auto note_stage = [&](const std::string& name, double secs, bool cached) {
        run.stages.push_back({name, secs, cached});
        log_info("stage " + name + (cached ? " [cached]" : "") + " (" + std::to_string(secs) + "s)");
    };
    auto note_artifact = [&](const std::string& name, const fs::path& p) {
        run.artifacts.emplace_back(name, hash_hex(hash_file(p.string())));
    };

    // ---- data: synthetic corpus or user-supplied directory
    const fs::path manifest_path = out / "manifest.txt";
    {
        detail::StageTimer t;
        Fnv1a h;
        if (config.data_dir.empty()) {
            h.update("synth");
            h.update(config.seed);
            h.update(static_cast<std::uint64_t>(config.synth_per_class));
            h.update(json(config.regimes).dump());
        } else {
            h.update("ingest");
            const auto src = read_manifest((fs::path(config.data_dir) / "manifest.txt").string());
            h.update(hash_manifest_data(src, config.data_dir));
        }
        const bool cached = cache.fresh("data", h.digest(), {manifest_path});
        if (!cached) {
            DatasetManifest manifest;
            if (config.data_dir.empty()) {
                const auto trajs = generate_synthetic(config.regimes, config.synth_per_class, config.seed);
                const Resolution res{256, 256};
                for (const auto& tr : trajs) {
                    const std::string rel = "data/" + tr.video_id + "_" + tr.person_id + ".csv";
                    export_trajectory(tr, res, (out / rel).string());
                    manifest.entries.push_back({rel, tr.video_id, tr.person_id, tr.class_label, Split::none});
                    manifest.resolutions[tr.video_id] = res;
                }
            } else {
                const auto src = read_manifest((fs::path(config.data_dir) / "manifest.txt").string());
                manifest.resolutions = src.resolutions;
                for (auto e : src.entries) {
                    fs::path p = e.path;
                    if (p.is_relative()) p = fs::path(config.data_dir) / p;
                    e.path = fs::absolute(p).string();
                    manifest.entries.push_back(std::move(e));
                }
            }
            write_manifest(manifest, manifest_path.string(), meta);
            cache.commit("data", h.digest(), {manifest_path});
        }
        note_stage("data", t.elapsed(), cached);
    }
    note_artifact("manifest", manifest_path);

    // ---- split
    const fs::path split_path = out / "manifest_split.txt";
    {
        detail::StageTimer t;
        Fnv1a h;
        h.update("split");
        h.update(hash_file(manifest_path.string()));
        h.update(config.split_ratio);
        h.update(config.seed);
        const bool cached = cache.fresh("split", h.digest(), {split_path});
        if (!cached) {
            const auto manifest = read_manifest(manifest_path.string());
            const auto split = make_split(manifest, config.split_ratio, config.seed);
            write_manifest(split, split_path.string(), meta);
            cache.commit("split", h.digest(), {split_path});
        }
        note_stage("split", t.elapsed(), cached);
    }
    note_artifact("manifest_split", split_path);

    const auto manifest = read_manifest(split_path.string());
    auto all_trajs = load_trajectories(manifest, out);
    {
        std::size_t dropped = 0;
        std::vector<Trajectory> kept;
        for (auto& tr : all_trajs) {
            if (static_cast<int>(tr.frames.size()) >= kSegmentLen)
                kept.push_back(std::move(tr));
            else
                ++dropped;
        }
        if (dropped > 0)
            log_warn("dropped " + std::to_string(dropped) + " trajectories shorter than the segment window");
        all_trajs = std::move(kept);
    }
    std::map<std::pair<std::string, std::string>, Split> split_of;
    for (const auto& e : manifest.entries) split_of[{e.video_id, e.person_id}] = e.split;

    // ---- train-backbone (normal-labelled training trajectories only)
    const fs::path model_path = out / "model.tkbb";
    {
        detail::StageTimer t;
        Fnv1a h;
        h.update("backbone");
        h.update(hash_file(split_path.string()));
        h.update(hash_manifest_data(manifest, out));
        h.update(static_cast<std::uint64_t>(config.backbone.hidden));
        h.update(static_cast<std::uint64_t>(config.backbone_epochs));
        h.update(config.backbone.learning_rate);
        h.update(static_cast<std::uint64_t>(config.backbone.batch_size));
        h.update(config.seed);
        const bool cached = cache.fresh("train-backbone", h.digest(), {model_path});
        if (!cached) {
            std::vector<Segment> segs;
            std::vector<std::string> labels;
            for (const auto& tr : all_trajs) {
                if (tr.class_label != kNormalLabel) continue;
                if (split_of[{tr.video_id, tr.person_id}] != Split::train) continue;
                for (auto& s : segment_trajectory(tr)) {
                    segs.push_back(std::move(s));
                    labels.push_back(tr.class_label);
                }
            }
            if (segs.empty())
                throw ValidationError("train-backbone: no normal-labelled training segments in the dataset");
            const auto model = train_backbone(segs, labels, config.backbone_epochs, config.seed, config.backbone);
            model.save(model_path.string());
            cache.commit("train-backbone", h.digest(), {model_path});
        }
        note_stage("train-backbone", t.elapsed(), cached);
    }
    // Downstream always consumes the serialized weights so cached and fresh
    // runs see bit-identical float32-rounded parameters.
    const BackboneModel backbone = BackboneModel::load(model_path.string());
    note_artifact("backbone", model_path);

    // ---- score
    const fs::path scores_path = out / "scores.csv";
    {
        detail::StageTimer t;
        Fnv1a h;
        h.update("score");
        h.update(hash_file(model_path.string()));
        h.update(hash_file(split_path.string()));
        h.update(hash_manifest_data(manifest, out));
        const bool cached = cache.fresh("score", h.digest(), {scores_path});
        if (!cached) {
            std::vector<AnomalyScore> scores;
            for (const auto& tr : all_trajs) {
                const auto segs = segment_trajectory(tr);
                std::vector<Reconstruction> recs;
                recs.reserve(segs.size());
                for (const auto& s : segs) recs.push_back(backbone.reconstruct(s));
                auto sc = anomaly_score(segs, recs);
                sc.class_label = tr.class_label;
                scores.push_back(std::move(sc));
            }
            write_scores(scores, scores_path.string(), meta);
            cache.commit("score", h.digest(), {scores_path});
        }
        note_stage("score", t.elapsed(), cached);
    }
    const auto scores = read_scores(scores_path.string());
    note_artifact("scores", scores_path);

    // ---- make-labels
    const fs::path labels_path = out / "labels.csv";
    {
        detail::StageTimer t;
        Fnv1a h;
        h.update("make-labels");
        h.update(hash_file(scores_path.string()));
        h.update(std::string(to_string(config.label_method)));
        h.update(static_cast<std::uint64_t>(config.gmm_max_iter));
        h.update(config.gmm_tol);
        h.update(json(config.threshold_candidates).dump());
        h.update(static_cast<std::uint64_t>(config.candidate_count));
        h.update(config.seed);
        const bool cached = cache.fresh("make-labels", h.digest(), {labels_path});

        std::vector<double> alphas;
        alphas.reserve(scores.size());
        for (const auto& s : scores) alphas.push_back(s.alpha);
        TrajectoryLabeling labeling;
        if (config.label_method == LabelMethod::unsupervised) {
            const auto gmm = fit_gmm(alphas, config.gmm_max_iter, config.gmm_tol, config.seed);
            const auto clusters = assign_clusters(gmm, alphas);
            labeling = relabel_trajectories(scores, clusters, LabelMethod::unsupervised);
            run.ground_truth_summary = {{"method", "gmm"},
                                        {"means", gmm.mean},
                                        {"variances", gmm.variance},
                                        {"weights", gmm.weight},
                                        {"iterations", gmm.log_likelihood.size()},
                                        {"converged", gmm.converged}};
            std::vector<int> cluster_ids;
            bool both = false, seen_norm = false, seen_abn = false;
            for (auto c : clusters) {
                cluster_ids.push_back(c == TrajLabel::normal ? 0 : 1);
                seen_norm |= c == TrajLabel::normal;
                seen_abn |= c == TrajLabel::abnormal;
            }
            both = seen_norm && seen_abn;
            if (both) run.ground_truth_summary["silhouette"] = silhouette(alphas, cluster_ids);
        } else {
            std::vector<std::pair<double, TrajLabel>> swl;
            for (const auto& s : scores)
                swl.emplace_back(s.alpha,
                                 s.class_label == kNormalLabel ? TrajLabel::normal : TrajLabel::abnormal);
            auto candidates = config.threshold_candidates;
            if (candidates.empty()) candidates = make_candidate_grid(alphas, config.candidate_count);
            const auto choice = select_threshold(swl, candidates);
            std::vector<TrajLabel> clusters;
            for (double a : alphas)
                clusters.push_back(a <= choice.threshold ? TrajLabel::normal : TrajLabel::abnormal);
            labeling = relabel_trajectories(scores, clusters, LabelMethod::supervised, choice.threshold);
            run.ground_truth_summary = {{"method", "threshold"},
                                        {"threshold", choice.threshold},
                                        {"silhouette", choice.silhouette}};
        }
        run.ground_truth_summary["kept"] = labeling.kept;
        run.ground_truth_summary["moved_to_normal"] = labeling.moved;
        run.ground_truth_summary["removed_outliers"] = labeling.removed;
        if (!cached) {
            write_labeling(labeling, labels_path.string(), meta);
            cache.commit("make-labels", h.digest(), {labels_path});
        }
        note_stage("make-labels", t.elapsed(), cached);
    }
    auto labeling = read_labeling(labels_path.string());
    note_artifact("labels", labels_path);

    // ---- augment
    fs::path train_manifest_path = split_path;
    fs::path train_labels_path = labels_path;
    const fs::path smote_path = out / "smote_segments.csv";
    if (config.augment == "shift") {
        train_manifest_path = out / "manifest_aug.txt";
        train_labels_path = out / "labels_aug.csv";
        detail::StageTimer t;
        Fnv1a h;
        h.update("augment-shift");
        h.update(hash_file(split_path.string()));
        h.update(hash_file(labels_path.string()));
        h.update(config.shift_rho);
        h.update(config.seed);
        const bool cached =
            cache.fresh("augment", h.digest(), {train_manifest_path, train_labels_path});
        if (!cached) {
            fs::create_directories(out / "aug");
            // bases: train-split trajectories kept under a crime class
            std::map<std::pair<std::string, std::string>, const TrajectoryRecord*> rec_of;
            for (const auto& r : labeling.records) rec_of[{r.video_id, r.person_id}] = &r;
            std::map<std::string, std::vector<const Trajectory*>> by_class;
            for (const auto& tr : all_trajs) {
                if (split_of[{tr.video_id, tr.person_id}] != Split::train) continue;
                const auto it = rec_of.find({tr.video_id, tr.person_id});
                if (it == rec_of.end()) continue;
                const auto cls = TrajectoryLabeling::effective_class(*it->second);
                if (!cls || *cls == kNormalLabel) continue;
                by_class[*cls].push_back(&tr);
            }
            if (by_class.empty()) throw ValidationError("augment: no crime-class training trajectories to balance");
            std::size_t majority = 0;
            for (const auto& [cls, v] : by_class) majority = std::max(majority, v.size());

            DatasetManifest aug_manifest = manifest;
            TrajectoryLabeling aug_labeling = labeling;
            for (const auto& [cls, trajs] : by_class) {
                std::vector<Trajectory> originals;
                originals.reserve(trajs.size());
                for (const auto* p : trajs) originals.push_back(*p);
                const auto generated =
                    shift_oversample(originals, majority, config.shift_rho, config.seed ^ hash_bytes(cls));
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
                    r.alpha = 0.0;
                    r.cluster = TrajLabel::abnormal;
                    r.disposition = Disposition::keep;
                    aug_labeling.records.push_back(std::move(r));
                    ++aug_labeling.kept;
                }
            }
            write_manifest(aug_manifest, train_manifest_path.string(), meta);
            write_labeling(aug_labeling, train_labels_path.string(), meta);
            cache.commit("augment", h.digest(), {train_manifest_path, train_labels_path});
        }
        note_stage("augment", t.elapsed(), cached);
        note_artifact("manifest_aug", train_manifest_path);
        note_artifact("labels_aug", train_labels_path);
    } else if (config.augment == "smote") {
        detail::StageTimer t;
        Fnv1a h;
        h.update("augment-smote");
        h.update(hash_file(split_path.string()));
        h.update(hash_file(labels_path.string()));
        h.update(hash_file(model_path.string()));
        h.update(static_cast<std::uint64_t>(config.smote_k));
        h.update(config.seed);
        const bool cached = cache.fresh("augment", h.digest(), {smote_path});
        if (!cached) {
            std::vector<Trajectory> train_trajs;
            for (const auto& tr : all_trajs)
                if (split_of[{tr.video_id, tr.person_id}] == Split::train) train_trajs.push_back(tr);
            const auto labeled = resolve_labels(train_trajs, labeling);
            const auto ds = build_decoded_dataset(backbone, labeled);
            std::map<std::string, std::vector<Vec>> by_class;
            for (std::size_t i = 0; i < ds.inputs.size(); ++i)
                by_class[ds.classes[static_cast<std::size_t>(ds.labels[i])]].push_back(
                    flatten_segment(ds.inputs[i]));
            const auto balanced = smote_oversample(by_class, config.smote_k, config.seed);
            write_smote_segments(balanced, smote_path.string(), meta);
            cache.commit("augment", h.digest(), {smote_path});
        }
        note_stage("augment", t.elapsed(), cached);
        note_artifact("smote_segments", smote_path);
    }

    // Working sets for classifier training/evaluation.
    const auto train_manifest = read_manifest(train_manifest_path.string());
    const auto train_labeling = read_labeling(train_labels_path.string());
    auto working_trajs = load_trajectories(train_manifest, out);
    {
        std::vector<Trajectory> kept;
        for (auto& tr : working_trajs)
            if (static_cast<int>(tr.frames.size()) >= kSegmentLen) kept.push_back(std::move(tr));
        working_trajs = std::move(kept);
    }
    std::map<std::pair<std::string, std::string>, Split> wsplit;
    for (const auto& e : train_manifest.entries) wsplit[{e.video_id, e.person_id}] = e.split;
    std::vector<Trajectory> train_trajs, test_trajs;
    for (const auto& tr : working_trajs) {
        if (wsplit[{tr.video_id, tr.person_id}] == Split::train)
            train_trajs.push_back(tr);
        else if (wsplit[{tr.video_id, tr.person_id}] == Split::test)
            test_trajs.push_back(tr);
    }
    const auto labeled_train = resolve_labels(train_trajs, train_labeling);
    const auto labeled_test = resolve_labels(test_trajs, train_labeling);
    std::map<std::pair<std::string, std::string>, std::string> test_class_of;
    for (const auto& lt : labeled_test) test_class_of[{lt.traj->video_id, lt.traj->person_id}] = lt.effective_class;

    // ---- classifier grid: k-fold training on the train split, evaluation on
    // the unchanged test split, per-fold prediction artifacts.
    for (const auto& cell : config.grid) {
        const std::string id = cell.id();
        const std::uint64_t cseed = detail::cell_seed(config.seed, id);
        detail::StageTimer t;

        Fnv1a h;
        h.update("train-clf");
        h.update(id);
        h.update(hash_file(train_manifest_path.string()));
        h.update(hash_file(train_labels_path.string()));
        h.update(hash_file(model_path.string()));
        if (config.augment == "smote" && cell.variant == ClassifierVariant::decoded)
            h.update(hash_file(smote_path.string()));
        h.update(config.train.learning_rate);
        h.update(static_cast<std::uint64_t>(config.train.max_epochs));
        h.update(static_cast<std::uint64_t>(config.train.patience));
        h.update(static_cast<std::uint64_t>(config.train.batch_size));
        h.update(config.train.validation_fraction);
        h.update(static_cast<std::uint64_t>(config.train.folds));
        h.update(config.seed);

        std::vector<fs::path> outputs;
        for (int f = 0; f < config.train.folds; ++f) {
            outputs.push_back(out / "preds" / ("preds_" + id + "_fold" + std::to_string(f) + ".csv"));
            outputs.push_back(out / "preds" / ("trajpreds_" + id + "_fold" + std::to_string(f) + ".csv"));
        }
        const bool cached = cache.fresh("clf_" + id, h.digest(), outputs);

        if (!cached) {
            const std::map<std::string, std::vector<Vec>>* smote_ptr = nullptr;
            std::map<std::string, std::vector<Vec>> smote_by_class;
            if (config.augment == "smote" && cell.variant == ClassifierVariant::decoded) {
                smote_by_class = read_smote_segments(smote_path.string());
                smote_ptr = &smote_by_class;
            }
            train_grid_cell(backbone, cell, labeled_train, labeled_test, test_class_of, config.train, cseed,
                            out, meta, smote_ptr);
            cache.commit("clf_" + id, h.digest(), outputs);
        }

        // Metrics always come from the prediction artifacts, so cached and
        // fresh runs share one code path.
        ModelRunRecord rec;
        rec.id = id;
        for (int f = 0; f < config.train.folds; ++f) {
            const auto rows =
                read_predictions((out / "preds" / ("preds_" + id + "_fold" + std::to_string(f) + ".csv")).string());
            auto [cm, rep] = evaluate_predictions(rows);
            if (rec.classes.empty()) {
                rec.classes = rows.classes;
                rec.pooled_confusion = IMat::Zero(cm.counts.rows(), cm.counts.cols());
            }
            rec.pooled_confusion += cm.counts;
            rec.fold_weighted_accuracy.push_back(rep.weighted_accuracy);
            rec.fold_metrics.push_back(std::move(rep));
            const auto trows = read_predictions(
                (out / "preds" / ("trajpreds_" + id + "_fold" + std::to_string(f) + ".csv")).string());
            auto [tcm, trep] = evaluate_predictions(trows);
            rec.fold_traj_metrics.push_back(std::move(trep));
        }
        run.models.push_back(std::move(rec));
        note_stage("train-clf " + id, t.elapsed(), cached);
        for (const auto& o : outputs) note_artifact(o.filename().string(), o);
    }

    // ---- compare: best model (mean weighted accuracy) against every other
    {
        detail::StageTimer t;
        if (run.models.size() >= 2) {
            std::size_t best = 0;
            double best_mean = -1.0;
            for (std::size_t i = 0; i < run.models.size(); ++i) {
                const auto [m, s] = detail::mean_std(run.models[i].fold_weighted_accuracy);
                if (m > best_mean) {
                    best_mean = m;
                    best = i;
                }
            }
            for (std::size_t i = 0; i < run.models.size(); ++i) {
                if (i == best) continue;
                try {
                    run.comparisons.push_back(compare_models(run.models[best].id, run.models[i].id,
                                                             run.models[best].fold_weighted_accuracy,
                                                             run.models[i].fold_weighted_accuracy,
                                                             config.compare_alpha));
                } catch (const ValidationError& e) {
                    run.comparison_notes.push_back(std::string("comparison skipped: ") + e.what());
                }
            }
        }
        note_stage("compare", t.elapsed(), false);
    }

    // ---- report + run record
    {
        detail::StageTimer t;
        emit_report(run, (out / "report").string());
        note_stage("report", t.elapsed(), false);
    }
    {
        std::ofstream rr(out / "run_record.json");
        rr << run_record_to_json(run).dump(2) << '\n';
    }
    return run;
}

}  // namespace trajkit
