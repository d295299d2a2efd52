// Trajectory data model: CSV ingestion, local/global decomposition, fixed-window
// segmentation, dataset manifests and splits, and a synthetic corpus generator.
#pragma once

#include "trajkit/common.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <utility>

namespace trajkit {

inline constexpr int kJointCount = 17;
inline constexpr int kCoordDims = 2 * kJointCount;  // 34
inline constexpr int kGlobalDims = 4;               // cx, cy, w, h
inline constexpr int kSegmentLen = 12;
inline constexpr double kBoxEpsilon = 1e-6;
inline constexpr const char* kNormalLabel = "normal";

enum class TrajLabel { normal, abnormal };
enum class Split { none, train, test };

inline const char* to_string(TrajLabel l) { return l == TrajLabel::normal ? "normal" : "abnormal"; }
inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        default: return "none";
    }
}

/// One skeleton observation: 17 (x, y) joint pairs, normalized to [0,1].
struct JointFrame {
    std::int64_t frame_index = 0;
    std::array<double, kCoordDims> joints{};  // x1,y1,x2,y2,...
};

/// One person's pose sequence across the frames of one video.
struct Trajectory {
    std::string video_id;
    std::string person_id;
    std::string class_label;  // video-level: a crime class or "normal"
    std::optional<TrajLabel> trajectory_label;
    std::vector<JointFrame> frames;
};

struct SegmentRef {
    std::string video_id;
    std::string person_id;
    std::int64_t start_frame = 0;
};

/// Fixed 12-timestep window in raw (12x34), local (12x34) and global (12x4) space.
struct Segment {
    SegmentRef ref;
    Mat raw;
    Mat local;
    Mat global;
};

struct Resolution {
    int width = 0;
    int height = 0;
};

struct ManifestEntry {
    std::string path;
    std::string video_id;
    std::string person_id;
    std::string class_label;
    Split split = Split::none;
};

/// Dataset listing, persisted as "trajkit-manifest/1" text files.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::map<std::string, Resolution> resolutions;  // per video_id
    std::string version = "trajkit-manifest/1";
};

// ---------------------------------------------------------------------------
// Local/global decomposition
// ---------------------------------------------------------------------------

/// Per timestep: global = (cx, cy, w, h) of the joint bounding box, local =
/// box-normalized joint offsets. Box sides are floored at kBoxEpsilon so the
/// transform stays invertible for degenerate poses.
inline std::pair<Mat, Mat> decompose(const Mat& raw) {
    if (raw.cols() != kCoordDims)
        throw ValidationError("decompose: expected " + std::to_string(kCoordDims) + " columns");
    if (!raw.allFinite()) throw ValidationError("decompose: non-finite coordinates");
    const auto T = raw.rows();
    Mat local(T, kCoordDims);
    Mat global(T, kGlobalDims);
    for (Eigen::Index t = 0; t < T; ++t) {
        double minx = raw(t, 0), maxx = raw(t, 0);
        double miny = raw(t, 1), maxy = raw(t, 1);
        for (int j = 1; j < kJointCount; ++j) {
            minx = std::min(minx, raw(t, 2 * j));
            maxx = std::max(maxx, raw(t, 2 * j));
            miny = std::min(miny, raw(t, 2 * j + 1));
            maxy = std::max(maxy, raw(t, 2 * j + 1));
        }
        const double cx = 0.5 * (minx + maxx);
        const double cy = 0.5 * (miny + maxy);
        const double w = std::max(maxx - minx, kBoxEpsilon);
        const double h = std::max(maxy - miny, kBoxEpsilon);
        global(t, 0) = cx;
        global(t, 1) = cy;
        global(t, 2) = w;
        global(t, 3) = h;
        for (int j = 0; j < kJointCount; ++j) {
            local(t, 2 * j) = (raw(t, 2 * j) - cx) / w;
            local(t, 2 * j + 1) = (raw(t, 2 * j + 1) - cy) / h;
        }
    }
    return {std::move(local), std::move(global)};
}

/// Inverse of decompose: x = cx + w*lx, y = cy + h*ly.
inline Mat recompose(const Mat& local, const Mat& global) {
    if (local.cols() != kCoordDims || global.cols() != kGlobalDims || local.rows() != global.rows())
        throw ValidationError("recompose: shape mismatch");
    Mat raw(local.rows(), kCoordDims);
    for (Eigen::Index t = 0; t < local.rows(); ++t) {
        const double cx = global(t, 0), cy = global(t, 1);
        const double w = global(t, 2), h = global(t, 3);
        for (int j = 0; j < kJointCount; ++j) {
            raw(t, 2 * j) = cx + w * local(t, 2 * j);
            raw(t, 2 * j + 1) = cy + h * local(t, 2 * j + 1);
        }
    }
    return raw;
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

/// Non-overlapping 12-frame windows by default; a trailing remainder shorter
/// than the window is dropped, trajectories shorter than the window yield none.
inline std::vector<Segment> segment_trajectory(const Trajectory& t, int window = kSegmentLen,
                                               int stride = kSegmentLen) {
    if (window < 1 || stride < 1) throw ValidationError("segment_trajectory: window/stride must be >= 1");
    std::vector<Segment> out;
    const auto n = static_cast<std::int64_t>(t.frames.size());
    for (std::int64_t off = 0; off + window <= n; off += stride) {
        Segment s;
        s.ref = {t.video_id, t.person_id, t.frames[static_cast<std::size_t>(off)].frame_index};
        s.raw.resize(window, kCoordDims);
        for (int r = 0; r < window; ++r)
            for (int c = 0; c < kCoordDims; ++c)
                s.raw(r, c) = t.frames[static_cast<std::size_t>(off + r)].joints[static_cast<std::size_t>(c)];
        auto [local, global] = decompose(s.raw);
        s.local = std::move(local);
        s.global = std::move(global);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory CSV ingestion / export
// Rows: frame,x1,y1,...,x17,y17 (pixels, decimal text), header-less.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ValidationError("parse error: bad number '" + std::string(s) + "' " + context);
    if (!std::isfinite(v)) throw ValidationError("parse error: non-finite value " + context);
    return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& context) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ValidationError("parse error: bad integer '" + std::string(s) + "' " + context);
    return v;
}

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("to_chars failed");
    return std::string(buf, ptr);
}

}  // namespace detail

inline Trajectory ingest_trajectory(const std::string& path, Resolution resolution,
                                    std::string video_id = "", std::string person_id = "",
                                    std::string class_label = "") {
    if (resolution.width <= 0 || resolution.height <= 0)
        throw ValidationError("ingest_trajectory: resolution must be positive");
    std::ifstream in(path);
    if (!in) throw ValidationError("ingest_trajectory: cannot open " + path);

    Trajectory t;
    t.video_id = std::move(video_id);
    t.person_id = std::move(person_id);
    t.class_label = std::move(class_label);

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string context = "(" + path + ", line " + std::to_string(lineno) + ")";
        const auto fields = detail::split_csv(line);
        if (fields.size() != 1 + kCoordDims)
            throw ValidationError("parse error: expected " + std::to_string(1 + kCoordDims) + " columns, got " +
                                  std::to_string(fields.size()) + " " + context);
        JointFrame jf;
        jf.frame_index = detail::parse_int(fields[0], context);
        if (jf.frame_index < 0) throw ValidationError("parse error: negative frame index " + context);
        for (int c = 0; c < kCoordDims; ++c) {
            const double px = detail::parse_double(fields[static_cast<std::size_t>(c + 1)], context);
            const double denom = (c % 2 == 0) ? resolution.width : resolution.height;
            jf.joints[static_cast<std::size_t>(c)] = std::clamp(px / denom, 0.0, 1.0);
        }
        t.frames.push_back(jf);
    }
    if (t.frames.empty()) throw ValidationError("ingest_trajectory: no frames in " + path);
    std::stable_sort(t.frames.begin(), t.frames.end(),
                     [](const JointFrame& a, const JointFrame& b) { return a.frame_index < b.frame_index; });
    for (std::size_t i = 1; i < t.frames.size(); ++i)
        if (t.frames[i].frame_index == t.frames[i - 1].frame_index)
            throw ValidationError("format error: duplicate frame index " + std::to_string(t.frames[i].frame_index) +
                                  " in " + path);
    return t;
}

/// Writes the header-less pixel-space CSV; numbers use shortest round-trip text.
inline void export_trajectory(const Trajectory& t, Resolution resolution, const std::string& path) {
    if (resolution.width <= 0 || resolution.height <= 0)
        throw ValidationError("export_trajectory: resolution must be positive");
    std::ofstream out(path);
    if (!out) throw ValidationError("export_trajectory: cannot write " + path);
    for (const auto& f : t.frames) {
        out << f.frame_index;
        for (int c = 0; c < kCoordDims; ++c) {
            const double scale = (c % 2 == 0) ? resolution.width : resolution.height;
            out << ',' << detail::format_double(f.joints[static_cast<std::size_t>(c)] * scale);
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Manifest IO and train/test split
// ---------------------------------------------------------------------------

inline void write_manifest(const DatasetManifest& m, const std::string& path,
                           const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_manifest: cannot write " + path);
    out << m.version << '\n';
    for (const auto& c : metadata) out << "# " << c << '\n';
    for (const auto& [vid, res] : m.resolutions)
        out << "resolution\t" << vid << '\t' << res.width << '\t' << res.height << '\n';
    for (const auto& e : m.entries)
        out << "entry\t" << e.path << '\t' << e.video_id << '\t' << e.person_id << '\t' << e.class_label << '\t'
            << to_string(e.split) << '\n';
}

inline DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_manifest: cannot open " + path);
    DatasetManifest m;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("read_manifest: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != m.version) throw ValidationError("read_manifest: unsupported version '" + line + "' in " + path);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string kind;
        std::getline(ss, kind, '\t');
        const std::string context = "(" + path + ", line " + std::to_string(lineno) + ")";
        if (kind == "resolution") {
            std::string vid, w, h;
            if (!std::getline(ss, vid, '\t') || !std::getline(ss, w, '\t') || !std::getline(ss, h, '\t'))
                throw ValidationError("read_manifest: malformed resolution record " + context);
            m.resolutions[vid] = {static_cast<int>(detail::parse_int(w, context)),
                                  static_cast<int>(detail::parse_int(h, context))};
        } else if (kind == "entry") {
            ManifestEntry e;
            std::string split;
            if (!std::getline(ss, e.path, '\t') || !std::getline(ss, e.video_id, '\t') ||
                !std::getline(ss, e.person_id, '\t') || !std::getline(ss, e.class_label, '\t') ||
                !std::getline(ss, split, '\t'))
                throw ValidationError("read_manifest: malformed entry record " + context);
            if (split == "train")
                e.split = Split::train;
            else if (split == "test")
                e.split = Split::test;
            else if (split == "none")
                e.split = Split::none;
            else
                throw ValidationError("read_manifest: unknown split '" + split + "' " + context);
            m.entries.push_back(std::move(e));
        } else {
            throw ValidationError("read_manifest: unknown record '" + kind + "' " + context);
        }
    }
    std::map<std::string, int> seen;
    for (const auto& e : m.entries)
        if (++seen[e.path] > 1) throw ValidationError("read_manifest: duplicate path " + e.path);
    return m;
}

/// Per class: floor(ratio*n) trajectories to train, the rest to test.
/// Deterministic under seed; entries keep their original order in the output.
inline DatasetManifest make_split(const DatasetManifest& input, double ratio = 0.8, std::uint64_t seed = 0) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("make_split: ratio must be in (0,1)");
    for (const auto& e : input.entries)
        if (e.class_label.empty()) throw ValidationError("make_split: entry without class label: " + e.path);

    DatasetManifest out = input;
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < out.entries.size(); ++i) by_class[out.entries[i].class_label].push_back(i);

    for (auto& [label, idx] : by_class) {
        std::mt19937_64 rng(seed ^ hash_bytes(label));
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(idx.size())));
        for (std::size_t k = 0; k < idx.size(); ++k)
            out.entries[idx[k]].split = (k < n_train) ? Split::train : Split::test;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus generator
// ---------------------------------------------------------------------------

/// Parametric joint-motion law for one synthetic class.
struct MotionRegime {
    std::string class_label;
    double drift_x = 0.0;       // per-frame translation
    double drift_y = 0.0;
    double osc_amplitude = 0.0; // per-joint oscillation, out of phase across joints
    double osc_frequency = 0.0; // cycles per frame
    double jitter = 0.0;        // uniform coordinate noise scale
    int frames = 48;
};

namespace detail {

/// Rough COCO-style 17-joint layout centered at the origin, ~0.1 frame units tall.
inline const std::array<std::pair<double, double>, kJointCount>& skeleton_template() {
    static const std::array<std::pair<double, double>, kJointCount> k = {{
        {0.000, -0.050},   // nose
        {-0.008, -0.055},  // left eye
        {0.008, -0.055},   // right eye
        {-0.016, -0.052},  // left ear
        {0.016, -0.052},   // right ear
        {-0.025, -0.030},  // left shoulder
        {0.025, -0.030},   // right shoulder
        {-0.032, -0.005},  // left elbow
        {0.032, -0.005},   // right elbow
        {-0.035, 0.018},   // left wrist
        {0.035, 0.018},    // right wrist
        {-0.015, 0.010},   // left hip
        {0.015, 0.010},    // right hip
        {-0.017, 0.032},   // left knee
        {0.017, 0.032},    // right knee
        {-0.018, 0.055},   // left ankle
        {0.018, 0.055},    // right ankle
    }};
    return k;
}

}  // namespace detail

/// Deterministic under seed; class-separable when regime parameters differ.
inline std::vector<Trajectory> generate_synthetic(const std::vector<MotionRegime>& regimes, int n_per_class,
                                                  std::uint64_t seed) {
    if (n_per_class <= 0) throw ValidationError("generate_synthetic: n_per_class must be positive");
    const auto& tmpl = detail::skeleton_template();
    std::vector<Trajectory> out;
    for (std::size_t r = 0; r < regimes.size(); ++r) {
        const auto& reg = regimes[r];
        if (reg.frames < 2) throw ValidationError("generate_synthetic: regime needs >= 2 frames");
        // Start box keeping the whole path inside [0,1] so no clamping distorts the law.
        double ext = 0.06 + reg.osc_amplitude + reg.jitter + 0.002;
        const double span_x = reg.drift_x * (reg.frames - 1);
        const double span_y = reg.drift_y * (reg.frames - 1);
        const double lo_x = ext + std::max(0.0, -span_x), hi_x = 1.0 - ext - std::max(0.0, span_x);
        const double lo_y = ext + std::max(0.0, -span_y), hi_y = 1.0 - ext - std::max(0.0, span_y);
        if (lo_x >= hi_x || lo_y >= hi_y)
            throw ValidationError("generate_synthetic: regime '" + reg.class_label + "' does not fit the frame");
        for (int i = 0; i < n_per_class; ++i) {
            std::mt19937_64 rng(seed ^ (hash_bytes(reg.class_label) + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL));
            std::uniform_real_distribution<double> ux(lo_x, hi_x), uy(lo_y, hi_y), unit(-1.0, 1.0);
            const double sx = ux(rng), sy = uy(rng);
            Trajectory t;
            t.class_label = reg.class_label;
            char vid[64];
            std::snprintf(vid, sizeof vid, "%s_%03d", reg.class_label.c_str(), i);
            t.video_id = vid;
            t.person_id = "p00";
            t.frames.reserve(static_cast<std::size_t>(reg.frames));
            for (int f = 0; f < reg.frames; ++f) {
                JointFrame jf;
                jf.frame_index = f;
                for (int j = 0; j < kJointCount; ++j) {
                    constexpr double tau = 6.283185307179586476925286766559;
                    const double phase = tau * j / kJointCount;
                    const double osc = reg.osc_amplitude * std::sin(tau * reg.osc_frequency * f + phase);
                    double x = sx + tmpl[static_cast<std::size_t>(j)].first + reg.drift_x * f + osc;
                    double y = sy + tmpl[static_cast<std::size_t>(j)].second + reg.drift_y * f + osc;
                    if (reg.jitter > 0) {
                        x += reg.jitter * unit(rng);
                        y += reg.jitter * unit(rng);
                    }
                    jf.joints[static_cast<std::size_t>(2 * j)] = std::clamp(x, 0.0, 1.0);
                    jf.joints[static_cast<std::size_t>(2 * j + 1)] = std::clamp(y, 0.0, 1.0);
                }
                t.frames.push_back(jf);
            }
            out.push_back(std::move(t));
        }
    }
    return out;
}

}  // namespace trajkit
