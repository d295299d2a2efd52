// Shared basics: error types, hashing, numeric helpers, binary IO primitives.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trajkit {

inline constexpr const char* kVersion = "trajkit/0.1.0";

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Bad input: malformed files, invalid arguments, contract violations by the
/// caller. The CLI maps this to exit code 1; anything else maps to 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Logging: verbosity comes from TRAJKIT_LOG (quiet|warn|info|debug), default warn.
// ---------------------------------------------------------------------------

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("TRAJKIT_LOG");
        if (!env) return LogLevel::warn;
        const std::string_view v(env);
        if (v == "quiet") return LogLevel::quiet;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

inline void log_warn(const std::string& msg) {
    if (log_level() >= LogLevel::warn) std::fprintf(stderr, "[trajkit] warning: %s\n", msg.c_str());
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::fprintf(stderr, "[trajkit] %s\n", msg.c_str());
}

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64-bit): content hashes for artifact caching, not security.
// ---------------------------------------------------------------------------

class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    void update(double v) { update(&v, sizeof v); }
    void update(std::uint64_t v) { update(&v, sizeof v); }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t hash_bytes(std::string_view s) {
    Fnv1a h;
    h.update(s);
    return h.digest();
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file for hashing: " + path);
    Fnv1a h;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    return h.digest();
}

// ---------------------------------------------------------------------------
// Numeric helpers
// ---------------------------------------------------------------------------

/// Linear-interpolation percentile of a sample, p in [0,1].
inline double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) throw ValidationError("percentile of empty sample");
    std::sort(xs.begin(), xs.end());
    const double h = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

/// Checksum over a list of weight matrices; used to verify frozen parameters.
inline std::uint64_t weight_checksum(const std::vector<const Mat*>& tensors) {
    Fnv1a h;
    for (const Mat* t : tensors) {
        h.update(static_cast<std::uint64_t>(t->rows()));
        h.update(static_cast<std::uint64_t>(t->cols()));
        for (Eigen::Index j = 0; j < t->cols(); ++j)
            for (Eigen::Index i = 0; i < t->rows(); ++i)
                h.update((*t)(i, j));
    }
    return h.digest();
}

// ---------------------------------------------------------------------------
// Little-endian binary IO for checkpoint files
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ValidationError("checkpoint truncated while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

inline float read_f32(std::istream& in) {
    std::uint32_t bits = read_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

/// Weights stored as IEEE-754 float32 little-endian, column-major per tensor.
inline void write_matrix_f32(std::ostream& out, const Mat& m) {
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            write_f32(out, static_cast<float>(m(i, j)));
}

inline Mat read_matrix_f32(std::istream& in) {
    const auto rows = read_u32(in);
    const auto cols = read_u32(in);
    Mat m(rows, cols);
    for (std::uint32_t j = 0; j < cols; ++j)
        for (std::uint32_t i = 0; i < rows; ++i)
            m(i, j) = static_cast<double>(read_f32(in));
    return m;
}

}  // namespace detail

}  // namespace trajkit
