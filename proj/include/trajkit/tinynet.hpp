// Minimal neural-network engine: dense / conv1d / lstm / relu / softmax /
// flatten / global-max-pool layers over (time x feature) matrices, categorical
// cross-entropy, Adam, an early-stopping trainer, stratified k-fold splits and
// a finite-difference gradient checker.
//
// Everything is double precision and single-threaded; all randomness flows
// from explicit seeds, so forward/backward/train are reproducible bit-for-bit.
#pragma once

#include "trajkit/common.hpp"

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>

namespace trajkit::nn {

enum class LayerKind { dense, conv1d, lstm, relu, softmax, flatten, global_max_pool };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::lstm: return "lstm";
        case LayerKind::relu: return "relu";
        case LayerKind::softmax: return "softmax";
        case LayerKind::flatten: return "flatten";
        case LayerKind::global_max_pool: return "global-max-pool";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind{};
    int units = 0;    // dense / lstm output width
    int filters = 0;  // conv1d
    int kernel = 0;   // conv1d kernel width (time axis)

    static LayerSpec dense(int units) { return {LayerKind::dense, units, 0, 0}; }
    static LayerSpec conv1d(int filters, int kernel) { return {LayerKind::conv1d, 0, filters, kernel}; }
    static LayerSpec lstm(int units) { return {LayerKind::lstm, units, 0, 0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0, 0}; }
    static LayerSpec softmax() { return {LayerKind::softmax, 0, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, 0}; }
    static LayerSpec global_max_pool() { return {LayerKind::global_max_pool, 0, 0, 0}; }
};

struct Shape {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool operator==(const Shape&) const = default;
};

struct ParamTensor {
    std::string name;
    Mat value;
    Mat grad;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual Shape output_shape(Shape in) const = 0;
    /// Training-path forward; caches whatever backward needs.
    virtual Mat forward(const Mat& x) = 0;
    /// Pure forward for inference; no state is touched.
    virtual Mat apply(const Mat& x) const = 0;
    /// Accumulates parameter gradients, returns dL/dinput.
    virtual Mat backward(const Mat& dy) = 0;
    virtual std::vector<ParamTensor*> params() { return {}; }
    virtual void init_weights(std::mt19937_64&) {}
    virtual LayerSpec spec() const = 0;
};

namespace detail {

inline void init_uniform(Mat& m, std::mt19937_64& rng, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

[[noreturn]] inline void shape_error(const char* layer, const std::string& what) {
    throw ValidationError(std::string(layer) + ": " + what);
}

}  // namespace detail

/// Row-wise affine map: Y = X W + b, applied per timestep.
class DenseLayer final : public Layer {
public:
    DenseLayer(int in_features, int units)
        : w_{"dense.W", Mat::Zero(in_features, units), Mat::Zero(in_features, units)},
          b_{"dense.b", Mat::Zero(1, units), Mat::Zero(1, units)} {}

    LayerKind kind() const override { return LayerKind::dense; }
    LayerSpec spec() const override { return LayerSpec::dense(static_cast<int>(w_.value.cols())); }

    Shape output_shape(Shape in) const override {
        if (in.cols != w_.value.rows())
            detail::shape_error("dense", "expected " + std::to_string(w_.value.rows()) + " input features, got " +
                                             std::to_string(in.cols));
        return {in.rows, w_.value.cols()};
    }

    Mat apply(const Mat& x) const override {
        if (x.cols() != w_.value.rows())
            detail::shape_error("dense", "expected " + std::to_string(w_.value.rows()) + " input features, got " +
                                             std::to_string(x.cols()));
        return (x * w_.value).rowwise() + b_.value.row(0);
    }

    Mat forward(const Mat& x) override {
        x_ = x;
        return apply(x);
    }

    Mat backward(const Mat& dy) override {
        w_.grad.noalias() += x_.transpose() * dy;
        b_.grad.row(0) += dy.colwise().sum();
        return dy * w_.value.transpose();
    }

    std::vector<ParamTensor*> params() override { return {&w_, &b_}; }

    void init_weights(std::mt19937_64& rng) override {
        const double limit = std::sqrt(6.0 / static_cast<double>(w_.value.rows() + w_.value.cols()));
        detail::init_uniform(w_.value, rng, limit);
        b_.value.setZero();
    }

private:
    ParamTensor w_, b_;
    Mat x_;
};

/// Valid-padding temporal convolution. Input T x F, output (T-k+1) x filters.
/// Implemented as im2col followed by a single GEMM.
class Conv1dLayer final : public Layer {
public:
    Conv1dLayer(int in_features, int filters, int kernel)
        : in_features_(in_features),
          kernel_(kernel),
          w_{"conv1d.W", Mat::Zero(kernel * in_features, filters), Mat::Zero(kernel * in_features, filters)},
          b_{"conv1d.b", Mat::Zero(1, filters), Mat::Zero(1, filters)} {
        if (kernel < 1 || filters < 1) throw ValidationError("conv1d: filters and kernel must be positive");
    }

    LayerKind kind() const override { return LayerKind::conv1d; }
    LayerSpec spec() const override { return LayerSpec::conv1d(static_cast<int>(w_.value.cols()), kernel_); }

    Shape output_shape(Shape in) const override {
        check(in);
        return {in.rows - kernel_ + 1, w_.value.cols()};
    }

    Mat apply(const Mat& x) const override {
        check({x.rows(), x.cols()});
        const Mat cols = im2col(x);
        return (cols * w_.value).rowwise() + b_.value.row(0);
    }

    Mat forward(const Mat& x) override {
        check({x.rows(), x.cols()});
        rows_in_ = x.rows();
        cols_ = im2col(x);
        return (cols_ * w_.value).rowwise() + b_.value.row(0);
    }

    Mat backward(const Mat& dy) override {
        w_.grad.noalias() += cols_.transpose() * dy;
        b_.grad.row(0) += dy.colwise().sum();
        const Mat dcols = dy * w_.value.transpose();
        Mat dx = Mat::Zero(rows_in_, in_features_);
        for (Eigen::Index t = 0; t < dcols.rows(); ++t)
            for (int d = 0; d < kernel_; ++d)
                dx.row(t + d) += dcols.block(t, d * in_features_, 1, in_features_);
        return dx;
    }

    std::vector<ParamTensor*> params() override { return {&w_, &b_}; }

    void init_weights(std::mt19937_64& rng) override {
        const double limit = std::sqrt(6.0 / static_cast<double>(w_.value.rows() + w_.value.cols()));
        detail::init_uniform(w_.value, rng, limit);
        b_.value.setZero();
    }

private:
    void check(Shape in) const {
        if (in.cols != in_features_)
            detail::shape_error("conv1d", "expected " + std::to_string(in_features_) + " input features, got " +
                                              std::to_string(in.cols));
        if (in.rows < kernel_)
            detail::shape_error("conv1d", "kernel width " + std::to_string(kernel_) +
                                              " exceeds input length " + std::to_string(in.rows));
    }

    Mat im2col(const Mat& x) const {
        const Eigen::Index out_t = x.rows() - kernel_ + 1;
        Mat cols(out_t, kernel_ * in_features_);
        for (Eigen::Index t = 0; t < out_t; ++t)
            for (int d = 0; d < kernel_; ++d)
                cols.block(t, d * in_features_, 1, in_features_) = x.row(t + d);
        return cols;
    }

    int in_features_;
    int kernel_;
    ParamTensor w_, b_;
    Mat cols_;
    Eigen::Index rows_in_ = 0;
};

/// LSTM over the time axis, returning the final hidden state (1 x units).
/// Gate blocks in the 4H-wide preactivation are ordered i, f, g, o.
class LstmLayer final : public Layer {
public:
    LstmLayer(int in_features, int units)
        : in_(in_features),
          h_(units),
          wx_{"lstm.Wx", Mat::Zero(in_features, 4 * units), Mat::Zero(in_features, 4 * units)},
          wh_{"lstm.Wh", Mat::Zero(units, 4 * units), Mat::Zero(units, 4 * units)},
          b_{"lstm.b", Mat::Zero(1, 4 * units), Mat::Zero(1, 4 * units)} {}

    LayerKind kind() const override { return LayerKind::lstm; }
    LayerSpec spec() const override { return LayerSpec::lstm(h_); }

    Shape output_shape(Shape in) const override {
        if (in.cols != in_)
            detail::shape_error("lstm", "expected " + std::to_string(in_) + " input features, got " +
                                            std::to_string(in.cols));
        if (in.rows < 1) detail::shape_error("lstm", "empty input sequence");
        return {1, h_};
    }

    Mat apply(const Mat& x) const override { return run(x, nullptr); }

    Mat forward(const Mat& x) override {
        cache_ = Cache{};
        return run(x, &cache_);
    }

    Mat backward(const Mat& dy) override {
        const auto T = cache_.x.rows();
        Mat dx = Mat::Zero(T, in_);
        Eigen::RowVectorXd dh = dy.row(0);
        Eigen::RowVectorXd dc = Eigen::RowVectorXd::Zero(h_);
        for (Eigen::Index t = T - 1; t >= 0; --t) {
            const auto& s = cache_.steps[static_cast<std::size_t>(t)];
            const Eigen::RowVectorXd do_ = dh.cwiseProduct(s.tc);
            dc += dh.cwiseProduct(s.o).cwiseProduct(
                Eigen::RowVectorXd::Ones(h_) - s.tc.cwiseProduct(s.tc));
            const Eigen::RowVectorXd di = dc.cwiseProduct(s.g);
            const Eigen::RowVectorXd df = dc.cwiseProduct(s.c_prev);
            const Eigen::RowVectorXd dg = dc.cwiseProduct(s.i);
            Eigen::RowVectorXd da(4 * h_);
            da.segment(0, h_) = di.cwiseProduct(s.i).cwiseProduct(Eigen::RowVectorXd::Ones(h_) - s.i);
            da.segment(h_, h_) = df.cwiseProduct(s.f).cwiseProduct(Eigen::RowVectorXd::Ones(h_) - s.f);
            da.segment(2 * h_, h_) = dg.cwiseProduct(Eigen::RowVectorXd::Ones(h_) - s.g.cwiseProduct(s.g));
            da.segment(3 * h_, h_) = do_.cwiseProduct(s.o).cwiseProduct(Eigen::RowVectorXd::Ones(h_) - s.o);

            wx_.grad.noalias() += cache_.x.row(t).transpose() * da;
            wh_.grad.noalias() += s.h_prev.transpose() * da;
            b_.grad.row(0) += da;
            dx.row(t) = da * wx_.value.transpose();
            dh = da * wh_.value.transpose();
            dc = dc.cwiseProduct(s.f);
        }
        return dx;
    }

    std::vector<ParamTensor*> params() override { return {&wx_, &wh_, &b_}; }

    void init_weights(std::mt19937_64& rng) override {
        detail::init_uniform(wx_.value, rng, 0.08);
        detail::init_uniform(wh_.value, rng, 0.08);
        b_.value.setZero();
    }

private:
    struct Step {
        Eigen::RowVectorXd i, f, g, o, tc, c_prev, h_prev;
    };
    struct Cache {
        Mat x;
        std::vector<Step> steps;
    };

    Mat run(const Mat& x, Cache* cache) const {
        if (x.cols() != in_)
            detail::shape_error("lstm", "expected " + std::to_string(in_) + " input features, got " +
                                            std::to_string(x.cols()));
        if (x.rows() < 1) detail::shape_error("lstm", "empty input sequence");
        Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(h_);
        Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(h_);
        if (cache) {
            cache->x = x;
            cache->steps.resize(static_cast<std::size_t>(x.rows()));
        }
        for (Eigen::Index t = 0; t < x.rows(); ++t) {
            const Eigen::RowVectorXd a = x.row(t) * wx_.value + h * wh_.value + b_.value.row(0);
            Eigen::RowVectorXd i(h_), f(h_), g(h_), o(h_);
            for (int k = 0; k < h_; ++k) {
                i(k) = sigmoid(a(k));
                f(k) = sigmoid(a(h_ + k));
                g(k) = std::tanh(a(2 * h_ + k));
                o(k) = sigmoid(a(3 * h_ + k));
            }
            const Eigen::RowVectorXd c_prev = c;
            const Eigen::RowVectorXd h_prev = h;
            c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
            const Eigen::RowVectorXd tc = c.array().tanh().matrix();
            h = o.cwiseProduct(tc);
            if (cache) cache->steps[static_cast<std::size_t>(t)] = {i, f, g, o, tc, c_prev, h_prev};
        }
        return h;
    }

    int in_, h_;
    ParamTensor wx_, wh_, b_;
    Cache cache_;
};

class ReluLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::relu; }
    LayerSpec spec() const override { return LayerSpec::relu(); }
    Shape output_shape(Shape in) const override { return in; }
    Mat apply(const Mat& x) const override { return x.cwiseMax(0.0); }
    Mat forward(const Mat& x) override {
        x_ = x;
        return apply(x);
    }
    Mat backward(const Mat& dy) override {
        return dy.cwiseProduct((x_.array() > 0.0).cast<double>().matrix());
    }

private:
    Mat x_;
};

/// Row-wise softmax (stable: max-shifted).
class SoftmaxLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::softmax; }
    LayerSpec spec() const override { return LayerSpec::softmax(); }
    Shape output_shape(Shape in) const override { return in; }

    Mat apply(const Mat& x) const override {
        Mat p(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double m = x.row(r).maxCoeff();
            Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
            p.row(r) = e / e.sum();
        }
        return p;
    }

    Mat forward(const Mat& x) override {
        p_ = apply(x);
        return p_;
    }

    /// dL/dz_i = p_i (dy_i - sum_j p_j dy_j), per row.
    Mat backward(const Mat& dy) override {
        Mat dx(dy.rows(), dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            const double dot = p_.row(r).dot(dy.row(r));
            dx.row(r) = p_.row(r).cwiseProduct(dy.row(r) - Eigen::RowVectorXd::Constant(dy.cols(), dot));
        }
        return dx;
    }

private:
    Mat p_;
};

class FlattenLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::flatten; }
    LayerSpec spec() const override { return LayerSpec::flatten(); }
    Shape output_shape(Shape in) const override { return {1, in.rows * in.cols}; }

    Mat apply(const Mat& x) const override {
        Mat y(1, x.rows() * x.cols());
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c) y(0, k++) = x(r, c);
        return y;
    }

    Mat forward(const Mat& x) override {
        rows_ = x.rows();
        cols_ = x.cols();
        return apply(x);
    }

    Mat backward(const Mat& dy) override {
        Mat dx(rows_, cols_);
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < rows_; ++r)
            for (Eigen::Index c = 0; c < cols_; ++c) dx(r, c) = dy(0, k++);
        return dx;
    }

private:
    Eigen::Index rows_ = 0, cols_ = 0;
};

/// Max over the time axis; gradient routes to the earliest maximum.
class GlobalMaxPoolLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::global_max_pool; }
    LayerSpec spec() const override { return LayerSpec::global_max_pool(); }
    Shape output_shape(Shape in) const override { return {1, in.cols}; }

    Mat apply(const Mat& x) const override {
        Mat y(1, x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) y(0, c) = x.col(c).maxCoeff();
        return y;
    }

    Mat forward(const Mat& x) override {
        rows_ = x.rows();
        argmax_.assign(static_cast<std::size_t>(x.cols()), 0);
        Mat y(1, x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            Eigen::Index best = 0;
            for (Eigen::Index r = 1; r < x.rows(); ++r)
                if (x(r, c) > x(best, c)) best = r;
            argmax_[static_cast<std::size_t>(c)] = best;
            y(0, c) = x(best, c);
        }
        return y;
    }

    Mat backward(const Mat& dy) override {
        Mat dx = Mat::Zero(rows_, static_cast<Eigen::Index>(argmax_.size()));
        for (std::size_t c = 0; c < argmax_.size(); ++c)
            dx(argmax_[c], static_cast<Eigen::Index>(c)) = dy(0, static_cast<Eigen::Index>(c));
        return dx;
    }

private:
    Eigen::Index rows_ = 0;
    std::vector<Eigen::Index> argmax_;
};

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

class Network {
public:
    Network() = default;

    Network(const std::vector<LayerSpec>& specs, Shape input_shape, std::uint64_t seed)
        : input_shape_(input_shape) {
        Shape cur = input_shape;
        for (const auto& s : specs) {
            layers_.push_back(make_layer(s, cur));
            cur = layers_.back()->output_shape(cur);
        }
        output_shape_ = cur;
        std::mt19937_64 rng(seed);
        for (auto& l : layers_) l->init_weights(rng);
    }

    Shape input_shape() const { return input_shape_; }
    Shape output_shape() const { return output_shape_; }
    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }

    /// Training-path forward: caches activations for backward().
    Mat forward(const Mat& x) {
        Mat cur = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) cur = wrap(i, [&] { return layers_[i]->forward(cur); });
        return cur;
    }

    /// Pure inference; safe for concurrent callers on an immutable network.
    Mat predict(const Mat& x) const {
        Mat cur = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) cur = wrap(i, [&] { return layers_[i]->apply(cur); });
        return cur;
    }

    /// Backpropagates from dL/doutput; parameter grads accumulate. Returns dL/dinput.
    Mat backward(const Mat& dy) {
        Mat cur = dy;
        for (std::size_t i = layers_.size(); i-- > 0;) cur = layers_[i]->backward(cur);
        return cur;
    }

    std::vector<ParamTensor*> parameters() {
        std::vector<ParamTensor*> out;
        for (auto& l : layers_)
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }

    std::vector<const Mat*> parameter_values() const {
        std::vector<const Mat*> out;
        for (const auto& l : layers_)
            for (auto* p : const_cast<Layer&>(*l).params()) out.push_back(&p->value);
        return out;
    }

    void zero_grads() {
        for (auto* p : parameters()) p->grad.setZero();
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* m : parameter_values()) n += static_cast<std::size_t>(m->size());
        return n;
    }

    std::vector<Mat> snapshot() const {
        std::vector<Mat> out;
        for (const auto* m : parameter_values()) out.push_back(*m);
        return out;
    }

    void restore(const std::vector<Mat>& snap) {
        auto ps = parameters();
        if (snap.size() != ps.size()) throw ValidationError("restore: snapshot size mismatch");
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = snap[i];
    }

    std::uint64_t checksum() const { return weight_checksum(parameter_values()); }

    std::vector<LayerSpec> specs() const {
        std::vector<LayerSpec> out;
        for (const auto& l : layers_) out.push_back(l->spec());
        return out;
    }

    // Checkpoints: magic "TKNN", format version, layer descriptors, then
    // weights as little-endian float32 in declared order.
    void save(std::ostream& out) const {
        out.write("TKNN", 4);
        trajkit::detail::write_u32(out, 1);
        trajkit::detail::write_u32(out, static_cast<std::uint32_t>(input_shape_.rows));
        trajkit::detail::write_u32(out, static_cast<std::uint32_t>(input_shape_.cols));
        trajkit::detail::write_u32(out, static_cast<std::uint32_t>(layers_.size()));
        for (const auto& l : layers_) {
            const auto s = l->spec();
            trajkit::detail::write_u32(out, static_cast<std::uint32_t>(s.kind));
            trajkit::detail::write_u32(out, static_cast<std::uint32_t>(s.units));
            trajkit::detail::write_u32(out, static_cast<std::uint32_t>(s.filters));
            trajkit::detail::write_u32(out, static_cast<std::uint32_t>(s.kernel));
        }
        for (const auto& l : layers_)
            for (auto* p : const_cast<Layer&>(*l).params()) trajkit::detail::write_matrix_f32(out, p->value);
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ValidationError("cannot write checkpoint " + path);
        save(out);
    }

    static Network load(std::istream& in) {
        char magic[4];
        in.read(magic, 4);
        if (!in || std::string_view(magic, 4) != "TKNN") throw ValidationError("bad network checkpoint magic");
        const auto version = trajkit::detail::read_u32(in);
        if (version != 1) throw ValidationError("unsupported network checkpoint version");
        Shape shape{static_cast<Eigen::Index>(trajkit::detail::read_u32(in)),
                    static_cast<Eigen::Index>(trajkit::detail::read_u32(in))};
        const auto n_layers = trajkit::detail::read_u32(in);
        std::vector<LayerSpec> specs;
        for (std::uint32_t i = 0; i < n_layers; ++i) {
            LayerSpec s;
            s.kind = static_cast<LayerKind>(trajkit::detail::read_u32(in));
            s.units = static_cast<int>(trajkit::detail::read_u32(in));
            s.filters = static_cast<int>(trajkit::detail::read_u32(in));
            s.kernel = static_cast<int>(trajkit::detail::read_u32(in));
            specs.push_back(s);
        }
        Network net(specs, shape, 0);
        for (auto* p : net.parameters()) {
            Mat m = trajkit::detail::read_matrix_f32(in);
            if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
                throw ValidationError("checkpoint tensor shape mismatch for " + p->name);
            p->value = std::move(m);
        }
        return net;
    }

    static Network load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ValidationError("cannot open checkpoint " + path);
        return load(in);
    }

private:
    template <typename F>
    Mat wrap(std::size_t i, F&& f) const {
        try {
            return f();
        } catch (ValidationError& e) {
            throw ValidationError(std::string(e.what()) + " (layer " + std::to_string(i) + ", " +
                                  to_string(layers_[i]->kind()) + ")");
        }
    }

    static std::unique_ptr<Layer> make_layer(const LayerSpec& s, Shape in) {
        switch (s.kind) {
            case LayerKind::dense:
                if (s.units < 1) throw ValidationError("dense: units must be positive");
                return std::make_unique<DenseLayer>(static_cast<int>(in.cols), s.units);
            case LayerKind::conv1d: {
                auto l = std::make_unique<Conv1dLayer>(static_cast<int>(in.cols), s.filters, s.kernel);
                l->output_shape(in);  // validates kernel vs input length
                return l;
            }
            case LayerKind::lstm:
                if (s.units < 1) throw ValidationError("lstm: units must be positive");
                return std::make_unique<LstmLayer>(static_cast<int>(in.cols), s.units);
            case LayerKind::relu: return std::make_unique<ReluLayer>();
            case LayerKind::softmax: return std::make_unique<SoftmaxLayer>();
            case LayerKind::flatten: return std::make_unique<FlattenLayer>();
            case LayerKind::global_max_pool: return std::make_unique<GlobalMaxPoolLayer>();
        }
        throw ValidationError("unknown layer kind");
    }

    std::vector<std::unique_ptr<Layer>> layers_;
    Shape input_shape_{}, output_shape_{};
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline constexpr double kProbClip = 1e-12;

/// Categorical cross-entropy of one probability row against an integer label.
inline double cross_entropy(const Mat& probs, int label) {
    if (probs.rows() != 1 || label < 0 || label >= probs.cols())
        throw ValidationError("cross_entropy: bad shape or label");
    const double p = std::clamp(probs(0, label), kProbClip, 1.0 - kProbClip);
    return -std::log(p);
}

/// dL/dprobs for cross-entropy; composing with SoftmaxLayer::backward yields
/// the usual (p - onehot) gradient at the logits.
inline Mat cross_entropy_grad(const Mat& probs, int label, double scale = 1.0) {
    Mat g = Mat::Zero(1, probs.cols());
    const double p = std::clamp(probs(0, label), kProbClip, 1.0 - kProbClip);
    g(0, label) = -scale / p;
    return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Mat> m, v;
    long step = 0;
};

/// Standard bias-corrected Adam update over a parameter list.
inline void adam_step(const std::vector<ParamTensor*>& params, AdamState& state, const AdamConfig& cfg) {
    if (state.m.empty()) {
        for (auto* p : params) {
            state.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
            state.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (state.m.size() != params.size()) throw ValidationError("adam_step: state/param mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Mat& g = params[i]->grad;
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const Mat mhat = state.m[i] / bc1;
        const Mat vhat = state.v[i] / bc2;
        params[i]->value -=
            cfg.lr * mhat.cwiseQuotient(vhat.cwiseSqrt() + Mat::Constant(g.rows(), g.cols(), cfg.eps));
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.001;
    int max_epochs = 25;
    int patience = 3;           // early stopping on training+validation loss
    int batch_size = 64;
    double validation_fraction = 0.2;
    int folds = 3;
    double min_improvement = 1e-6;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;    // per epoch
    int epochs_run = 0;
    int best_epoch = -1;             // epoch whose weights were restored
    double best_val_loss = std::numeric_limits<double>::infinity();
};

/// Training data seen through an indirection so callers can fuse inputs from
/// learnable weights (the fused input is recomputed per epoch) and receive the
/// input gradient back.
struct DataSource {
    std::size_t size = 0;
    std::vector<int> labels;
    std::function<Mat(std::size_t)> input;
    std::function<void(std::size_t, const Mat&)> on_input_grad;  // optional
    std::vector<ParamTensor*> extra_params;                      // optional, trained alongside
};

inline DataSource make_data_source(const std::vector<Mat>& inputs, const std::vector<int>& labels) {
    if (inputs.size() != labels.size()) throw ValidationError("data source: inputs/labels size mismatch");
    DataSource src;
    src.size = inputs.size();
    src.labels = labels;
    src.input = [&inputs](std::size_t i) { return inputs[i]; };
    return src;
}

/// Trains with Adam + categorical cross-entropy and early stopping: stops when
/// neither the training nor the validation loss improved by more than
/// min_improvement for `patience` consecutive epochs; the best-validation-loss
/// weights are restored before returning.
///
/// If val_indices is null a seeded random validation_fraction split is carved
/// from the data; otherwise the given indices form the validation set and the
/// rest are trained on.
inline TrainResult train(Network& net, DataSource& src, const TrainConfig& cfg,
                         const std::vector<std::size_t>* val_indices = nullptr) {
    if (src.size == 0) throw ValidationError("train: empty data");
    if (cfg.patience < 1) throw ValidationError("train: patience must be >= 1");
    if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0))
        throw ValidationError("train: validation fraction must be in (0,1)");
    {
        std::vector<int> distinct = src.labels;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2) throw ValidationError("train: need at least 2 classes");
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> train_idx, val_idx;
    if (val_indices) {
        val_idx = *val_indices;
        std::vector<bool> is_val(src.size, false);
        for (auto i : val_idx) {
            if (i >= src.size) throw ValidationError("train: validation index out of range");
            is_val[i] = true;
        }
        for (std::size_t i = 0; i < src.size; ++i)
            if (!is_val[i]) train_idx.push_back(i);
    } else {
        std::vector<std::size_t> order(src.size);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(src.size)));
        n_val = std::clamp<std::size_t>(n_val, 1, src.size - 1);
        val_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    }
    if (train_idx.empty()) throw ValidationError("train: no training samples left after validation split");

    auto all_params = net.parameters();
    for (auto* p : src.extra_params) all_params.push_back(p);
    AdamState adam;
    const AdamConfig adam_cfg{cfg.learning_rate, 0.9, 0.999, 1e-8};

    auto eval_loss = [&](const std::vector<std::size_t>& idx) {
        double total = 0.0;
        for (auto i : idx) total += cross_entropy(net.predict(src.input(i)), src.labels[i]);
        return total / static_cast<double>(idx.size());
    };

    TrainResult res;
    double best_train = std::numeric_limits<double>::infinity();
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Mat> best_weights = net.snapshot();
    std::vector<Mat> best_extra;
    for (auto* p : src.extra_params) best_extra.push_back(p->value);
    int stall = 0;

    std::vector<std::size_t> order = train_idx;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double bsize = static_cast<double>(end - start);
            net.zero_grads();
            for (auto* p : src.extra_params) p->grad.setZero();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const auto i = order[k];
                const Mat x = src.input(i);
                const Mat probs = net.forward(x);
                batch_loss += cross_entropy(probs, src.labels[i]);
                const Mat dldp = cross_entropy_grad(probs, src.labels[i], 1.0 / bsize);
                const Mat dldx = net.backward(dldp);
                if (src.on_input_grad) src.on_input_grad(i, dldx);
            }
            batch_loss /= bsize;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: loss is not finite at epoch " + std::to_string(epoch));
            adam_step(all_params, adam, adam_cfg);
            epoch_loss += batch_loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        const double val_loss = eval_loss(val_idx);
        if (!std::isfinite(val_loss))
            throw std::runtime_error("train: validation loss is not finite at epoch " + std::to_string(epoch));
        res.train_loss.push_back(epoch_loss);
        res.val_loss.push_back(val_loss);
        res.epochs_run = epoch + 1;

        bool improved = false;
        if (epoch_loss < best_train - cfg.min_improvement) {
            best_train = epoch_loss;
            improved = true;
        }
        if (val_loss < best_val - cfg.min_improvement) {
            best_val = val_loss;
            improved = true;
            res.best_epoch = epoch;
            res.best_val_loss = val_loss;
            best_weights = net.snapshot();
            best_extra.clear();
            for (auto* p : src.extra_params) best_extra.push_back(p->value);
        }
        stall = improved ? 0 : stall + 1;
        if (stall >= cfg.patience) break;
    }

    net.restore(best_weights);
    for (std::size_t i = 0; i < src.extra_params.size(); ++i) src.extra_params[i]->value = best_extra[i];
    return res;
}

inline TrainResult train(Network& net, const std::vector<Mat>& inputs, const std::vector<int>& labels,
                         const TrainConfig& cfg, const std::vector<std::size_t>* val_indices = nullptr) {
    DataSource src = make_data_source(inputs, labels);
    return train(net, src, cfg, val_indices);
}

// ---------------------------------------------------------------------------
// Stratified k-fold
// ---------------------------------------------------------------------------

struct FoldSplit {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
};

/// Disjoint folds covering all indices, sizes differing by at most one,
/// stratified by label where class counts permit.
inline std::vector<FoldSplit> kfold_split(std::size_t n, int k, const std::vector<int>& labels,
                                          std::uint64_t seed) {
    if (k < 2) throw ValidationError("kfold_split: k must be >= 2");
    if (n < static_cast<std::size_t>(k)) throw ValidationError("kfold_split: n must be >= k");
    if (labels.size() != n) throw ValidationError("kfold_split: labels size mismatch");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t cursor = 0;  // global round-robin keeps fold sizes within 1
    for (auto& [label, idx] : by_class) {
        if (idx.size() < static_cast<std::size_t>(k))
            log_warn("kfold_split: class " + std::to_string(label) + " has fewer samples than folds (" +
                     std::to_string(idx.size()) + " < " + std::to_string(k) + "), not fully stratified");
        std::shuffle(idx.begin(), idx.end(), rng);
        for (auto i : idx) folds[cursor++ % static_cast<std::size_t>(k)].push_back(i);
    }

    std::vector<FoldSplit> out(static_cast<std::size_t>(k));
    for (std::size_t f = 0; f < folds.size(); ++f) {
        out[f].val_idx = folds[f];
        std::sort(out[f].val_idx.begin(), out[f].val_idx.end());
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) out[f].train_idx.insert(out[f].train_idx.end(), folds[g].begin(), folds[g].end());
        std::sort(out[f].train_idx.begin(), out[f].train_idx.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Central finite differences on the cross-entropy loss over all parameters
/// (a seeded random subsample above max_params). Returns the max relative
/// error, with the comparison floored at 1e-6 to keep dead-parameter noise
/// from registering as disagreement.
inline double gradient_check(Network& net, const Mat& input, int label, double h = 1e-5,
                             std::size_t max_params = 10000, std::uint64_t subsample_seed = 0) {
    const Mat probs = net.forward(input);
    net.zero_grads();
    net.backward(cross_entropy_grad(probs, label));
    auto params = net.parameters();
    std::vector<Mat> analytic;
    for (auto* p : params) analytic.push_back(p->grad);

    std::vector<std::pair<std::size_t, Eigen::Index>> coords;
    for (std::size_t t = 0; t < params.size(); ++t)
        for (Eigen::Index i = 0; i < params[t]->value.size(); ++i) coords.emplace_back(t, i);
    if (coords.size() > max_params) {
        std::mt19937_64 rng(subsample_seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(max_params);
    }

    double max_rel = 0.0;
    for (const auto& [t, i] : coords) {
        double& theta = params[t]->value.data()[i];
        const double orig = theta;
        theta = orig + h;
        const double lp = cross_entropy(net.predict(input), label);
        theta = orig - h;
        const double lm = cross_entropy(net.predict(input), label);
        theta = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double a = analytic[t].data()[i];
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace trajkit::nn
