// Two-branch recurrent autoencoder trained on normal-labelled segments only.
// Each branch is a GRU encoder plus a GRU decoder that replays the window
// forward in time from the final encoder state, feeding back its own outputs.
// The reconstruction loss lives in recomposed coordinate space.
#pragma once

#include "trajkit/tinynet.hpp"
#include "trajkit/trajectory.hpp"

namespace trajkit {

/// Per-segment hidden-state sequences of the two branch encoders (12 x H each).
struct LatentPair {
    Mat z_local;
    Mat z_global;
};

/// Coordinate-space reconstruction of one segment (12 x 34).
struct Reconstruction {
    Mat raw_hat;
    SegmentRef source;
};

struct BackboneConfig {
    int hidden = 16;
    double learning_rate = 0.01;
    int batch_size = 32;
};

struct BackboneTrainInfo {
    std::vector<double> epoch_mse;  // mean training reconstruction MSE per epoch
    int epochs = 0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

/// GRU cell, gate blocks ordered [r | z | n]:
///   r = sigmoid(x Wx_r + h Wh_r + b_r)
///   z = sigmoid(x Wx_z + h Wh_z + b_z)
///   n = tanh(x Wx_n + r .* (h Wh_n) + b_n)
///   h' = (1 - z) .* n + z .* h
struct GruCell {
    nn::ParamTensor wx, wh, b;

    GruCell() = default;
    GruCell(const std::string& name, int in, int hidden)
        : wx{name + ".Wx", Mat::Zero(in, 3 * hidden), Mat::Zero(in, 3 * hidden)},
          wh{name + ".Wh", Mat::Zero(hidden, 3 * hidden), Mat::Zero(hidden, 3 * hidden)},
          b{name + ".b", Mat::Zero(1, 3 * hidden), Mat::Zero(1, 3 * hidden)} {}

    int hidden() const { return static_cast<int>(wh.value.rows()); }
    int input_dim() const { return static_cast<int>(wx.value.rows()); }

    struct StepCache {
        Eigen::RowVectorXd x, h_prev, r, z, n, ahn;  // ahn = h_prev * Wh_n block
    };

    Eigen::RowVectorXd step(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& h_prev,
                            StepCache* cache) const {
        const int H = hidden();
        const Eigen::RowVectorXd ax = x * wx.value;
        const Eigen::RowVectorXd ah = h_prev * wh.value;
        Eigen::RowVectorXd r(H), z(H), n(H);
        for (int k = 0; k < H; ++k) {
            r(k) = nn::sigmoid(ax(k) + ah(k) + b.value(0, k));
            z(k) = nn::sigmoid(ax(H + k) + ah(H + k) + b.value(0, H + k));
        }
        for (int k = 0; k < H; ++k)
            n(k) = std::tanh(ax(2 * H + k) + r(k) * ah(2 * H + k) + b.value(0, 2 * H + k));
        Eigen::RowVectorXd h =
            (Eigen::RowVectorXd::Ones(H) - z).cwiseProduct(n) + z.cwiseProduct(h_prev);
        if (cache) *cache = {x, h_prev, r, z, n, ah.segment(2 * H, H)};
        return h;
    }

    /// Accumulates parameter grads, returns (dh_prev, dx).
    std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> step_backward(const StepCache& s,
                                                                    const Eigen::RowVectorXd& dh) {
        const int H = hidden();
        const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(H);
        const Eigen::RowVectorXd dz = dh.cwiseProduct(s.h_prev - s.n);
        const Eigen::RowVectorXd dn = dh.cwiseProduct(ones - s.z);
        const Eigen::RowVectorXd dan = dn.cwiseProduct(ones - s.n.cwiseProduct(s.n));
        const Eigen::RowVectorXd dr = dan.cwiseProduct(s.ahn);
        const Eigen::RowVectorXd dar = dr.cwiseProduct(s.r).cwiseProduct(ones - s.r);
        const Eigen::RowVectorXd daz = dz.cwiseProduct(s.z).cwiseProduct(ones - s.z);

        Eigen::RowVectorXd da(3 * H);
        da.segment(0, H) = dar;
        da.segment(H, H) = daz;
        da.segment(2 * H, H) = dan;

        wx.grad.noalias() += s.x.transpose() * da;
        // The n-gate recurrent path carries the reset gate, so Wh's n block
        // sees dan .* r instead of dan.
        Eigen::RowVectorXd da_h = da;
        da_h.segment(2 * H, H) = dan.cwiseProduct(s.r);
        wh.grad.noalias() += s.h_prev.transpose() * da_h;
        b.grad.row(0) += da;

        const Eigen::RowVectorXd dx = da * wx.value.transpose();
        Eigen::RowVectorXd dh_prev = da_h * wh.value.transpose();
        dh_prev += dh.cwiseProduct(s.z);
        return {dh_prev, dx};
    }
};

struct Branch {
    GruCell enc, dec;
    nn::ParamTensor w_out, b_out;  // H x D, 1 x D

    Branch() = default;
    Branch(const std::string& name, int dims, int hidden)
        : enc(name + ".enc", dims, hidden),
          dec(name + ".dec", dims, hidden),
          w_out{name + ".Wout", Mat::Zero(hidden, dims), Mat::Zero(hidden, dims)},
          b_out{name + ".bout", Mat::Zero(1, dims), Mat::Zero(1, dims)} {}

    int dims() const { return static_cast<int>(w_out.value.cols()); }
    int hidden() const { return enc.hidden(); }

    std::vector<nn::ParamTensor*> params() {
        return {&enc.wx, &enc.wh, &enc.b, &dec.wx, &dec.wh, &dec.b, &w_out, &b_out};
    }

    void init_weights(std::mt19937_64& rng) {
        nn::detail::init_uniform(enc.wx.value, rng, 0.08);
        nn::detail::init_uniform(enc.wh.value, rng, 0.08);
        nn::detail::init_uniform(dec.wx.value, rng, 0.08);
        nn::detail::init_uniform(dec.wh.value, rng, 0.08);
        const double limit = std::sqrt(6.0 / static_cast<double>(hidden() + dims()));
        nn::detail::init_uniform(w_out.value, rng, limit);
    }

    /// Encoder pass: returns the full hidden sequence (T x H).
    Mat encode_seq(const Mat& x, std::vector<GruCell::StepCache>* caches) const {
        const auto T = x.rows();
        Mat hs(T, hidden());
        Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(hidden());
        if (caches) caches->resize(static_cast<std::size_t>(T));
        for (Eigen::Index t = 0; t < T; ++t) {
            h = enc.step(x.row(t), h, caches ? &(*caches)[static_cast<std::size_t>(t)] : nullptr);
            hs.row(t) = h;
        }
        return hs;
    }

    struct DecodeCache {
        std::vector<GruCell::StepCache> steps;
        Mat hd;  // T x H decoder hidden states
    };

    /// Decoder pass: h0 is the final encoder state; the input at step t is the
    /// previous step's output (zeros at t=0).
    Mat decode_seq(const Eigen::RowVectorXd& h0, Eigen::Index T, DecodeCache* cache) const {
        Mat y(T, dims());
        Eigen::RowVectorXd h = h0;
        Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(dims());
        if (cache) {
            cache->steps.resize(static_cast<std::size_t>(T));
            cache->hd.resize(T, hidden());
        }
        for (Eigen::Index t = 0; t < T; ++t) {
            h = dec.step(u, h, cache ? &cache->steps[static_cast<std::size_t>(t)] : nullptr);
            y.row(t) = h * w_out.value + b_out.value.row(0);
            u = y.row(t);
            if (cache) cache->hd.row(t) = h;
        }
        return y;
    }

    /// Backward through decoder + encoder given dL/dy (T x D).
    /// enc_caches/dec_cache must come from a forward pass on the same input.
    void backward(const Mat& x, const std::vector<GruCell::StepCache>& enc_caches,
                  const DecodeCache& dec_cache, const Mat& dy) {
        const auto T = dy.rows();
        Eigen::RowVectorXd dhd = Eigen::RowVectorXd::Zero(hidden());
        Eigen::RowVectorXd du_next;  // dL/du at step t+1 feeds dL/dy at step t
        for (Eigen::Index t = T - 1; t >= 0; --t) {
            Eigen::RowVectorXd dyt = dy.row(t);
            if (t < T - 1 && du_next.size() > 0) dyt += du_next;
            w_out.grad.noalias() += dec_cache.hd.row(t).transpose() * dyt;
            b_out.grad.row(0) += dyt;
            dhd += dyt * w_out.value.transpose();
            auto [dh_prev, du] = dec.step_backward(dec_cache.steps[static_cast<std::size_t>(t)], dhd);
            dhd = dh_prev;
            du_next = du;
        }
        // dhd is now the gradient at the decoder's initial state = encoder final state.
        Eigen::RowVectorXd dh = dhd;
        for (Eigen::Index t = x.rows() - 1; t >= 0; --t)
            dh = enc.step_backward(enc_caches[static_cast<std::size_t>(t)], dh).first;
    }
};

}  // namespace detail

/// Frozen after training; encode/reconstruct are pure and thread-safe.
class BackboneModel {
public:
    BackboneModel() : BackboneModel(16, 0) {}

    BackboneModel(int hidden, std::uint64_t seed)
        : local_("local", kCoordDims, hidden), global_("global", kGlobalDims, hidden) {
        std::mt19937_64 rng(seed);
        local_.init_weights(rng);
        global_.init_weights(rng);
    }

    int hidden() const { return local_.hidden(); }
    const BackboneTrainInfo& train_info() const { return info_; }
    BackboneTrainInfo& train_info() { return info_; }

    /// Full hidden-state sequences of both branch encoders.
    LatentPair encode(const Segment& seg) const {
        LatentPair lp;
        lp.z_local = local_.encode_seq(seg.local, nullptr);
        lp.z_global = global_.encode_seq(seg.global, nullptr);
        return lp;
    }

    /// Decodes both branches and recomposes to 34-dim coordinate space.
    Reconstruction reconstruct(const Segment& seg) const {
        const Mat hl = local_.encode_seq(seg.local, nullptr);
        const Mat hg = global_.encode_seq(seg.global, nullptr);
        const Mat local_hat = local_.decode_seq(hl.row(hl.rows() - 1), seg.local.rows(), nullptr);
        const Mat global_hat = global_.decode_seq(hg.row(hg.rows() - 1), seg.global.rows(), nullptr);
        Reconstruction rec;
        rec.raw_hat = recompose(local_hat, global_hat);
        rec.source = seg.ref;
        return rec;
    }

    std::uint64_t checksum() const {
        std::vector<const Mat*> vs;
        for (auto* p : const_cast<BackboneModel*>(this)->parameters()) vs.push_back(&p->value);
        return weight_checksum(vs);
    }

    std::vector<nn::ParamTensor*> parameters() {
        auto out = local_.params();
        for (auto* p : global_.params()) out.push_back(p);
        return out;
    }

    void zero_grads() {
        for (auto* p : parameters()) p->grad.setZero();
    }

    /// Forward + backward for one segment; accumulates grads, returns the MSE.
    /// scale multiplies the loss gradient (1/batch for mini-batch means).
    double accumulate_segment(const Segment& seg, double scale) {
        std::vector<detail::GruCell::StepCache> enc_l, enc_g;
        detail::Branch::DecodeCache dec_l, dec_g;
        const Mat hl = local_.encode_seq(seg.local, &enc_l);
        const Mat hg = global_.encode_seq(seg.global, &enc_g);
        const Mat local_hat = local_.decode_seq(hl.row(hl.rows() - 1), seg.local.rows(), &dec_l);
        const Mat global_hat = global_.decode_seq(hg.row(hg.rows() - 1), seg.global.rows(), &dec_g);
        const Mat raw_hat = recompose(local_hat, global_hat);

        const Mat diff = raw_hat - seg.raw;
        const double n = static_cast<double>(diff.size());
        const double mse = diff.squaredNorm() / n;

        // d(MSE)/draw_hat, then through recompose: x = cx + w*lx, y = cy + h*ly.
        const Mat draw = (2.0 * scale / n) * diff;
        Mat dlocal = Mat::Zero(local_hat.rows(), kCoordDims);
        Mat dglobal = Mat::Zero(global_hat.rows(), kGlobalDims);
        for (Eigen::Index t = 0; t < draw.rows(); ++t) {
            const double w = global_hat(t, 2), h = global_hat(t, 3);
            for (int j = 0; j < kJointCount; ++j) {
                const double dx = draw(t, 2 * j), dy = draw(t, 2 * j + 1);
                dlocal(t, 2 * j) = dx * w;
                dlocal(t, 2 * j + 1) = dy * h;
                dglobal(t, 0) += dx;
                dglobal(t, 1) += dy;
                dglobal(t, 2) += dx * local_hat(t, 2 * j);
                dglobal(t, 3) += dy * local_hat(t, 2 * j + 1);
            }
        }
        local_.backward(seg.local, enc_l, dec_l, dlocal);
        global_.backward(seg.global, enc_g, dec_g, dglobal);
        return mse;
    }

    /// Mean reconstruction MSE over a set of segments (no gradients).
    double mean_mse(const std::vector<Segment>& segments) const {
        double total = 0.0;
        for (const auto& s : segments) {
            const Mat diff = reconstruct(s).raw_hat - s.raw;
            total += diff.squaredNorm() / static_cast<double>(diff.size());
        }
        return segments.empty() ? 0.0 : total / static_cast<double>(segments.size());
    }

    // Checkpoint: magic "TKBB", version, dims descriptor, training metadata,
    // then weights as little-endian float32 in declared order.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ValidationError("cannot write checkpoint " + path);
        out.write("TKBB", 4);
        detail::write_u32(out, 1);
        detail::write_u32(out, static_cast<std::uint32_t>(hidden()));
        detail::write_u32(out, kCoordDims);
        detail::write_u32(out, kGlobalDims);
        detail::write_u32(out, static_cast<std::uint32_t>(info_.epochs));
        detail::write_u32(out, static_cast<std::uint32_t>(info_.seed & 0xffffffffULL));
        detail::write_u32(out, static_cast<std::uint32_t>(info_.seed >> 32));
        detail::write_f32(out, static_cast<float>(info_.final_loss));
        for (auto* p : const_cast<BackboneModel*>(this)->parameters())
            detail::write_matrix_f32(out, p->value);
    }

    static BackboneModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ValidationError("cannot open checkpoint " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::string_view(magic, 4) != "TKBB") throw ValidationError("bad backbone checkpoint magic");
        if (detail::read_u32(in) != 1) throw ValidationError("unsupported backbone checkpoint version");
        const auto hidden = static_cast<int>(detail::read_u32(in));
        if (detail::read_u32(in) != kCoordDims || detail::read_u32(in) != kGlobalDims)
            throw ValidationError("backbone checkpoint dims mismatch");
        BackboneModel m(hidden, 0);
        m.info_.epochs = static_cast<int>(detail::read_u32(in));
        const std::uint64_t lo = detail::read_u32(in);
        const std::uint64_t hi = detail::read_u32(in);
        m.info_.seed = lo | (hi << 32);
        m.info_.final_loss = static_cast<double>(detail::read_f32(in));
        for (auto* p : m.parameters()) {
            Mat w = detail::read_matrix_f32(in);
            if (w.rows() != p->value.rows() || w.cols() != p->value.cols())
                throw ValidationError("backbone checkpoint tensor shape mismatch for " + p->name);
            p->value = std::move(w);
        }
        return m;
    }

private:
    detail::Branch local_, global_;
    BackboneTrainInfo info_;
};

/// Trains on normal-labelled segments only; refuses anything else. Deterministic
/// under seed. epochs = 0 returns the seeded random initialization untouched.
inline BackboneModel train_backbone(const std::vector<Segment>& segments,
                                    const std::vector<std::string>& class_labels, int epochs,
                                    std::uint64_t seed, const BackboneConfig& cfg = {}) {
    if (segments.empty()) throw ValidationError("train_backbone: empty input");
    if (class_labels.size() != segments.size())
        throw ValidationError("train_backbone: labels/segments size mismatch");
    for (const auto& l : class_labels)
        if (l != kNormalLabel)
            throw ValidationError("train_backbone: refusing non-normal segment (label '" + l + "')");

    BackboneModel model(cfg.hidden, seed);
    model.train_info().seed = seed;
    model.train_info().epochs = epochs;

    auto params = model.parameters();
    nn::AdamState adam;
    const nn::AdamConfig adam_cfg{cfg.learning_rate, 0.9, 0.999, 1e-8};

    std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_mse = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double bsize = static_cast<double>(end - start);
            model.zero_grads();
            for (std::size_t k = start; k < end; ++k)
                epoch_mse += model.accumulate_segment(segments[order[k]], 1.0 / bsize);
            nn::adam_step(params, adam, adam_cfg);
        }
        epoch_mse /= static_cast<double>(segments.size());
        if (!std::isfinite(epoch_mse))
            throw std::runtime_error("train_backbone: loss diverged (NaN) at epoch " + std::to_string(epoch));
        model.train_info().epoch_mse.push_back(epoch_mse);
        model.train_info().final_loss = epoch_mse;
        log_info("backbone epoch " + std::to_string(epoch) + " mse " + std::to_string(epoch_mse));
    }
    return model;
}

}  // namespace trajkit
