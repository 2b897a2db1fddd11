// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace motiondiff {

namespace {

constexpr double ln_eps = 1e-5;
constexpr double gelu_c = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double gelu_k = 0.044715;

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(gelu_c * (x + gelu_k * x * x * x))); }

double gelu_grad(double x) {
    const double th = std::tanh(gelu_c * (x + gelu_k * x * x * x));
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * gelu_c * (1.0 + 3.0 * gelu_k * x * x);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

Mat layer_norm(const Mat& x, const Eigen::Map<const RowVec>& gamma, const Eigen::Map<const RowVec>& beta,
               ForwardCache::Norm& cache) {
    const Eigen::Index n = x.rows(), d = x.cols();
    cache.xhat.resize(n, d);
    cache.rstd.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double r = 1.0 / std::sqrt(var + ln_eps);
        cache.rstd[i] = r;
        cache.xhat.row(i) = (x.row(i).array() - mu) * r;
    }
    Mat y = cache.xhat.array().rowwise() * gamma.array();
    y.rowwise() += beta;
    return y;
}

// Returns dx; accumulates dgamma/dbeta.
Mat layer_norm_backward(const Mat& dy, const ForwardCache::Norm& cache, const Eigen::Map<const RowVec>& gamma,
                        Eigen::Map<RowVec> dgamma, Eigen::Map<RowVec> dbeta) {
    dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    dbeta += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * gamma.array();
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const double m1 = dxhat.row(i).mean();
        const double m2 = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
        dx.row(i) = cache.rstd[i] * (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2);
    }
    return dx;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
    std::bernoulli_distribution keep(1.0 - p);
    Mat m(rows, cols);
    const double scale = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
    return m;
}

void check_input(const DenoiserConfig& cfg, const WindowInput& in) {
    const int dm = cfg.motion_dim();
    if (in.prev.rows() != cfg.prev_window || in.prev.cols() != dm)
        throw ShapeError("denoiser: prev motion must be " + std::to_string(cfg.prev_window) + " x " +
                         std::to_string(dm));
    if (in.cur_noisy.rows() != cfg.cur_window || in.cur_noisy.cols() != dm)
        throw ShapeError("denoiser: current window must be " + std::to_string(cfg.cur_window) + " x " +
                         std::to_string(dm));
    if (!in.null_condition && (in.audio.rows() != cfg.tokens() || in.audio.cols() != cfg.audio_dim))
        throw ShapeError("denoiser: audio must be " + std::to_string(cfg.tokens()) + " x " +
                         std::to_string(cfg.audio_dim));
    if (in.start_rows < 0 || in.start_rows > cfg.prev_window)
        throw ShapeError("denoiser: start_rows must be in [0, W_pre]");
    if (in.t < 0 || in.t >= cfg.diffusion_steps)
        throw Error("denoiser: step " + std::to_string(in.t) + " out of range [0, " +
                    std::to_string(cfg.diffusion_steps) + ")");
}

DenoiserLayout build_layout(const DenoiserConfig& c, ParamSet& p) {
    const int d = c.dim, dm = c.motion_dim(), da = c.audio_dim;
    DenoiserLayout l;
    l.motion_w = p.add("motion_in.weight", dm, d);
    l.motion_b = p.add("motion_in.bias", 1, d);
    l.audio_w = p.add("audio_in.weight", da, d);
    l.audio_b = p.add("audio_in.bias", 1, d);
    l.pos = p.add("pos_embed", c.tokens(), d);
    l.time_w1 = p.add("time_mlp.0.weight", d, d);
    l.time_b1 = p.add("time_mlp.0.bias", 1, d);
    l.time_w2 = p.add("time_mlp.2.weight", d, d);
    l.time_b2 = p.add("time_mlp.2.bias", 1, d);
    for (int i = 0; i < c.layers; ++i) {
        const std::string pre = "layers." + std::to_string(i) + ".";
        DenoiserLayout::Layer L{};
        L.ln1_g = p.add(pre + "norm1.weight", 1, d);
        L.ln1_b = p.add(pre + "norm1.bias", 1, d);
        L.wq = p.add(pre + "attn.q.weight", d, d);
        L.bq = p.add(pre + "attn.q.bias", 1, d);
        L.wk = p.add(pre + "attn.k.weight", d, d);
        L.bk = p.add(pre + "attn.k.bias", 1, d);
        L.wv = p.add(pre + "attn.v.weight", d, d);
        L.bv = p.add(pre + "attn.v.bias", 1, d);
        L.wo = p.add(pre + "attn.out.weight", d, d);
        L.bo = p.add(pre + "attn.out.bias", 1, d);
        L.ln2_g = p.add(pre + "norm2.weight", 1, d);
        L.ln2_b = p.add(pre + "norm2.bias", 1, d);
        L.ff1_w = p.add(pre + "ff.0.weight", d, c.ff_dim);
        L.ff1_b = p.add(pre + "ff.0.bias", 1, c.ff_dim);
        L.ff2_w = p.add(pre + "ff.2.weight", c.ff_dim, d);
        L.ff2_b = p.add(pre + "ff.2.bias", 1, d);
        l.layers.push_back(L);
    }
    l.final_g = p.add("final_norm.weight", 1, d);
    l.final_b = p.add("final_norm.bias", 1, d);
    l.head_w = p.add("head.weight", d, dm);
    l.head_b = p.add("head.bias", 1, dm);
    l.x_start = p.add("x_start", 1, dm);
    l.a_start = p.add("a_start", 1, da);
    l.null_audio = p.add("null_audio", 1, da);
    return l;
}

}  // namespace

void DenoiserConfig::validate() const {
    if (layers < 1 || heads < 1 || dim < 1 || ff_dim < 1) throw Error("denoiser config: sizes must be positive");
    if (dim % heads != 0) throw Error("denoiser config: dim must be divisible by heads");
    if (dim % 2 != 0) throw Error("denoiser config: dim must be even (sinusoidal step embedding)");
    if (prev_window < 1 || cur_window < 1) throw Error("denoiser config: windows must be >= 1");
    if (keypoints < 1 || audio_dim < 1) throw Error("denoiser config: K and D_a must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("denoiser config: dropout must be in [0, 1)");
    if (diffusion_steps < 2) throw Error("denoiser config: diffusion steps must be >= 2");
}

DenoiserModel DenoiserModel::create(const DenoiserConfig& config) {
    config.validate();
    DenoiserModel m;
    m.config = config;
    m.layout = build_layout(config, m.params);
    m.motion_stats = FeatureStats::identity(config.motion_dim());
    m.audio_stats = FeatureStats::identity(config.audio_dim);
    return m;
}

std::size_t parameter_count(const DenoiserConfig& config) { return DenoiserModel::create(config).params.size(); }

DenoiserModel init_model(const DenoiserConfig& config, std::uint64_t seed) {
    DenoiserModel m = DenoiserModel::create(config);
    Rng rng(seed);
    auto& p = m.params;
    const auto& L = m.layout;
    auto xavier = [&](std::size_t idx) {
        auto w = p.mat(idx);
        const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> u(-a, a);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    };
    auto normal = [&](std::size_t idx, double sd) {
        auto w = p.mat(idx);
        std::normal_distribution<double> n(0.0, sd);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
    };
    auto ones = [&](std::size_t idx) { p.mat(idx).setOnes(); };

    xavier(L.motion_w);
    xavier(L.audio_w);
    normal(L.pos, 0.02);
    xavier(L.time_w1);
    xavier(L.time_w2);
    for (const auto& layer : L.layers) {
        ones(layer.ln1_g);
        ones(layer.ln2_g);
        xavier(layer.wq);
        xavier(layer.wk);
        xavier(layer.wv);
        xavier(layer.wo);
        xavier(layer.ff1_w);
        xavier(layer.ff2_w);
    }
    ones(L.final_g);
    normal(L.x_start, 0.02);
    normal(L.a_start, 0.02);
    normal(L.null_audio, 0.02);
    for (double& v : p.values()) v = round_f32(v);
    return m;
}

RowVec timestep_embedding(int t, int dim) {
    const int half = dim / 2;
    RowVec e(dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e[i] = std::sin(t * freq);
        e[half + i] = std::cos(t * freq);
    }
    return e;
}

Mat forward_train(const DenoiserModel& model, const WindowInput& in, ForwardCache& cache,
                  std::optional<std::uint64_t> dropout_seed) {
    const auto& cfg = model.config;
    check_input(cfg, in);
    const auto& p = model.params;
    const auto& L = model.layout;
    const int n = cfg.tokens(), wp = cfg.prev_window, hd = cfg.head_dim();
    const bool use_dropout = dropout_seed.has_value() && cfg.dropout > 0.0;
    Rng rng(dropout_seed.value_or(0));

    cache.motion.resize(n, cfg.motion_dim());
    cache.motion.topRows(wp) = in.prev;
    cache.motion.bottomRows(cfg.cur_window) = in.cur_noisy;
    for (int i = 0; i < in.start_rows; ++i) cache.motion.row(i) = p.row(L.x_start);
    if (in.null_condition) {
        cache.audio = p.row(L.null_audio).replicate(n, 1);
    } else {
        cache.audio = in.audio;
        for (int i = 0; i < in.start_rows; ++i) cache.audio.row(i) = p.row(L.a_start);
    }

    cache.t_sin = timestep_embedding(in.t, cfg.dim);
    cache.t_h1 = cache.t_sin * p.mat(L.time_w1) + p.row(L.time_b1);
    cache.t_act = cache.t_h1.unaryExpr(&silu);
    const RowVec temb = cache.t_act * p.mat(L.time_w2) + p.row(L.time_b2);

    Mat h = cache.motion * p.mat(L.motion_w) + cache.audio * p.mat(L.audio_w) + p.mat(L.pos);
    h.rowwise() += p.row(L.motion_b) + p.row(L.audio_b) + temb;

    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    cache.layers.resize(cfg.layers);
    for (int li = 0; li < cfg.layers; ++li) {
        const auto& W = L.layers[li];
        auto& c = cache.layers[li];

        c.u = layer_norm(h, p.row(W.ln1_g), p.row(W.ln1_b), c.ln1);
        c.q = c.u * p.mat(W.wq);
        c.q.rowwise() += p.row(W.bq);
        c.k = c.u * p.mat(W.wk);
        c.k.rowwise() += p.row(W.bk);
        c.v = c.u * p.mat(W.wv);
        c.v.rowwise() += p.row(W.bv);
        c.attn.resize(n, cfg.dim);
        c.probs.resize(cfg.heads);
        for (int hh = 0; hh < cfg.heads; ++hh) {
            Mat s = (c.q.middleCols(hh * hd, hd) * c.k.middleCols(hh * hd, hd).transpose()) * att_scale;
            for (int i = 0; i < n; ++i) {
                const double mx = s.row(i).maxCoeff();
                s.row(i) = (s.row(i).array() - mx).exp();
                s.row(i) /= s.row(i).sum();
            }
            c.attn.middleCols(hh * hd, hd).noalias() = s * c.v.middleCols(hh * hd, hd);
            c.probs[hh] = std::move(s);
        }
        c.z = c.attn * p.mat(W.wo);
        c.z.rowwise() += p.row(W.bo);
        if (use_dropout) {
            c.mask1 = dropout_mask(n, cfg.dim, cfg.dropout, rng);
            h += c.z.cwiseProduct(c.mask1);
        } else {
            c.mask1.resize(0, 0);
            h += c.z;
        }

        c.u2 = layer_norm(h, p.row(W.ln2_g), p.row(W.ln2_b), c.ln2);
        c.f1 = c.u2 * p.mat(W.ff1_w);
        c.f1.rowwise() += p.row(W.ff1_b);
        c.g = c.f1.unaryExpr(&gelu);
        Mat f2 = c.g * p.mat(W.ff2_w);
        f2.rowwise() += p.row(W.ff2_b);
        if (use_dropout) {
            c.mask2 = dropout_mask(n, cfg.dim, cfg.dropout, rng);
            h += f2.cwiseProduct(c.mask2);
        } else {
            c.mask2.resize(0, 0);
            h += f2;
        }
    }

    cache.final_out = layer_norm(h, p.row(L.final_g), p.row(L.final_b), cache.final_norm);
    Mat y = cache.final_out * p.mat(L.head_w);
    y.rowwise() += p.row(L.head_b);
    return y;
}

Mat forward(const DenoiserModel& model, const WindowInput& input) {
    ForwardCache cache;
    return forward_train(model, input, cache, std::nullopt);
}

void backward(const DenoiserModel& model, const WindowInput& in, const ForwardCache& cache, const Mat& d_out,
              std::vector<double>& grad) {
    const auto& cfg = model.config;
    const auto& p = model.params;
    const auto& L = model.layout;
    const int n = cfg.tokens(), hd = cfg.head_dim();
    if (grad.size() != p.size()) throw ShapeError("backward: gradient buffer size mismatch");
    if (d_out.rows() != n || d_out.cols() != cfg.motion_dim()) throw ShapeError("backward: d_out shape mismatch");
    auto G = [&](std::size_t idx) { return p.view(idx, grad); };
    auto Gr = [&](std::size_t idx) { return p.row_view(idx, grad); };

    G(L.head_w).noalias() += cache.final_out.transpose() * d_out;
    Gr(L.head_b) += d_out.colwise().sum();
    Mat dh = layer_norm_backward(d_out * p.mat(L.head_w).transpose(), cache.final_norm, p.row(L.final_g),
                                 Gr(L.final_g), Gr(L.final_b));

    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int li = cfg.layers - 1; li >= 0; --li) {
        const auto& W = L.layers[li];
        const auto& c = cache.layers[li];

        // feed-forward branch
        const Mat df2 = c.mask2.size() ? Mat(dh.cwiseProduct(c.mask2)) : dh;
        G(W.ff2_w).noalias() += c.g.transpose() * df2;
        Gr(W.ff2_b) += df2.colwise().sum();
        Mat df1 = df2 * p.mat(W.ff2_w).transpose();
        df1.array() *= c.f1.unaryExpr(&gelu_grad).array();
        G(W.ff1_w).noalias() += c.u2.transpose() * df1;
        Gr(W.ff1_b) += df1.colwise().sum();
        dh += layer_norm_backward(df1 * p.mat(W.ff1_w).transpose(), c.ln2, p.row(W.ln2_g), Gr(W.ln2_g),
                                  Gr(W.ln2_b));

        // attention branch
        const Mat dz = c.mask1.size() ? Mat(dh.cwiseProduct(c.mask1)) : dh;
        G(W.wo).noalias() += c.attn.transpose() * dz;
        Gr(W.bo) += dz.colwise().sum();
        const Mat dattn = dz * p.mat(W.wo).transpose();
        Mat dq(n, cfg.dim), dk(n, cfg.dim), dv(n, cfg.dim);
        for (int hh = 0; hh < cfg.heads; ++hh) {
            const Mat& pr = c.probs[hh];
            const auto d_o = dattn.middleCols(hh * hd, hd);
            const Mat dp = d_o * c.v.middleCols(hh * hd, hd).transpose();
            dv.middleCols(hh * hd, hd).noalias() = pr.transpose() * d_o;
            Mat ds = pr.cwiseProduct(dp);
            const Vec rs = ds.rowwise().sum();
            ds -= (pr.array().colwise() * rs.array()).matrix();
            ds *= att_scale;
            dq.middleCols(hh * hd, hd).noalias() = ds * c.k.middleCols(hh * hd, hd);
            dk.middleCols(hh * hd, hd).noalias() = ds.transpose() * c.q.middleCols(hh * hd, hd);
        }
        G(W.wq).noalias() += c.u.transpose() * dq;
        Gr(W.bq) += dq.colwise().sum();
        G(W.wk).noalias() += c.u.transpose() * dk;
        Gr(W.bk) += dk.colwise().sum();
        G(W.wv).noalias() += c.u.transpose() * dv;
        Gr(W.bv) += dv.colwise().sum();
        Mat du = dq * p.mat(W.wq).transpose();
        du.noalias() += dk * p.mat(W.wk).transpose();
        du.noalias() += dv * p.mat(W.wv).transpose();
        dh += layer_norm_backward(du, c.ln1, p.row(W.ln1_g), Gr(W.ln1_g), Gr(W.ln1_b));
    }

    // token embedding
    G(L.motion_w).noalias() += cache.motion.transpose() * dh;
    G(L.audio_w).noalias() += cache.audio.transpose() * dh;
    const RowVec dsum = dh.colwise().sum();
    Gr(L.motion_b) += dsum;
    Gr(L.audio_b) += dsum;
    G(L.pos) += dh;

    const RowVec dh1 = (dsum * p.mat(L.time_w2).transpose()).cwiseProduct(cache.t_h1.unaryExpr(&silu_grad));
    G(L.time_w2).noalias() += cache.t_act.transpose() * dsum;
    Gr(L.time_b2) += dsum;
    G(L.time_w1).noalias() += cache.t_sin.transpose() * dh1;
    Gr(L.time_b1) += dh1;

    if (in.start_rows > 0) {
        const Mat dm = dh.topRows(in.start_rows) * p.mat(L.motion_w).transpose();
        Gr(L.x_start) += dm.colwise().sum();
    }
    if (in.null_condition) {
        Gr(L.null_audio) += dsum * p.mat(L.audio_w).transpose();
    } else if (in.start_rows > 0) {
        const Mat da = dh.topRows(in.start_rows) * p.mat(L.audio_w).transpose();
        Gr(L.a_start) += da.colwise().sum();
    }
}

}  // namespace motiondiff
