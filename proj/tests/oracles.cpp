// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

const double* tensor(const motiondiff::DenoiserModel& m, const std::string& name) {
    const auto idx = m.params.find(name);
    if (!idx) throw std::runtime_error("oracle: missing tensor " + name);
    return m.params.values().data() + m.params.entry(*idx).offset;
}

// y[i][j] = sum_k x[i][k] * W[k][j] + b[j], W stored row-major (in x out)
Grid linear(const Grid& x, const double* w, const double* b, int in, int out) {
    Grid y(x.size(), std::vector<double>(out, 0.0));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (int j = 0; j < out; ++j) {
            double acc = b ? b[j] : 0.0;
            for (int k = 0; k < in; ++k) acc += x[i][k] * w[k * out + j];
            y[i][j] = acc;
        }
    return y;
}

Grid layer_norm(const Grid& x, const double* g, const double* b) {
    Grid y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double n = static_cast<double>(x[i].size());
        double mu = 0;
        for (double v : x[i]) mu += v;
        mu /= n;
        double var = 0;
        for (double v : x[i]) var += (v - mu) * (v - mu);
        var /= n;
        for (std::size_t j = 0; j < x[i].size(); ++j) y[i][j] = (x[i][j] - mu) / std::sqrt(var + 1e-5) * g[j] + b[j];
    }
    return y;
}

}  // namespace

Grid transform(const Grid& xc, double pitch, double yaw, double roll, const double t[3], double s, const Grid& delta) {
    // Active rotation Rz(roll) Ry(yaw) Rx(pitch) applied to column vectors.
    const double cx = std::cos(pitch), sx = std::sin(pitch);
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const double cz = std::cos(roll), sz = std::sin(roll);
    double a[3][3];
    a[0][0] = cz * cy;
    a[0][1] = cz * sy * sx - sz * cx;
    a[0][2] = cz * sy * cx + sz * sx;
    a[1][0] = sz * cy;
    a[1][1] = sz * sy * sx + cz * cx;
    a[1][2] = sz * sy * cx - cz * sx;
    a[2][0] = -sy;
    a[2][1] = cy * sx;
    a[2][2] = cy * cx;
    Grid out(xc.size(), std::vector<double>(3));
    for (std::size_t k = 0; k < xc.size(); ++k)
        for (int j = 0; j < 3; ++j) {
            double r = 0;
            for (int i = 0; i < 3; ++i) r += a[j][i] * xc[k][i];
            out[k][j] = s * (r + delta[k][j]) + t[j];
        }
    return out;
}

Grid to_grid(const motiondiff::Mat& m) {
    Grid g(m.rows(), std::vector<double>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
    return g;
}

double max_abs_diff(const Grid& a, const motiondiff::Mat& b) {
    if (static_cast<Eigen::Index>(a.size()) != b.rows()) return INFINITY;
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (static_cast<Eigen::Index>(a[i].size()) != b.cols()) return INFINITY;
        for (std::size_t j = 0; j < a[i].size(); ++j)
            worst = std::max(worst, std::abs(a[i][j] - b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    return worst;
}

Grid denoiser_forward(const motiondiff::DenoiserModel& model, const motiondiff::WindowInput& in) {
    const auto& c = model.config;
    const int n = c.prev_window + c.cur_window, d = c.dim, dm = c.motion_dim(), da = c.audio_dim;
    const int hd = d / c.heads;

    Grid motion(n, std::vector<double>(dm));
    Grid audio(n, std::vector<double>(da));
    const double* xs = tensor(model, "x_start");
    const double* as = tensor(model, "a_start");
    const double* na = tensor(model, "null_audio");
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dm; ++j) {
            if (i < in.start_rows)
                motion[i][j] = xs[j];
            else if (i < c.prev_window)
                motion[i][j] = in.prev(i, j);
            else
                motion[i][j] = in.cur_noisy(i - c.prev_window, j);
        }
        for (int j = 0; j < da; ++j) {
            if (in.null_condition)
                audio[i][j] = na[j];
            else if (i < in.start_rows)
                audio[i][j] = as[j];
            else
                audio[i][j] = in.audio(i, j);
        }
    }

    // step embedding: [sin(t f_i), cos(t f_i)], f_i = 10000^(-i / half)
    Grid temb(1, std::vector<double>(d));
    const int half = d / 2;
    for (int i = 0; i < half; ++i) {
        const double f = std::pow(10000.0, -static_cast<double>(i) / half);
        temb[0][i] = std::sin(in.t * f);
        temb[0][half + i] = std::cos(in.t * f);
    }
    temb = linear(temb, tensor(model, "time_mlp.0.weight"), tensor(model, "time_mlp.0.bias"), d, d);
    for (double& v : temb[0]) v = v / (1.0 + std::exp(-v));
    temb = linear(temb, tensor(model, "time_mlp.2.weight"), tensor(model, "time_mlp.2.bias"), d, d);

    const Grid hm = linear(motion, tensor(model, "motion_in.weight"), tensor(model, "motion_in.bias"), dm, d);
    const Grid ha = linear(audio, tensor(model, "audio_in.weight"), tensor(model, "audio_in.bias"), da, d);
    const double* pos = tensor(model, "pos_embed");
    Grid h(n, std::vector<double>(d));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) h[i][j] = hm[i][j] + ha[i][j] + pos[i * d + j] + temb[0][j];

    for (int l = 0; l < c.layers; ++l) {
        const std::string pre = "layers." + std::to_string(l) + ".";
        const Grid u = layer_norm(h, tensor(model, pre + "norm1.weight"), tensor(model, pre + "norm1.bias"));
        const Grid q = linear(u, tensor(model, pre + "attn.q.weight"), tensor(model, pre + "attn.q.bias"), d, d);
        const Grid k = linear(u, tensor(model, pre + "attn.k.weight"), tensor(model, pre + "attn.k.bias"), d, d);
        const Grid v = linear(u, tensor(model, pre + "attn.v.weight"), tensor(model, pre + "attn.v.bias"), d, d);
        Grid att(n, std::vector<double>(d, 0.0));
        for (int hh = 0; hh < c.heads; ++hh)
            for (int i = 0; i < n; ++i) {
                std::vector<double> w(n);
                double mx = -INFINITY;
                for (int j = 0; j < n; ++j) {
                    double s = 0;
                    for (int e = 0; e < hd; ++e) s += q[i][hh * hd + e] * k[j][hh * hd + e];
                    w[j] = s / std::sqrt(static_cast<double>(hd));
                    mx = std::max(mx, w[j]);
                }
                double z = 0;
                for (double& x : w) z += (x = std::exp(x - mx));
                for (int j = 0; j < n; ++j)
                    for (int e = 0; e < hd; ++e) att[i][hh * hd + e] += w[j] / z * v[j][hh * hd + e];
            }
        const Grid o = linear(att, tensor(model, pre + "attn.out.weight"), tensor(model, pre + "attn.out.bias"), d, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) h[i][j] += o[i][j];

        const Grid u2 = layer_norm(h, tensor(model, pre + "norm2.weight"), tensor(model, pre + "norm2.bias"));
        Grid f = linear(u2, tensor(model, pre + "ff.0.weight"), tensor(model, pre + "ff.0.bias"), d, c.ff_dim);
        for (auto& row : f)
            for (double& x : row) x = 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
        const Grid f2 = linear(f, tensor(model, pre + "ff.2.weight"), tensor(model, pre + "ff.2.bias"), c.ff_dim, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) h[i][j] += f2[i][j];
    }
    const Grid fin = layer_norm(h, tensor(model, "final_norm.weight"), tensor(model, "final_norm.bias"));
    return linear(fin, tensor(model, "head.weight"), tensor(model, "head.bias"), d, dm);
}

}  // namespace oracle
