// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/diffusion.hpp"

#include <cmath>
#include <numbers>

namespace motiondiff {

ScheduleKind parse_schedule_kind(const std::string& name) {
    if (name == "cosine") return ScheduleKind::cosine;
    if (name == "linear") return ScheduleKind::linear;
    throw Error("unknown schedule '" + name + "' (expected cosine|linear)");
}

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::cosine ? "cosine" : "linear"; }

SamplerKind parse_sampler_kind(const std::string& name) {
    if (name == "full") return SamplerKind::full;
    if (name == "strided") return SamplerKind::strided;
    throw Error("unknown sampler '" + name + "' (expected full|strided)");
}

std::string to_string(SamplerKind kind) { return kind == SamplerKind::full ? "full" : "strided"; }

void NoiseSchedule::check_step(int t) const {
    if (t < 0 || t >= steps())
        throw Error("diffusion step " + std::to_string(t) + " out of range [0, " + std::to_string(steps()) + ")");
}

NoiseSchedule make_schedule(int steps, ScheduleKind kind) {
    if (steps < 2) throw Error("make_schedule: T must be >= 2");
    constexpr double max_beta = 0.999;
    NoiseSchedule s;
    s.beta.resize(steps);
    if (kind == ScheduleKind::linear) {
        const double scale = 1000.0 / steps;
        const double lo = 1e-4 * scale, hi = 0.02 * scale;
        for (int t = 0; t < steps; ++t) s.beta[t] = std::min(lo + (hi - lo) * t / (steps - 1), max_beta);
    } else {
        constexpr double offset = 0.008;
        auto f = [&](double u) {
            const double c = std::cos((u + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
            return c * c;
        };
        for (int t = 0; t < steps; ++t) {
            const double ab_t = f(static_cast<double>(t) / steps);
            const double ab_next = f(static_cast<double>(t + 1) / steps);
            s.beta[t] = std::min(1.0 - ab_next / ab_t, max_beta);
        }
    }
    s.alpha.resize(steps);
    s.alpha_bar.resize(steps);
    double prod = 1.0;
    for (int t = 0; t < steps; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        prod *= s.alpha[t];
        s.alpha_bar[t] = prod;
    }
    return s;
}

Mat q_sample(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& sched) {
    sched.check_step(t);
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw ShapeError("q_sample: x0/eps shape mismatch");
    const double ab = sched.alpha_bar[t];
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

PosteriorCoefficients posterior_coefficients(const NoiseSchedule& sched, int t) {
    sched.check_step(t);
    if (t == 0) return {1.0, 0.0, 0.0};
    const double ab = sched.alpha_bar[t];
    const double ab_prev = sched.alpha_bar[t - 1];
    const double beta = sched.beta[t];
    PosteriorCoefficients c;
    c.x0_coef = std::sqrt(ab_prev) * beta / (1.0 - ab);
    c.xt_coef = std::sqrt(sched.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab);
    c.variance = (1.0 - ab_prev) / (1.0 - ab) * beta;
    return c;
}

Mat posterior_step(const Mat& x_t, const Mat& x0_hat, int t, const NoiseSchedule& sched, const Mat& noise) {
    sched.check_step(t);
    if (x_t.rows() != x0_hat.rows() || x_t.cols() != x0_hat.cols()) throw ShapeError("posterior_step: shape mismatch");
    if (t == 0) return x0_hat;
    if (noise.rows() != x_t.rows() || noise.cols() != x_t.cols()) throw ShapeError("posterior_step: noise shape mismatch");
    const auto c = posterior_coefficients(sched, t);
    return c.x0_coef * x0_hat + c.xt_coef * x_t + std::sqrt(c.variance) * noise;
}

Mat ddim_step(const Mat& x_t, const Mat& x0_hat, int t, int t_prev, const NoiseSchedule& sched) {
    sched.check_step(t);
    if (t_prev < 0) return x0_hat;
    if (t_prev >= t) throw Error("ddim_step: t_prev must be < t");
    const double ab = sched.alpha_bar[t];
    const double ab_prev = sched.alpha_bar[t_prev];
    const Mat eps = (x_t - std::sqrt(ab) * x0_hat) / std::sqrt(1.0 - ab);
    return std::sqrt(ab_prev) * x0_hat + std::sqrt(1.0 - ab_prev) * eps;
}

Mat guided_prediction(const Mat& uncond, const Mat& cond, double scale) {
    if (uncond.rows() != cond.rows() || uncond.cols() != cond.cols()) throw ShapeError("guidance: shape mismatch");
    return (1.0 - scale) * uncond + scale * cond;
}

std::vector<int> sampling_timesteps(const NoiseSchedule& sched, const SamplerOptions& opts) {
    const int T = sched.steps();
    std::vector<int> ts;
    if (opts.kind == SamplerKind::full) {
        for (int t = T - 1; t >= 0; --t) ts.push_back(t);
        return ts;
    }
    if (opts.steps < 1 || opts.steps > T)
        throw Error("strided sampler: steps must be in [1, " + std::to_string(T) + "]");
    if (opts.steps == 1) return {T - 1};
    for (int i = opts.steps - 1; i >= 0; --i)
        ts.push_back(static_cast<int>(std::lround(static_cast<double>(i) * (T - 1) / (opts.steps - 1))));
    return ts;
}

Mat sample_window(const X0Predictor& predict, Eigen::Index rows, Eigen::Index cols, const NoiseSchedule& sched,
                  const SamplerOptions& opts, std::uint64_t seed) {
    if (!(opts.cfg_scale >= 0.0)) throw Error("cfg scale must be >= 0");
    Rng rng(seed);
    Mat x = randn(rows, cols, rng);
    const auto ts = sampling_timesteps(sched, opts);
    auto guided = [&](const Mat& xt, int t) -> Mat {
        const double w = opts.cfg_scale;
        if (w == 1.0) return predict(xt, t, true);
        if (w == 0.0) return predict(xt, t, false);
        return guided_prediction(predict(xt, t, false), predict(xt, t, true), w);
    };
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const Mat x0 = guided(x, t);
        if (x0.rows() != rows || x0.cols() != cols) throw ShapeError("sample_window: predictor returned wrong shape");
        if (opts.kind == SamplerKind::full) {
            const Mat noise = t > 0 ? randn(rows, cols, rng) : Mat::Zero(rows, cols);
            x = posterior_step(x, x0, t, sched, noise);
        } else {
            const int t_prev = i + 1 < ts.size() ? ts[i + 1] : -1;
            x = ddim_step(x, x0, t, t_prev, sched);
        }
    }
    return x;
}

}  // namespace motiondiff
