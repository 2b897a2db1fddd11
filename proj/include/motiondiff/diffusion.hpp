// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace motiondiff {

enum class ScheduleKind { cosine, linear };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Discrete forward-process coefficients, indexed by step t in [0, T).
struct NoiseSchedule {
    std::vector<double> beta;
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // cumulative product of alpha

    int steps() const { return static_cast<int>(beta.size()); }
    void check_step(int t) const;
};

/// cosine: squared-cosine alpha_bar with offset 0.008, betas clipped to 0.999.
/// linear: betas from 1e-4 to 0.02, both scaled by 1000 / T (clipped to 0.999).
NoiseSchedule make_schedule(int steps, ScheduleKind kind);

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
Mat q_sample(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& sched);

/// Gaussian posterior q(x_{t-1} | x_t, x0) for an x0-parameterized model.
struct PosteriorCoefficients {
    double x0_coef = 0;
    double xt_coef = 0;
    double variance = 0;
};

PosteriorCoefficients posterior_coefficients(const NoiseSchedule& sched, int t);

/// One ancestral step x_t -> x_{t-1}. At t == 0 returns x0_hat unchanged.
Mat posterior_step(const Mat& x_t, const Mat& x0_hat, int t, const NoiseSchedule& sched, const Mat& noise);

/// Deterministic (eta = 0) jump from step t to t_prev < t. t_prev < 0 returns x0_hat.
Mat ddim_step(const Mat& x_t, const Mat& x0_hat, int t, int t_prev, const NoiseSchedule& sched);

/// (1 - scale) * uncond + scale * cond, i.e. uncond + scale * (cond - uncond).
/// Written in this form so scale 0 and scale 1 reproduce the inputs exactly.
Mat guided_prediction(const Mat& uncond, const Mat& cond, double scale);

enum class SamplerKind { full, strided };

SamplerKind parse_sampler_kind(const std::string& name);
std::string to_string(SamplerKind kind);

struct SamplerOptions {
    SamplerKind kind = SamplerKind::strided;
    int steps = 50;  // strided only
    double cfg_scale = 2.0;
};

/// Descending visit order of diffusion steps, ending at 0.
std::vector<int> sampling_timesteps(const NoiseSchedule& sched, const SamplerOptions& opts);

/// x0 prediction for the current window; `conditional == false` requests the
/// null-condition prediction.
using X0Predictor = std::function<Mat(const Mat& x_t, int t, bool conditional)>;

/// Reverse process from pure noise for a rows x cols window. Guidance is
/// applied to every x0 prediction; the unconditional (or conditional) call is
/// skipped when its weight is exactly zero.
Mat sample_window(const X0Predictor& predict, Eigen::Index rows, Eigen::Index cols, const NoiseSchedule& sched,
                  const SamplerOptions& opts, std::uint64_t seed);

}  // namespace motiondiff
