// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/audio.hpp"
#include "motiondiff/denoiser.hpp"
#include "motiondiff/diffusion.hpp"
#include "motiondiff/motion.hpp"

#include <span>
#include <vector>

namespace motiondiff {

struct GenerateConfig {
    double cfg_scale = 2.0;
    SamplerKind sampler = SamplerKind::strided;
    int sample_steps = 50;
    std::uint64_t seed = 0;

    SamplerOptions sampler_options() const { return {sampler, sample_steps, cfg_scale}; }
};

/// Samples one current window (standardized units). `prev` is the clean
/// context; its first `start_rows` rows are taken from the learned start
/// features. `audio` covers W_pre + W_cur positions (standardized).
Mat sample_window(const DenoiserModel& model, const Mat& prev, const Mat& audio, int start_rows,
                  const NoiseSchedule& sched, const SamplerOptions& opts, std::uint64_t seed);

/// Sliding-window generation over the whole audio track. Windows advance by
/// W_cur; each window after the first takes the previous W_pre generated
/// frames and their audio as context. Output has exactly audio.frames() frames.
MotionSequence generate(const DenoiserModel& model, const AudioFeatureSequence& audio, const GenerateConfig& cfg);

/// Number of windows generate() runs for a given audio length.
int window_count(int audio_frames, int cur_window);

struct StitchReport {
    std::vector<double> junction_velocity;  // one per window boundary
    double within_mean = 0;
    double within_p95 = 0;
    double junction_p95 = 0;
};

/// Frame-to-frame velocity magnitudes at window boundaries (frames k * W_cur,
/// k >= 1) versus all other consecutive pairs. Velocities are L2 norms of the
/// flattened frame difference, in standardized units when `stats` is given.
StitchReport stitch_report(const MotionSequence& seq, int cur_window, const MotionStats* stats = nullptr);
/// Pools junction and within-window velocities over several sequences before
/// taking percentiles; a single clip has too few junctions for a stable p95.
StitchReport stitch_report(std::span<const MotionSequence> seqs, int cur_window, const MotionStats* stats = nullptr);

/// Linear-interpolated percentile (q in [0, 100]); 0 for an empty input.
double percentile(std::vector<double> values, double q);

}  // namespace motiondiff
