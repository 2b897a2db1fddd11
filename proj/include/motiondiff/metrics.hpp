// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/audio.hpp"
#include "motiondiff/motion.hpp"

#include <span>
#include <vector>

namespace motiondiff {

/// 1 - mean_i |x[i+1] - 2x[i] + x[i-1]| / (|x[i+1] - x[i]| + |x[i] - x[i-1]| + 1e-8),
/// over standardized dims. Uses the sequence's own statistics when `stats` is
/// null. Sequences shorter than 3 frames score 1.
double smoothness(const MotionSequence& seq, const MotionStats* stats = nullptr);
double smoothness(const Mat& frames);

/// Frechet distance between Gaussian fits of the pooled frames of two sets.
/// Symmetric by construction. Throws when either set has fewer than D_m + 1
/// frames.
double motion_frechet(std::span<const MotionSequence> real, std::span<const MotionSequence> gen);
double frechet_distance(const Mat& a, const Mat& b);

/// Pearson correlation between envelope_of(features) and one motion channel.
/// channel < 0 selects the jaw keypoint's delta_y (keypoint K - 1). When the
/// lengths differ the common prefix is used.
double audio_motion_corr(const MotionSequence& seq, const AudioFeatureSequence& features, int channel = -1);

/// Motion channel index of keypoint k's delta_y.
int delta_y_channel(int keypoint);

/// Pearson correlation over the common prefix; 0 if either side is constant.
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace motiondiff
