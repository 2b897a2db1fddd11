// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/common.hpp"

#include <vector>

namespace motiondiff {

/// Per-frame validity over a full (W_pre + W_cur) window.
using FrameMask = std::vector<bool>;

// Each loss is a mean over the elements it covers and is 0 when it covers
// nothing. When `grad` is non-null, weight * d(loss)/d(pred) is added to it.

/// Squared error over valid frames and all dimensions.
double loss_simple(const Mat& gt, const Mat& pred, const FrameMask& mask, Mat* grad = nullptr, double weight = 1.0);

/// Squared error between first differences, over pairs of consecutive valid frames.
double loss_velocity(const Mat& gt, const Mat& pred, const FrameMask& mask, Mat* grad = nullptr, double weight = 1.0);

/// Squared second difference of pred, over runs of three consecutive valid frames.
double loss_smooth(const Mat& pred, const FrameMask& mask, Mat* grad = nullptr, double weight = 1.0);

/// loss_simple restricted to the keypoint-displacement columns [7, D_m).
double loss_expression(const Mat& gt, const Mat& pred, const FrameMask& mask, Mat* grad = nullptr,
                       double weight = 1.0);

struct LossWeights {
    double vel = 5.0;
    double smooth = 0.5;
    double exp = 0.1;
};

struct LossBreakdown {
    double simple = 0;
    double vel = 0;
    double smooth = 0;
    double exp = 0;
    double total = 0;
};

/// simple + w.vel * vel + w.smooth * smooth + w.exp * exp.
double combine_losses(double simple, double vel, double smooth, double exp, const LossWeights& w);

LossBreakdown loss_total(const Mat& gt, const Mat& pred, const FrameMask& mask, const LossWeights& w,
                         Mat* grad = nullptr);

}  // namespace motiondiff
