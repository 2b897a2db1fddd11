// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/losses.hpp"

#include "motiondiff/motion.hpp"

namespace motiondiff {

namespace {

void check(const Mat& a, const Mat& b, const FrameMask& mask, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(what) + ": prediction and target shapes differ");
    if (mask.size() != static_cast<std::size_t>(a.rows()))
        throw ShapeError(std::string(what) + ": mask length differs from frame count");
}

bool valid_run(const FrameMask& mask, std::size_t i, std::size_t len) {
    for (std::size_t j = i; j < i + len; ++j)
        if (!mask[j]) return false;
    return true;
}

double masked_mse(const Mat& gt, const Mat& pred, const FrameMask& mask, Eigen::Index col0, Eigen::Index ncols,
                  Mat* grad, double weight) {
    double sum = 0;
    std::size_t frames = 0;
    for (Eigen::Index i = 0; i < gt.rows(); ++i) {
        if (!mask[i]) continue;
        sum += (pred.row(i).segment(col0, ncols) - gt.row(i).segment(col0, ncols)).squaredNorm();
        ++frames;
    }
    if (frames == 0 || ncols == 0) return 0.0;
    const double denom = static_cast<double>(frames) * ncols;
    if (grad) {
        for (Eigen::Index i = 0; i < gt.rows(); ++i)
            if (mask[i])
                grad->row(i).segment(col0, ncols) +=
                    (2.0 * weight / denom) * (pred.row(i).segment(col0, ncols) - gt.row(i).segment(col0, ncols));
    }
    return sum / denom;
}

}  // namespace

double loss_simple(const Mat& gt, const Mat& pred, const FrameMask& mask, Mat* grad, double weight) {
    check(gt, pred, mask, "loss_simple");
    return masked_mse(gt, pred, mask, 0, gt.cols(), grad, weight);
}

double loss_velocity(const Mat& gt, const Mat& pred, const FrameMask& mask, Mat* grad, double weight) {
    check(gt, pred, mask, "loss_velocity");
    const std::size_t n = mask.size();
    double sum = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!valid_run(mask, i, 2)) continue;
        sum += ((gt.row(i + 1) - gt.row(i)) - (pred.row(i + 1) - pred.row(i))).squaredNorm();
        ++pairs;
    }
    if (pairs == 0) return 0.0;
    const double denom = static_cast<double>(pairs) * gt.cols();
    if (grad) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (!valid_run(mask, i, 2)) continue;
            const RowVec r = (gt.row(i + 1) - gt.row(i)) - (pred.row(i + 1) - pred.row(i));
            grad->row(i + 1) -= (2.0 * weight / denom) * r;
            grad->row(i) += (2.0 * weight / denom) * r;
        }
    }
    return sum / denom;
}

double loss_smooth(const Mat& pred, const FrameMask& mask, Mat* grad, double weight) {
    check(pred, pred, mask, "loss_smooth");
    const std::size_t n = mask.size();
    double sum = 0;
    std::size_t triples = 0;
    for (std::size_t i = 0; i + 2 < n; ++i) {
        if (!valid_run(mask, i, 3)) continue;
        sum += (pred.row(i + 2) - 2.0 * pred.row(i + 1) + pred.row(i)).squaredNorm();
        ++triples;
    }
    if (triples == 0) return 0.0;
    const double denom = static_cast<double>(triples) * pred.cols();
    if (grad) {
        for (std::size_t i = 0; i + 2 < n; ++i) {
            if (!valid_run(mask, i, 3)) continue;
            const RowVec a = (2.0 * weight / denom) * (pred.row(i + 2) - 2.0 * pred.row(i + 1) + pred.row(i));
            grad->row(i) += a;
            grad->row(i + 1) -= 2.0 * a;
            grad->row(i + 2) += a;
        }
    }
    return sum / denom;
}

double loss_expression(const Mat& gt, const Mat& pred, const FrameMask& mask, Mat* grad, double weight) {
    check(gt, pred, mask, "loss_expression");
    if (gt.cols() < layout::delta || (gt.cols() - layout::delta) % 3 != 0)
        throw ShapeError("loss_expression: column count is not 7 + 3K");
    return masked_mse(gt, pred, mask, layout::delta, gt.cols() - layout::delta, grad, weight);
}

double combine_losses(double simple, double vel, double smooth, double exp, const LossWeights& w) {
    return simple + w.vel * vel + w.smooth * smooth + w.exp * exp;
}

LossBreakdown loss_total(const Mat& gt, const Mat& pred, const FrameMask& mask, const LossWeights& w, Mat* grad) {
    if (grad && (grad->rows() != pred.rows() || grad->cols() != pred.cols())) *grad = Mat::Zero(pred.rows(), pred.cols());
    LossBreakdown b;
    b.simple = loss_simple(gt, pred, mask, grad, 1.0);
    b.vel = loss_velocity(gt, pred, mask, grad, w.vel);
    b.smooth = loss_smooth(pred, mask, grad, w.smooth);
    b.exp = loss_expression(gt, pred, mask, grad, w.exp);
    b.total = combine_losses(b.simple, b.vel, b.smooth, b.exp, w);
    return b;
}

}  // namespace motiondiff
