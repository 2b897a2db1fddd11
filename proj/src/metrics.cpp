// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/metrics.hpp"

#include "motiondiff/synthetic.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace motiondiff {

namespace {

Mat pool(std::span<const MotionSequence> seqs) {
    Eigen::Index rows = 0, cols = -1;
    for (const auto& s : seqs) {
        rows += static_cast<Eigen::Index>(s.frames.size());
        const Eigen::Index d = motion_dim(s.keypoints);
        if (cols >= 0 && cols != d) throw ShapeError("motion_frechet: mixed keypoint counts within a set");
        cols = d;
    }
    Mat out(rows, std::max<Eigen::Index>(cols, 0));
    Eigen::Index r = 0;
    for (const auto& s : seqs) {
        const Mat m = to_matrix(s);
        out.middleRows(r, m.rows()) = m;
        r += m.rows();
    }
    return out;
}

Mat psd_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double frechet_one_way(const RowVec& mu1, const Mat& s1, const RowVec& mu2, const Mat& s2) {
    const Mat r1 = psd_sqrt(s1);
    Mat inner = r1 * s2 * r1;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(inner, Eigen::EigenvaluesOnly);
    const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
}

}  // namespace

double smoothness(const Mat& x) {
    if (x.rows() < 3) return 1.0;
    constexpr double eps = 1e-8;
    double acc = 0;
    for (Eigen::Index i = 1; i + 1 < x.rows(); ++i) {
        const double num = (x.row(i + 1) - 2.0 * x.row(i) + x.row(i - 1)).norm();
        const double den = (x.row(i + 1) - x.row(i)).norm() + (x.row(i) - x.row(i - 1)).norm() + eps;
        acc += num / den;
    }
    return 1.0 - acc / static_cast<double>(x.rows() - 2);
}

double smoothness(const MotionSequence& seq, const MotionStats* stats) {
    const Mat m = to_matrix(seq);
    if (m.rows() < 3) return 1.0;
    if (stats) return smoothness(stats->standardize(m));
    const Mat rows[] = {m};
    return smoothness(compute_feature_stats(rows).standardize(m));
}

double frechet_distance(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols()) throw ShapeError("motion_frechet: dimension mismatch between sets");
    const Eigen::Index d = a.cols();
    if (a.rows() < d + 1 || b.rows() < d + 1)
        throw Error("motion_frechet: need at least D_m + 1 = " + std::to_string(d + 1) +
                    " pooled frames per set (got " + std::to_string(a.rows()) + " and " + std::to_string(b.rows()) +
                    ")");
    auto fit = [](const Mat& x, RowVec& mu, Mat& cov) {
        mu = x.colwise().mean();
        const Mat c = x.rowwise() - mu;
        cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
    };
    RowVec mu1, mu2;
    Mat s1, s2;
    fit(a, mu1, s1);
    fit(b, mu2, s2);
    // Tr((S1 S2)^1/2) is symmetric in exact arithmetic; averaging both
    // orders makes it symmetric in floating point too.
    const double fd = 0.5 * (frechet_one_way(mu1, s1, mu2, s2) + frechet_one_way(mu2, s2, mu1, s1));
    return std::max(fd, 0.0);
}

double motion_frechet(std::span<const MotionSequence> real, std::span<const MotionSequence> gen) {
    return frechet_distance(pool(real), pool(gen));
}

int delta_y_channel(int keypoint) { return layout::delta + 3 * keypoint + 1; }

double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n < 2) return 0.0;
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0 || sbb <= 0) return 0.0;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double audio_motion_corr(const MotionSequence& seq, const AudioFeatureSequence& features, int channel) {
    const int d = motion_dim(seq.keypoints);
    if (channel < 0) channel = delta_y_channel(seq.keypoints - 1);
    if (channel >= d) throw Error("audio_motion_corr: channel " + std::to_string(channel) + " out of range");
    const auto env = envelope_of(features);
    std::vector<double> ch(seq.frames.size());
    for (std::size_t i = 0; i < ch.size(); ++i) ch[i] = flatten(seq.frames[i])(channel);
    return pearson(env, ch);
}

}  // namespace motiondiff
