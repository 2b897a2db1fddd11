// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/common.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace motiondiff {

/// Flattened motion vector width for K keypoints:
/// [pitch, yaw, roll, tx, ty, tz, scale, delta(K x 3, row-major)].
constexpr int motion_dim(int keypoints) { return 7 + 3 * keypoints; }

/// Offsets into the flattened motion vector.
namespace layout {
inline constexpr int euler = 0;
inline constexpr int translation = 3;
inline constexpr int scale = 6;
inline constexpr int delta = 7;
}  // namespace layout

/// Identity-normalized 3D keypoints, one row per keypoint.
struct CanonicalKeypoints {
    Mat points;  // K x 3

    int count() const { return static_cast<int>(points.rows()); }
    void validate() const;
};

/// One frame of motion parameters in canonical space.
struct MotionFrame {
    Eigen::Vector3d euler = Eigen::Vector3d::Zero();  // pitch, yaw, roll (radians)
    Eigen::RowVector3d t = Eigen::RowVector3d::Zero();
    double s = 1.0;
    Mat delta;  // K x 3

    static MotionFrame identity(int keypoints);
    int keypoint_count() const { return static_cast<int>(delta.rows()); }
    void validate() const;
};

struct MotionSequence {
    std::vector<MotionFrame> frames;
    double fps = 25.0;
    int keypoints = 0;

    int size() const { return static_cast<int>(frames.size()); }
    void validate() const;
};

/// Rotation for the row-vector convention x * R. The active rotation is
/// Rz(roll) * Ry(yaw) * Rx(pitch) acting on column vectors; the returned
/// matrix is its transpose so that x * R applies the same rotation to a row.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& euler);

/// s * (xc * R + delta) + t for every keypoint row.
Mat transform_keypoints(const CanonicalKeypoints& xc, const MotionFrame& frame);

Vec flatten(const MotionFrame& frame);
MotionFrame unflatten(const Eigen::Ref<const Vec>& v, int keypoints);

/// N x D_m matrix of flattened frames.
Mat to_matrix(const MotionSequence& seq);
MotionSequence from_matrix(const Mat& m, int keypoints, double fps);

/// Per-dimension standardization statistics. Values are kept f32-representable
/// so a saved checkpoint reproduces them exactly.
struct FeatureStats {
    Vec mean;
    Vec std;

    static constexpr double std_floor = 1e-6;

    int dim() const { return static_cast<int>(mean.size()); }
    Mat standardize(const Mat& x) const;
    Mat destandardize(const Mat& z) const;
    static FeatureStats identity(int dim);
};

using MotionStats = FeatureStats;

/// Population mean/std over all rows of all matrices.
FeatureStats compute_feature_stats(std::span<const Mat> rows);
MotionStats compute_stats(std::span<const MotionSequence> seqs);

// --- file formats -----------------------------------------------------------

/// "MSEQ": magic, u32 version=1, u32 frame_count, u32 K, f32 fps, then
/// frame_count x D_m f32 in flatten layout. All little-endian.
std::vector<std::uint8_t> encode_mseq(const MotionSequence& seq);
MotionSequence decode_mseq(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void save_mseq(const MotionSequence& seq, const std::filesystem::path& path);
MotionSequence load_mseq(const std::filesystem::path& path);

/// "CKPC": magic, u32 K, K x 3 f32.
void save_keypoints(const CanonicalKeypoints& xc, const std::filesystem::path& path);
CanonicalKeypoints load_keypoints(const std::filesystem::path& path);

inline constexpr std::uint32_t mseq_version = 1;

}  // namespace motiondiff
