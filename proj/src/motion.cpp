// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/motion.hpp"

#include "motiondiff/binary_io.hpp"

#include <cmath>

namespace motiondiff {

namespace {

bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

}  // namespace

void CanonicalKeypoints::validate() const {
    if (points.rows() < 1 || points.cols() != 3) throw ShapeError("canonical keypoints must be K x 3 with K >= 1");
    if (!all_finite(points)) throw Error("canonical keypoints contain non-finite values");
}

MotionFrame MotionFrame::identity(int keypoints) {
    MotionFrame f;
    f.delta = Mat::Zero(keypoints, 3);
    return f;
}

void MotionFrame::validate() const {
    if (delta.cols() != 3 || delta.rows() < 1) throw ShapeError("frame delta must be K x 3 with K >= 1");
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("frame scale must be finite and > 0");
    if (!euler.allFinite() || !t.allFinite() || !delta.allFinite()) throw Error("frame contains non-finite values");
}

void MotionSequence::validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw Error("sequence fps must be > 0");
    for (const auto& f : frames) {
        if (f.keypoint_count() != keypoints) throw ShapeError("frame keypoint count differs from sequence K");
        f.validate();
    }
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& euler) {
    const double cp = std::cos(euler[0]), sp = std::sin(euler[0]);
    const double cy = std::cos(euler[1]), sy = std::sin(euler[1]);
    const double cr = std::cos(euler[2]), sr = std::sin(euler[2]);
    Eigen::Matrix3d rx, ry, rz;
    rx << 1, 0, 0, 0, cp, -sp, 0, sp, cp;
    ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
    rz << cr, -sr, 0, sr, cr, 0, 0, 0, 1;
    return (rz * ry * rx).transpose();
}

Mat transform_keypoints(const CanonicalKeypoints& xc, const MotionFrame& frame) {
    if (xc.count() != frame.keypoint_count() || xc.points.cols() != 3)
        throw ShapeError("transform_keypoints: keypoint count mismatch (" + std::to_string(xc.count()) + " vs " +
                         std::to_string(frame.keypoint_count()) + ")");
    const Eigen::Matrix3d r = rotation_matrix(frame.euler);
    Mat out = xc.points * r + frame.delta;
    out *= frame.s;
    out.rowwise() += frame.t;
    return out;
}

Vec flatten(const MotionFrame& frame) {
    const int k = frame.keypoint_count();
    Vec v(motion_dim(k));
    v.segment<3>(layout::euler) = frame.euler;
    v.segment<3>(layout::translation) = frame.t.transpose();
    v[layout::scale] = frame.s;
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < 3; ++c) v[layout::delta + 3 * i + c] = frame.delta(i, c);
    return v;
}

MotionFrame unflatten(const Eigen::Ref<const Vec>& v, int keypoints) {
    if (keypoints < 1 || v.size() != motion_dim(keypoints))
        throw ShapeError("unflatten: expected length " + std::to_string(motion_dim(keypoints)) + ", got " +
                         std::to_string(v.size()));
    MotionFrame f;
    f.euler = v.segment<3>(layout::euler);
    f.t = v.segment<3>(layout::translation).transpose();
    f.s = v[layout::scale];
    f.delta.resize(keypoints, 3);
    for (int i = 0; i < keypoints; ++i)
        for (int c = 0; c < 3; ++c) f.delta(i, c) = v[layout::delta + 3 * i + c];
    return f;
}

Mat to_matrix(const MotionSequence& seq) {
    Mat m(seq.size(), motion_dim(seq.keypoints));
    for (int i = 0; i < seq.size(); ++i) {
        if (seq.frames[i].keypoint_count() != seq.keypoints) throw ShapeError("to_matrix: inconsistent K");
        m.row(i) = flatten(seq.frames[i]).transpose();
    }
    return m;
}

MotionSequence from_matrix(const Mat& m, int keypoints, double fps) {
    if (m.cols() != motion_dim(keypoints)) throw ShapeError("from_matrix: column count does not match K");
    MotionSequence seq;
    seq.fps = fps;
    seq.keypoints = keypoints;
    seq.frames.reserve(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) seq.frames.push_back(unflatten(m.row(i).transpose(), keypoints));
    return seq;
}

Mat FeatureStats::standardize(const Mat& x) const {
    if (x.cols() != dim()) throw ShapeError("standardize: dimension mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Mat FeatureStats::destandardize(const Mat& z) const {
    if (z.cols() != dim()) throw ShapeError("destandardize: dimension mismatch");
    Mat x = z.array().rowwise() * std.transpose().array();
    x.rowwise() += mean.transpose();
    return x;
}

FeatureStats FeatureStats::identity(int dim) { return {Vec::Zero(dim), Vec::Ones(dim)}; }

FeatureStats compute_feature_stats(std::span<const Mat> mats) {
    if (mats.empty()) throw Error("compute_stats: empty corpus");
    const Eigen::Index d = mats.front().cols();
    Vec sum = Vec::Zero(d);
    long long n = 0;
    for (const auto& m : mats) {
        if (m.cols() != d) throw ShapeError("compute_stats: inconsistent dimensions");
        sum += m.colwise().sum().transpose();
        n += m.rows();
    }
    if (n == 0) throw Error("compute_stats: corpus has no frames");
    const Vec mean = sum / static_cast<double>(n);
    Vec sq = Vec::Zero(d);
    for (const auto& m : mats) sq += (m.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    FeatureStats st;
    st.mean = mean.unaryExpr(&round_f32);
    st.std = (sq / static_cast<double>(n)).cwiseSqrt().unaryExpr([](double s) {
        return round_f32(std::max(s, FeatureStats::std_floor));
    });
    return st;
}

MotionStats compute_stats(std::span<const MotionSequence> seqs) {
    if (seqs.empty()) throw Error("compute_stats: empty corpus");
    std::vector<Mat> mats;
    mats.reserve(seqs.size());
    for (const auto& s : seqs) mats.push_back(to_matrix(s));
    return compute_feature_stats(mats);
}

std::vector<std::uint8_t> encode_mseq(const MotionSequence& seq) {
    ByteWriter w;
    w.put_bytes("MSEQ");
    w.put_u32(mseq_version);
    w.put_u32(static_cast<std::uint32_t>(seq.size()));
    w.put_u32(static_cast<std::uint32_t>(seq.keypoints));
    w.put_f32(static_cast<float>(seq.fps));
    for (const auto& f : seq.frames) {
        const Vec v = flatten(f);
        for (double x : v) w.put_f32(static_cast<float>(x));
    }
    return w.bytes();
}

MotionSequence decode_mseq(std::span<const std::uint8_t> bytes, const std::string& source) {
    ByteReader r(bytes, source);
    r.expect_magic("MSEQ");
    const std::uint32_t version = r.get_u32();
    if (version != mseq_version)
        throw UnsupportedVersionError(source, 4, "unsupported MSEQ version " + std::to_string(version));
    const std::uint32_t n = r.get_u32();
    const std::uint32_t k = r.get_u32();
    if (k < 1 || k > (1u << 20)) r.fail("invalid keypoint count " + std::to_string(k));
    const float fps = r.get_f32();
    if (!(fps > 0.0f) || !std::isfinite(fps)) r.fail("invalid fps");
    const std::size_t d = static_cast<std::size_t>(motion_dim(static_cast<int>(k)));
    if (r.remaining() != static_cast<std::size_t>(n) * d * 4)
        r.fail("payload size mismatch: expected " + std::to_string(static_cast<std::size_t>(n) * d * 4) +
               " bytes, found " + std::to_string(r.remaining()));
    MotionSequence seq;
    seq.fps = fps;
    seq.keypoints = static_cast<int>(k);
    seq.frames.reserve(n);
    Vec v(d);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) v[static_cast<Eigen::Index>(j)] = r.get_f32();
        seq.frames.push_back(unflatten(v, seq.keypoints));
    }
    return seq;
}

void save_mseq(const MotionSequence& seq, const std::filesystem::path& path) {
    const auto bytes = encode_mseq(seq);
    write_file(path, bytes);
}

MotionSequence load_mseq(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_mseq(bytes, path.string());
}

void save_keypoints(const CanonicalKeypoints& xc, const std::filesystem::path& path) {
    xc.validate();
    ByteWriter w;
    w.put_bytes("CKPC");
    w.put_u32(static_cast<std::uint32_t>(xc.count()));
    for (int i = 0; i < xc.count(); ++i)
        for (int c = 0; c < 3; ++c) w.put_f32(static_cast<float>(xc.points(i, c)));
    write_file(path, w.bytes());
}

CanonicalKeypoints load_keypoints(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    ByteReader r(bytes, path.string());
    r.expect_magic("CKPC");
    const std::uint32_t k = r.get_u32();
    if (k < 1 || k > (1u << 20)) r.fail("invalid keypoint count " + std::to_string(k));
    if (r.remaining() != static_cast<std::size_t>(k) * 12) r.fail("payload size mismatch");
    CanonicalKeypoints xc;
    xc.points.resize(k, 3);
    for (std::uint32_t i = 0; i < k; ++i)
        for (int c = 0; c < 3; ++c) xc.points(i, c) = r.get_f32();
    xc.validate();
    return xc;
}

}  // namespace motiondiff
