// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/binary_io.hpp"
#include "motiondiff/motion.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numbers>

using namespace motiondiff;

namespace {

MotionFrame random_frame(int k, Rng& rng) {
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MotionFrame f = MotionFrame::identity(k);
    f.euler = {ang(rng), ang(rng), ang(rng)};
    f.t = {u(rng), u(rng), u(rng)};
    f.s = 0.5 + std::abs(u(rng));
    f.delta = randn(k, 3, rng) * 0.1;
    return f;
}

}  // namespace

TEST_SUITE("motion") {

TEST_CASE("rotation examples") {
    CHECK(rotation_matrix({0, 0, 0}) == Eigen::Matrix3d::Identity());

    const Eigen::RowVector3d x(1, 0, 0);
    const Eigen::RowVector3d y = x * rotation_matrix({0, std::numbers::pi / 2, 0});
    CHECK(std::abs(y(0)) < 1e-15);
    CHECK(std::abs(y(1)) < 1e-15);
    CHECK(y(2) == doctest::Approx(-1.0));

    const Eigen::Matrix3d r = rotation_matrix({std::numbers::pi, 0, 0});
    CHECK((r * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotation is orthonormal for random angles") {
    Rng rng(1);
    std::uniform_real_distribution<double> ang(-10.0, 10.0);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const Eigen::Matrix3d r = rotation_matrix({ang(rng), ang(rng), ang(rng)});
        worst = std::max(worst, (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(r.determinant() - 1.0));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("transform examples") {
    CanonicalKeypoints xc{Mat(1, 3)};
    xc.points << 1, 1, 1;
    MotionFrame f = MotionFrame::identity(1);
    CHECK(transform_keypoints(xc, f) == xc.points);
    f.s = 2;
    f.t = {1, 0, 0};
    const Mat out = transform_keypoints(xc, f);
    CHECK(out(0, 0) == 3.0);
    CHECK(out(0, 1) == 2.0);
    CHECK(out(0, 2) == 2.0);
}

TEST_CASE("transform matches scalar oracle and is equivariant in scale") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + trial % 21;
        CanonicalKeypoints xc{randn(k, 3, rng)};
        const MotionFrame f = random_frame(k, rng);
        const double t[3] = {f.t(0), f.t(1), f.t(2)};
        const auto expected =
            oracle::transform(oracle::to_grid(xc.points), f.euler(0), f.euler(1), f.euler(2), t, f.s,
                              oracle::to_grid(f.delta));
        const Mat got = transform_keypoints(xc, f);
        REQUIRE(oracle::max_abs_diff(expected, got) < 1e-9);

        MotionFrame g = f;
        g.s = 3.0 * f.s;
        const Mat scaled = transform_keypoints(xc, g);
        const Mat lhs = scaled.rowwise() - g.t;
        const Mat rhs = 3.0 * (got.rowwise() - f.t);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("transform rejects keypoint mismatch") {
    CanonicalKeypoints xc{Mat::Zero(3, 3)};
    CHECK_THROWS_AS(transform_keypoints(xc, MotionFrame::identity(2)), ShapeError);
}

TEST_CASE("flatten layout and round trip") {
    CHECK(motion_dim(21) == 70);
    const Vec v = flatten(MotionFrame::identity(1));
    Vec expected(10);
    expected << 0, 0, 0, 0, 0, 0, 1, 0, 0, 0;
    CHECK(v == expected);

    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const MotionFrame f = random_frame(4, rng);
        const MotionFrame g = unflatten(flatten(f), 4);
        REQUIRE(g.euler == f.euler);
        REQUIRE(g.t == f.t);
        REQUIRE(g.s == f.s);
        REQUIRE(g.delta == f.delta);
    }
    CHECK_THROWS(unflatten(Vec::Zero(11), 1));
}

TEST_CASE("stats examples") {
    Mat a = Mat::Constant(4, 3, 2.5);
    std::vector<Mat> one{a};
    const auto s = compute_feature_stats(one);
    CHECK(s.std(0) == round_f32(FeatureStats::std_floor));
    CHECK(s.standardize(a).cwiseAbs().maxCoeff() == 0.0);

    Mat b(2, 3);
    b << 0, 0, 0, 2, 2, 2;
    std::vector<Mat> two{b};
    const auto s2 = compute_feature_stats(two);
    CHECK(s2.mean(1) == 1.0);
    CHECK(s2.std(1) == 1.0);

    CHECK_THROWS(compute_feature_stats(std::span<const Mat>{}));
    CHECK_THROWS(compute_stats(std::span<const MotionSequence>{}));
}

TEST_CASE("standardize round trip and corpus moments") {
    Rng rng(4);
    std::vector<Mat> rows{randn(300, 5, rng) * 3.0, randn(200, 5, rng).array() + 2.0};
    const auto s = compute_feature_stats(rows);
    for (const auto& r : rows) CHECK((s.destandardize(s.standardize(r)) - r).cwiseAbs().maxCoeff() < 1e-9);
    Mat all(500, 5);
    all << s.standardize(rows[0]), s.standardize(rows[1]);
    CHECK(all.colwise().mean().cwiseAbs().maxCoeff() < 1e-6);
    const RowVec sd = ((all.rowwise() - all.colwise().mean()).array().square().colwise().mean()).sqrt();
    CHECK((sd.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("MSEQ round trip and rejection") {
    Rng rng(5);
    MotionSequence seq;
    seq.keypoints = 3;
    seq.fps = 25;
    for (int i = 0; i < 10; ++i) {
        MotionFrame f = random_frame(3, rng);
        // f32-representable values round-trip exactly
        f.euler = f.euler.unaryExpr([](double x) { return round_f32(x); });
        f.t = f.t.unaryExpr([](double x) { return round_f32(x); });
        f.s = round_f32(f.s);
        f.delta = f.delta.unaryExpr([](double x) { return round_f32(x); });
        seq.frames.push_back(f);
    }
    const auto bytes = encode_mseq(seq);
    CHECK(bytes.size() == 20 + 10 * motion_dim(3) * 4);
    const auto back = decode_mseq(bytes);
    CHECK(back.keypoints == 3);
    CHECK(back.fps == 25.0);
    CHECK((to_matrix(back) - to_matrix(seq)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(encode_mseq(back) == bytes);

    auto bad = bytes;
    bad[1] = 'X';
    CHECK_THROWS_AS(decode_mseq(bad), FormatError);
    auto truncated = bytes;
    truncated.pop_back();
    try {
        decode_mseq(truncated);
        FAIL("truncated MSEQ accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
    auto version = bytes;
    version[4] = 2;
    CHECK_THROWS_AS(decode_mseq(version), UnsupportedVersionError);

    const auto dir = testutil::temp_dir("mseq");
    save_mseq(seq, dir / "a.mseq");
    CHECK(read_file(dir / "a.mseq") == bytes);
}

TEST_CASE("CKPC round trip") {
    Rng rng(6);
    CanonicalKeypoints xc{randn(21, 3, rng).unaryExpr([](double x) { return round_f32(x); })};
    const auto dir = testutil::temp_dir("ckpc");
    save_keypoints(xc, dir / "k.ckpc");
    const auto first = read_file(dir / "k.ckpc");
    CHECK(first.size() == 8 + 21 * 3 * 4);
    const auto back = load_keypoints(dir / "k.ckpc");
    CHECK(back.points == xc.points);
    save_keypoints(back, dir / "k2.ckpc");
    CHECK(read_file(dir / "k2.ckpc") == first);

    auto bad = first;
    bad[0] = 'X';
    write_file(dir / "bad.ckpc", bad);
    CHECK_THROWS_AS(load_keypoints(dir / "bad.ckpc"), FormatError);
}

}  // TEST_SUITE
