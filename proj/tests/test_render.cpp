// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/binary_io.hpp"
#include "motiondiff/render.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace motiondiff;

namespace {

// Centroid of all pixels matching a color.
Eigen::Vector2d centroid(const Image& img, std::array<std::uint8_t, 3> color) {
    double sx = 0, sy = 0, n = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.at(x, y) == color) {
                sx += x + 0.5;
                sy += y + 0.5;
                ++n;
            }
    return n > 0 ? Eigen::Vector2d(sx / n, sy / n) : Eigen::Vector2d(NAN, NAN);
}

CanonicalKeypoints three_points() {
    CanonicalKeypoints xc{Mat(3, 3)};
    xc.points << -0.5, 0.5, 0.0, 0.25, -0.25, 0.3, 0.0, 0.0, -0.2;
    return xc;
}

}  // namespace

TEST_SUITE("render") {

TEST_CASE("identity frame puts discs at canonical pixel positions") {
    const auto xc = three_points();
    const Image img = render_frame(xc, MotionFrame::identity(3), 256);
    CHECK(img.at(0, 0) == std::array<std::uint8_t, 3>{255, 255, 255});
    for (int k = 0; k < 3; ++k) {
        const Image one = render_frame(CanonicalKeypoints{xc.points.row(k)}, MotionFrame::identity(1), 256);
        const auto c = centroid(one, one.at(static_cast<int>(std::floor(project_to_pixel(xc.points.row(k).transpose(), 256).x())),
                                            static_cast<int>(std::floor(project_to_pixel(xc.points.row(k).transpose(), 256).y()))));
        const Eigen::Vector2d want((xc.points(k, 0) + 1) / 2 * 256, (1 - xc.points(k, 1)) / 2 * 256);
        CHECK(std::abs(c.x() - want.x()) <= 0.5);
        CHECK(std::abs(c.y() - want.y()) <= 0.5);
    }
}

TEST_CASE("translation shifts discs right by a quarter image") {
    const auto xc = three_points();
    MotionFrame f = MotionFrame::identity(3);
    const Image a = render_frame(xc, f, 256);
    f.t = {0.5, 0, 0};
    const Image b = render_frame(xc, f, 256);
    // first keypoint is drawn in the first palette color
    const auto color = a.at(64, 64);
    const auto ca = centroid(a, color), cb = centroid(b, color);
    CHECK(cb.x() - ca.x() == doctest::Approx(64.0).epsilon(1e-9));
    CHECK(cb.y() == doctest::Approx(ca.y()));
}

TEST_CASE("sequence rendering writes one file per frame, deterministically") {
    const auto xc = three_points();
    MotionSequence seq;
    seq.keypoints = 3;
    for (int i = 0; i < 5; ++i) {
        MotionFrame f = MotionFrame::identity(3);
        f.euler(1) = 0.1 * i;
        seq.frames.push_back(f);
    }
    const auto d1 = testutil::temp_dir("render1"), d2 = testutil::temp_dir("render2");
    CHECK(render_sequence(xc, seq, d1, 64) == 5);
    render_sequence(xc, seq, d2, 64);
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(d1)) files += e.path().extension() == ".ppm";
    CHECK(files == 5);
    for (int i = 0; i < 5; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06d.ppm", i);
        CHECK(read_file(d1 / name) == read_file(d2 / name));
    }
    std::ifstream idx(d1 / "index.txt");
    std::string first;
    std::getline(idx, first);
    CHECK(first == "frame_000000.ppm");
    const auto img = decode_ppm(read_file(d1 / "frame_000003.ppm"));
    CHECK(img.width == 64);
    CHECK(img.height == 64);
}

TEST_CASE("rendering errors") {
    MotionSequence seq;
    seq.keypoints = 2;
    seq.frames.push_back(MotionFrame::identity(2));
    CHECK_THROWS_AS(render_sequence(three_points(), seq, testutil::temp_dir("bad"), 32), ShapeError);
    const auto d = testutil::temp_dir("file");
    write_file(d / "blocker", std::vector<std::uint8_t>{1});
    seq.keypoints = 3;
    seq.frames[0] = MotionFrame::identity(3);
    CHECK_THROWS(render_sequence(three_points(), seq, d / "blocker" / "out", 32));
}

}  // TEST_SUITE
