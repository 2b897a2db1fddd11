// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/binary_io.hpp"
#include "motiondiff/denoiser.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace motiondiff;

namespace {

// Counted by hand from the architecture description, independent of ParamSet.
std::size_t closed_form_count(const DenoiserConfig& c) {
    const std::size_t d = c.dim, f = c.ff_dim, dm = c.motion_dim(), da = c.audio_dim, n = c.tokens();
    const std::size_t embed = (dm * d + d) + (da * d + d) + n * d + 2 * (d * d + d);
    const std::size_t layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
    const std::size_t tail = 2 * d + (d * dm + dm) + dm + 2 * da;
    return embed + c.layers * layer + tail;
}

}  // namespace

TEST_SUITE("denoiser") {

TEST_CASE("config validation") {
    DenoiserConfig c = testutil::tiny_config();
    CHECK_NOTHROW(c.validate());
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = testutil::tiny_config();
    c.prev_window = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = testutil::tiny_config();
    c.dim = 5;
    c.heads = 5;
    CHECK_THROWS(c.validate());
}

TEST_CASE("parameter count matches closed form") {
    const DenoiserConfig defaults;
    CHECK(parameter_count(defaults) == closed_form_count(defaults));
    MESSAGE("default config parameter count: " << parameter_count(defaults));
    CHECK(parameter_count(testutil::tiny_config()) == closed_form_count(testutil::tiny_config()));
    DenoiserConfig c = testutil::tiny_config();
    c.layers = 2;
    c.heads = 2;
    c.dim = 8;
    CHECK(parameter_count(c) == closed_form_count(c));
}

TEST_CASE("init is deterministic per seed") {
    const auto c = testutil::tiny_config();
    const auto a = init_model(c, 7), b = init_model(c, 7), d = init_model(c, 8);
    CHECK(a.params.values() == b.params.values());
    CHECK(a.params.values() != d.params.values());
    CHECK(a.params.all_finite());
}

TEST_CASE("zero head makes initial output independent of motion") {
    const auto c = testutil::tiny_config();
    const auto m = init_model(c, 1);
    auto in = testutil::random_input(c, 2);
    const Mat y1 = forward(m, in);
    in.prev.setRandom();
    in.cur_noisy *= 3.0;
    CHECK(forward(m, in) == y1);
}

TEST_CASE("shape law over a config sweep") {
    for (int layers : {1, 2})
        for (int heads : {1, 2})
            for (int dim : {4, 8})
                for (auto [wp, wc] : {std::pair{2, 3}, std::pair{5, 10}}) {
                    DenoiserConfig c = testutil::tiny_config();
                    c.layers = layers;
                    c.heads = heads;
                    c.dim = dim;
                    c.prev_window = wp;
                    c.cur_window = wc;
                    auto m = init_model(c, 3);
                    testutil::randomize(m, 4);
                    const Mat y = forward(m, testutil::random_input(c, 5));
                    CHECK(y.rows() == wp + wc);
                    CHECK(y.cols() == c.motion_dim());
                }
}

TEST_CASE("forward matches scalar oracle") {
    for (int start_rows : {0, 1, 2})
        for (bool null_cond : {false, true}) {
            const auto c = testutil::tiny_config();
            auto m = DenoiserModel::create(c);
            testutil::randomize(m, 11);
            const auto in = testutil::random_input(c, 12, start_rows, null_cond);
            CHECK(oracle::max_abs_diff(oracle::denoiser_forward(m, in), forward(m, in)) < 1e-6);
        }
    // a multi-head, multi-layer config exercises head slicing too
    DenoiserConfig c = testutil::tiny_config();
    c.layers = 2;
    c.heads = 2;
    c.dim = 8;
    auto m = DenoiserModel::create(c);
    testutil::randomize(m, 13, 0.3);
    const auto in = testutil::random_input(c, 14, 1);
    CHECK(oracle::max_abs_diff(oracle::denoiser_forward(m, in), forward(m, in)) < 1e-6);
}

TEST_CASE("eval forward is pure and null condition ignores audio") {
    const auto c = testutil::tiny_config();
    auto m = DenoiserModel::create(c);
    testutil::randomize(m, 21);
    auto in = testutil::random_input(c, 22);
    const Mat y = forward(m, in);
    CHECK(forward(m, in) == y);

    // permuting two audio positions changes the output
    auto swapped = in;
    swapped.audio.row(0).swap(swapped.audio.row(3));
    CHECK(forward(m, swapped) != y);

    auto nul = in;
    nul.null_condition = true;
    const Mat yn = forward(m, nul);
    nul.audio.setRandom();
    CHECK(forward(m, nul) == yn);
    nul.audio.row(0).swap(nul.audio.row(3));
    CHECK(forward(m, nul) == yn);
}

TEST_CASE("shape and step violations throw") {
    const auto c = testutil::tiny_config();
    const auto m = init_model(c, 1);
    auto in = testutil::random_input(c, 2);
    in.t = c.diffusion_steps;
    CHECK_THROWS(forward(m, in));
    in = testutil::random_input(c, 2);
    in.prev = Mat::Zero(3, c.motion_dim());
    CHECK_THROWS_AS(forward(m, in), ShapeError);
    in = testutil::random_input(c, 2);
    in.audio = Mat::Zero(c.tokens(), c.audio_dim + 1);
    CHECK_THROWS_AS(forward(m, in), ShapeError);
}

TEST_CASE("analytic gradients match central differences") {
    const auto c = testutil::tiny_config();
    for (int start_rows : {0, 1})
        for (bool null_cond : {false, true}) {
            auto m = DenoiserModel::create(c);
            testutil::randomize(m, 31 + start_rows);
            const auto in = testutil::random_input(c, 41, start_rows, null_cond);
            Rng rng(51);
            const Mat gt = randn(c.tokens(), c.motion_dim(), rng);
            FrameMask mask(c.tokens(), true);
            mask.back() = false;
            const auto r = testutil::gradient_check(m, in, gt, mask, LossWeights{}, 200, 61);
            CAPTURE(start_rows);
            CAPTURE(null_cond);
            CHECK(r.passed >= 198);
        }
}

TEST_CASE("checkpoint round trip is bit exact") {
    auto c = testutil::tiny_config();
    c.dropout = 0.25;
    auto m = init_model(c, 5);
    testutil::randomize(m, 6);
    for (double& v : m.params.values()) v = round_f32(v);
    m.motion_stats.mean.setConstant(0.5);
    m.motion_stats.std.setConstant(2.0);
    const auto bytes = encode_model(m);
    const auto back = decode_model(bytes);
    CHECK(back.params.values() == m.params.values());
    CHECK(back.config.dropout == doctest::Approx(0.25));
    CHECK(back.motion_stats.mean == m.motion_stats.mean);
    CHECK(encode_model(back) == bytes);
    const auto in = testutil::random_input(c, 7, 1);
    CHECK(forward(back, in) == forward(m, in));

    auto dir = testutil::temp_dir("ckpt");
    save_model(m, dir / "m.bin");
    CHECK(load_model(dir / "m.bin").params.values() == m.params.values());
}

TEST_CASE("corrupted and unsupported checkpoints are rejected") {
    const auto m = init_model(testutil::tiny_config(), 5);
    auto bytes = encode_model(m);
    auto bad_magic = bytes;
    bad_magic[0] ^= 0xFF;
    CHECK_THROWS_AS(decode_model(bad_magic), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 99;
    CHECK_THROWS_AS(decode_model(bad_version), UnsupportedVersionError);
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    CHECK_THROWS_AS(decode_model(flipped), FormatError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 9);
    CHECK_THROWS_AS(decode_model(truncated), FormatError);
}

}  // TEST_SUITE
