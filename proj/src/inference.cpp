// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/inference.hpp"

#include <algorithm>
#include <stdexcept>
#include <cmath>

namespace motiondiff {

namespace {
constexpr std::uint64_t window_stream = 0x5A3B;
}

Mat sample_window(const DenoiserModel& model, const Mat& prev, const Mat& audio, int start_rows,
                  const NoiseSchedule& sched, const SamplerOptions& opts, std::uint64_t seed) {
    const auto& c = model.config;
    if (sched.steps() != c.diffusion_steps) throw Error("sample_window: schedule length differs from model T");
    WindowInput in;
    in.prev = prev;
    in.audio = audio;
    in.start_rows = start_rows;
    auto predict = [&](const Mat& x_t, int t, bool conditional) -> Mat {
        WindowInput call = in;
        call.cur_noisy = x_t;
        call.t = t;
        call.null_condition = !conditional;
        return forward(model, call).bottomRows(c.cur_window);
    };
    return motiondiff::sample_window(predict, c.cur_window, c.motion_dim(), sched, opts, seed);
}

int window_count(int audio_frames, int cur_window) { return (audio_frames + cur_window - 1) / cur_window; }

MotionSequence generate(const DenoiserModel& model, const AudioFeatureSequence& audio, const GenerateConfig& cfg) {
    const auto& c = model.config;
    audio.validate();
    if (audio.dim() != c.audio_dim)
        throw ShapeError("generate: audio dim " + std::to_string(audio.dim()) + " does not match model (" +
                         std::to_string(c.audio_dim) + ")");
    if (!(cfg.cfg_scale >= 0)) throw Error("generate: cfg scale must be >= 0");
    const NoiseSchedule sched = make_schedule(c.diffusion_steps, c.schedule);
    const Mat a = model.audio_stats.standardize(audio.features);
    const int n = audio.frames(), wp = c.prev_window, wc = c.cur_window, dm = c.motion_dim();
    const int windows = window_count(n, wc);

    Mat out(static_cast<Eigen::Index>(windows) * wc, dm);
    for (int k = 0; k < windows; ++k) {
        const int begin = k * wc;
        const int start_rows = std::max(0, wp - begin);
        Mat prev = Mat::Zero(wp, dm);
        Mat cond = Mat::Zero(wp + wc, c.audio_dim);
        for (int j = 0; j < wp + wc; ++j) {
            const int f = begin - wp + j;
            if (f < 0) continue;  // start features
            cond.row(j) = a.row(std::min(f, n - 1));
            if (j < wp) prev.row(j) = out.row(f);
        }
        // Context continuity: every real context row is the frame generated just before.
        if (const int carried = wp - start_rows; k > 0 && carried > 0 &&
                                                 prev.bottomRows(carried) != out.middleRows(begin - carried, carried))
            throw std::logic_error("generate: context rows diverge from previously generated frames");
        out.middleRows(begin, wc) = sample_window(model, prev, cond, start_rows, sched, cfg.sampler_options(),
                                                  derive_seed(cfg.seed, window_stream, static_cast<std::uint64_t>(k)));
    }
    const Mat motion = model.motion_stats.destandardize(out.topRows(n));
    return from_matrix(motion, c.keypoints, audio.fps);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * (values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

namespace {

void collect_velocities(const MotionSequence& seq, int cur_window, const MotionStats* stats,
                        std::vector<double>& junction, std::vector<double>& within) {
    Mat m = to_matrix(seq);
    if (stats) m = stats->standardize(m);
    for (Eigen::Index i = 1; i < m.rows(); ++i) {
        const double v = (m.row(i) - m.row(i - 1)).norm();
        (i % cur_window == 0 ? junction : within).push_back(v);
    }
}

StitchReport summarize(std::vector<double> junction, const std::vector<double>& within) {
    StitchReport r;
    if (!within.empty()) {
        double s = 0;
        for (double v : within) s += v;
        r.within_mean = s / within.size();
    }
    r.within_p95 = percentile(within, 95.0);
    r.junction_p95 = percentile(junction, 95.0);
    r.junction_velocity = std::move(junction);
    return r;
}

}  // namespace

StitchReport stitch_report(const MotionSequence& seq, int cur_window, const MotionStats* stats) {
    return stitch_report(std::span<const MotionSequence>(&seq, 1), cur_window, stats);
}

StitchReport stitch_report(std::span<const MotionSequence> seqs, int cur_window, const MotionStats* stats) {
    if (cur_window < 1) throw Error("stitch_report: window must be >= 1");
    std::vector<double> junction, within;
    for (const auto& s : seqs) collect_velocities(s, cur_window, stats, junction, within);
    return summarize(std::move(junction), within);
}

}  // namespace motiondiff
