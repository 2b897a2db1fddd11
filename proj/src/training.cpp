// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/training.hpp"

#include "motiondiff/binary_io.hpp"
#include "motiondiff/parallel.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace motiondiff {

namespace {

constexpr std::uint64_t batch_stream = 0xBA7C;
constexpr std::uint64_t dropout_stream = 0xD509;

PreparedCorpus prepare_impl(const std::vector<TrainingClip>& clips, int min_len, const MotionStats* mstats,
                            const FeatureStats* astats) {
    PreparedCorpus c;
    std::vector<Mat> motion, audio;
    int keypoints = -1, audio_dim = -1;
    for (const auto& clip : clips) {
        clip.motion.validate();
        if (clip.motion.size() < min_len + 1) {
            std::cerr << "warning: skipping clip '" << clip.name << "' (" << clip.motion.size()
                      << " frames < min_len + 1 = " << min_len + 1 << ")\n";
            continue;
        }
        if (keypoints >= 0 && clip.motion.keypoints != keypoints) throw ShapeError("corpus: inconsistent K");
        if (audio_dim >= 0 && clip.audio.dim() != audio_dim) throw ShapeError("corpus: inconsistent audio dim");
        if (std::abs(clip.audio.fps - clip.motion.fps) > 1e-6)
            throw Error("corpus: audio fps differs from motion fps in clip '" + clip.name + "'");
        if (!(clip.weight > 0)) throw Error("corpus: clip weight must be > 0");
        keypoints = clip.motion.keypoints;
        audio_dim = clip.audio.dim();
        motion.push_back(to_matrix(clip.motion));
        audio.push_back(align(clip.audio, clip.motion.size()).features);
        c.weights.push_back(clip.weight);
        c.names.push_back(clip.name);
    }
    if (motion.empty()) throw Error("corpus: no usable clips");
    c.motion_stats = mstats ? *mstats : compute_feature_stats(motion);
    c.audio_stats = astats ? *astats : compute_feature_stats(audio);
    for (auto& m : motion) c.motion.push_back(c.motion_stats.standardize(m));
    for (auto& a : audio) c.audio.push_back(c.audio_stats.standardize(a));
    return c;
}

void dump_batch(const std::vector<WindowBatch>& batch, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << std::setprecision(17);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& b = batch[i];
        out << "# element " << i << " clip=" << b.clip << " start=" << b.start << " t=" << b.t
            << " null=" << b.null_condition << " start_rows=" << b.start_rows << "\n";
        out << "prev\n" << b.prev << "\ncur_noisy\n" << b.cur_noisy << "\naudio\n" << b.audio << "\n";
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0)) throw Error("train config: lr must be > 0");
    if (batch_size < 1 || steps < 0) throw Error("train config: batch_size >= 1 and steps >= 0 required");
    if (weights.vel < 0 || weights.smooth < 0 || weights.exp < 0) throw Error("train config: loss weights must be >= 0");
    if (!(cond_drop_p >= 0 && cond_drop_p <= 1)) throw Error("train config: cond_drop_p must be in [0, 1]");
    if (!(initial_window_p >= 0 && initial_window_p <= 1))
        throw Error("train config: initial_window_p must be in [0, 1]");
    if (min_len < 1) throw Error("train config: min_len must be >= 1");
    if (!(grad_clip > 0)) throw Error("train config: grad_clip must be > 0");
}

PreparedCorpus prepare_corpus(const std::vector<TrainingClip>& clips, int min_len) {
    return prepare_impl(clips, min_len, nullptr, nullptr);
}

PreparedCorpus prepare_corpus(const std::vector<TrainingClip>& clips, int min_len, const MotionStats& motion_stats,
                              const FeatureStats& audio_stats) {
    return prepare_impl(clips, min_len, &motion_stats, &audio_stats);
}

WindowInput WindowBatch::input() const {
    WindowInput in;
    in.prev = prev;
    in.cur_noisy = cur_noisy;
    in.audio = audio;
    in.null_condition = null_condition;
    in.start_rows = start_rows;
    in.t = t;
    return in;
}

Mat WindowBatch::target() const {
    Mat gt(prev.rows() + cur_clean.rows(), prev.cols());
    gt.topRows(prev.rows()) = prev;
    gt.bottomRows(cur_clean.rows()) = cur_clean;
    return gt;
}

FrameMask WindowBatch::full_mask() const {
    FrameMask m(prev.rows(), true);
    m.insert(m.end(), mask.begin(), mask.end());
    return m;
}

std::vector<WindowBatch> make_batch(const PreparedCorpus& corpus, const DenoiserModel& model,
                                    const NoiseSchedule& sched, const TrainConfig& cfg, Rng& rng) {
    const auto& dc = model.config;
    if (corpus.motion.empty()) throw Error("make_batch: empty corpus");
    if (corpus.motion.front().cols() != dc.motion_dim() || corpus.audio.front().cols() != dc.audio_dim)
        throw ShapeError("make_batch: corpus dimensions do not match model config");
    if (sched.steps() != dc.diffusion_steps) throw Error("make_batch: schedule length differs from model T");

    const int wp = dc.prev_window, wc = dc.cur_window;
    const int min_len = std::min(cfg.min_len, wc);
    std::discrete_distribution<int> pick_clip(corpus.weights.begin(), corpus.weights.end());
    std::bernoulli_distribution initial(cfg.initial_window_p);
    std::bernoulli_distribution drop(cfg.cond_drop_p);
    std::uniform_int_distribution<int> pick_t(0, sched.steps() - 1);
    const RowVec x_start = model.params.row(model.layout.x_start);

    std::vector<WindowBatch> batch(cfg.batch_size);
    for (auto& b : batch) {
        b.clip = pick_clip(rng);
        const Mat& motion = corpus.motion[b.clip];
        const Mat& audio = corpus.audio[b.clip];
        const int n = static_cast<int>(motion.rows());
        const int last_start = std::max(0, n - wc);
        const bool force_initial = initial(rng);
        b.start = force_initial ? 0 : std::uniform_int_distribution<int>(0, last_start)(rng);
        int valid = std::min(wc, n - b.start);
        if (cfg.truncation) valid = std::min(valid, std::uniform_int_distribution<int>(min_len, wc)(rng));
        b.t = pick_t(rng);
        b.null_condition = drop(rng);
        b.start_rows = std::max(0, wp - b.start);

        b.prev.resize(wp, dc.motion_dim());
        b.audio.resize(wp + wc, dc.audio_dim);
        for (int j = 0; j < wp; ++j) {
            const int f = b.start - wp + j;
            if (f < 0) {
                b.prev.row(j) = x_start;
                b.audio.row(j).setZero();  // replaced by A_start inside the model
            } else {
                b.prev.row(j) = motion.row(f);
                b.audio.row(j) = audio.row(f);
            }
        }
        b.cur_clean.resize(wc, dc.motion_dim());
        b.mask.assign(wc, false);
        for (int j = 0; j < wc; ++j) {
            const int f = b.start + std::min(j, valid - 1);
            b.cur_clean.row(j) = motion.row(f);
            b.audio.row(wp + j) = audio.row(f);
            b.mask[j] = j < valid;
        }
        b.noise = randn(wc, dc.motion_dim(), rng);
        b.cur_noisy = q_sample(b.cur_clean, b.t, b.noise, sched);
    }
    return batch;
}

TrainState init_train_state(const DenoiserConfig& dcfg, const PreparedCorpus& corpus, std::uint64_t seed) {
    TrainState s;
    s.model = init_model(dcfg, derive_seed(seed, 0x1A17));
    if (corpus.motion_stats.dim() != dcfg.motion_dim() || corpus.audio_stats.dim() != dcfg.audio_dim)
        throw ShapeError("init_train_state: corpus dimensions do not match model config");
    s.model.motion_stats = corpus.motion_stats;
    s.model.audio_stats = corpus.audio_stats;
    s.adam_m.assign(s.model.params.size(), 0.0);
    s.adam_v.assign(s.model.params.size(), 0.0);
    s.seed = seed;
    return s;
}

LossBreakdown batch_loss_and_grad(const DenoiserModel& model, const std::vector<WindowBatch>& batch,
                                  const LossWeights& weights, std::vector<double>* grad,
                                  std::optional<std::uint64_t> dropout_seed) {
    const std::size_t n = batch.size();
    std::vector<LossBreakdown> losses(n);
    std::vector<std::vector<double>> grads(grad ? n : 0);
    parallel_for(n, [&](std::size_t i) {
        const auto& b = batch[i];
        const WindowInput in = b.input();
        ForwardCache cache;
        std::optional<std::uint64_t> seed;
        if (dropout_seed) seed = derive_seed(*dropout_seed, i);
        const Mat pred = forward_train(model, in, cache, seed);
        if (grad) {
            Mat d_out = Mat::Zero(pred.rows(), pred.cols());
            losses[i] = loss_total(b.target(), pred, b.full_mask(), weights, &d_out);
            grads[i].assign(model.params.size(), 0.0);
            backward(model, in, cache, d_out, grads[i]);
        } else {
            losses[i] = loss_total(b.target(), pred, b.full_mask(), weights);
        }
    });
    LossBreakdown mean;
    for (const auto& l : losses) {
        mean.simple += l.simple / n;
        mean.vel += l.vel / n;
        mean.smooth += l.smooth / n;
        mean.exp += l.exp / n;
        mean.total += l.total / n;
    }
    if (grad) {
        grad->assign(model.params.size(), 0.0);
        for (const auto& g : grads)
            for (std::size_t j = 0; j < g.size(); ++j) (*grad)[j] += g[j] / static_cast<double>(n);
    }
    return mean;
}

LossBreakdown train_step(TrainState& state, const PreparedCorpus& corpus, const NoiseSchedule& sched,
                         const TrainConfig& cfg) {
    Rng rng(derive_seed(state.seed, batch_stream, state.step));
    const auto batch = make_batch(corpus, state.model, sched, cfg, rng);
    std::vector<double> grad;
    const auto loss = batch_loss_and_grad(state.model, batch, cfg.weights, &grad,
                                          derive_seed(state.seed, dropout_stream, state.step));
    double norm2 = 0;
    for (double g : grad) norm2 += g * g;
    if (!std::isfinite(loss.total) || !std::isfinite(norm2)) {
        std::filesystem::path dump = cfg.log_path.empty() ? std::filesystem::path("nonfinite_batch.txt")
                                                           : std::filesystem::path(cfg.log_path).concat(".nonfinite.txt");
        dump_batch(batch, dump);
        throw TrainingError("non-finite loss at step " + std::to_string(state.step) + " (total=" +
                            std::to_string(loss.total) + "); offending batch written to " + dump.string());
    }
    const double norm = std::sqrt(norm2);
    const double clip = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;

    state.step += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    auto& w = state.model.params.values();
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double g = grad[j] * clip;
        const double m = b1 * state.adam_m[j] + (1.0 - b1) * g;
        const double v = b2 * state.adam_v[j] + (1.0 - b2) * g * g;
        w[j] = round_f32(w[j] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps));
        state.adam_m[j] = round_f32(m);
        state.adam_v[j] = round_f32(v);
    }
    state.last_loss = loss;
    return loss;
}

void run_training(TrainState& state, const PreparedCorpus& corpus, const TrainConfig& cfg,
                  const StepCallback& on_step) {
    cfg.validate();
    const auto& dc = state.model.config;
    const NoiseSchedule sched = make_schedule(dc.diffusion_steps, dc.schedule);
    std::ofstream log;
    if (!cfg.log_path.empty()) {
        const bool fresh = !std::filesystem::exists(cfg.log_path) || std::filesystem::file_size(cfg.log_path) == 0;
        log.open(cfg.log_path, std::ios::app);
        if (!log) throw Error(cfg.log_path.string() + ": cannot open training log");
        if (fresh) log << "step,loss_total,loss_simple,loss_vel,loss_smooth,loss_exp,wall_time_s\n";
    }
    const auto t0 = std::chrono::steady_clock::now();
    while (state.step < static_cast<std::uint64_t>(cfg.steps)) {
        const auto loss = train_step(state, corpus, sched, cfg);
        if (on_step) on_step(state, loss);
        if (log.is_open() && (cfg.log_every <= 1 || state.step % cfg.log_every == 0 || state.step == 1)) {
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log << state.step << ',' << std::setprecision(8) << loss.total << ',' << loss.simple << ',' << loss.vel
                << ',' << loss.smooth << ',' << loss.exp << ',' << std::setprecision(6) << wall << '\n';
            log.flush();
        }
        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && state.step % cfg.checkpoint_every == 0) {
            save_model(state.model, cfg.checkpoint_path);
            save_train_state(state, cfg.checkpoint_path);
        }
    }
}

DenoiserModel train(const std::vector<TrainingClip>& clips, const TrainConfig& cfg, const DenoiserConfig& dcfg,
                    const StepCallback& on_step) {
    cfg.validate();
    dcfg.validate();
    const PreparedCorpus corpus = prepare_corpus(clips, cfg.min_len);
    TrainState state = init_train_state(dcfg, corpus, cfg.seed);
    run_training(state, corpus, cfg, on_step);
    return std::move(state.model);
}

std::filesystem::path train_state_path(const std::filesystem::path& model_path) {
    std::filesystem::path p = model_path;
    p += ".state";
    return p;
}

void save_train_state(const TrainState& state, const std::filesystem::path& model_path) {
    ByteWriter w;
    w.put_bytes("JVTS");
    w.put_u32(1);
    w.put_u64(state.step);
    w.put_u64(state.seed);
    w.put_u32(static_cast<std::uint32_t>(state.adam_m.size()));
    for (double v : state.adam_m) w.put_f32(static_cast<float>(v));
    for (double v : state.adam_v) w.put_f32(static_cast<float>(v));
    write_file(train_state_path(model_path), w.bytes());
}

TrainState load_train_state(const std::filesystem::path& model_path) {
    TrainState s;
    s.model = load_model(model_path);
    const auto path = train_state_path(model_path);
    const auto bytes = read_file(path);
    ByteReader r(bytes, path.string());
    r.expect_magic("JVTS");
    const std::uint32_t version = r.get_u32();
    if (version != 1) throw UnsupportedVersionError(path.string(), 4, "unsupported train-state version");
    s.step = r.get_u64();
    s.seed = r.get_u64();
    const std::uint32_t n = r.get_u32();
    if (n != s.model.params.size()) r.fail("moment count does not match model parameter count");
    if (r.remaining() != static_cast<std::size_t>(n) * 8) r.fail("payload size mismatch");
    s.adam_m.resize(n);
    s.adam_v.resize(n);
    for (auto& v : s.adam_m) v = r.get_f32();
    for (auto& v : s.adam_v) v = r.get_f32();
    return s;
}

}  // namespace motiondiff
