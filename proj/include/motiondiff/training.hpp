// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/audio.hpp"
#include "motiondiff/denoiser.hpp"
#include "motiondiff/diffusion.hpp"
#include "motiondiff/losses.hpp"
#include "motiondiff/motion.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace motiondiff {

struct TrainConfig {
    double lr = 1e-4;
    int batch_size = 16;
    int steps = 20000;
    LossWeights weights;
    double cond_drop_p = 0.1;
    bool truncation = true;
    int min_len = 10;
    /// Probability of drawing a window that starts at frame 0, so the start
    /// features see regular updates.
    double initial_window_p = 0.1;
    double grad_clip = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0 disables periodic checkpoints
    std::filesystem::path checkpoint_path;
    std::filesystem::path log_path;  // append-only CSV; empty disables
    int log_every = 50;

    void validate() const;
};

/// One paired clip; audio is aligned to the motion length on preparation.
struct TrainingClip {
    MotionSequence motion;
    AudioFeatureSequence audio;
    double weight = 1.0;  // relative sampling rate
    std::string name;
};

/// Corpus in standardized units.
struct PreparedCorpus {
    std::vector<Mat> motion;
    std::vector<Mat> audio;
    std::vector<double> weights;
    std::vector<std::string> names;
    MotionStats motion_stats;
    FeatureStats audio_stats;
};

/// Computes statistics and standardizes. Clips shorter than min_len + 1 frames
/// are skipped with a warning on stderr.
PreparedCorpus prepare_corpus(const std::vector<TrainingClip>& clips, int min_len);
/// Standardizes with existing statistics (used when resuming).
PreparedCorpus prepare_corpus(const std::vector<TrainingClip>& clips, int min_len, const MotionStats& motion_stats,
                              const FeatureStats& audio_stats);

struct WindowBatch {
    Mat prev;       // W_pre x D_m clean context (X_start rows where the window has no history)
    Mat cur_clean;  // W_cur x D_m
    Mat cur_noisy;  // W_cur x D_m
    Mat noise;      // W_cur x D_m
    Mat audio;      // (W_pre + W_cur) x D_a
    int t = 0;
    std::vector<bool> mask;  // W_cur; contiguous true prefix
    bool null_condition = false;
    int start_rows = 0;
    int clip = 0;
    int start = 0;

    WindowInput input() const;
    /// Ground truth over the full W_pre + W_cur range.
    Mat target() const;
    FrameMask full_mask() const;
};

/// Draws cfg.batch_size training windows.
std::vector<WindowBatch> make_batch(const PreparedCorpus& corpus, const DenoiserModel& model,
                                    const NoiseSchedule& sched, const TrainConfig& cfg, Rng& rng);

/// Model plus optimizer state; (seed, step) fully determines every random draw
/// of the next step, so a restored state continues identically.
struct TrainState {
    DenoiserModel model;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    LossBreakdown last_loss;
};

TrainState init_train_state(const DenoiserConfig& dcfg, const PreparedCorpus& corpus, std::uint64_t seed);

class TrainingError : public Error {
public:
    using Error::Error;
};

/// Mean loss over a batch and its gradient w.r.t. every parameter.
LossBreakdown batch_loss_and_grad(const DenoiserModel& model, const std::vector<WindowBatch>& batch,
                                  const LossWeights& weights, std::vector<double>* grad,
                                  std::optional<std::uint64_t> dropout_seed);

/// One optimization step: batch, forward, loss, backward, global-norm clip,
/// Adam. Parameters and moments are rounded to f32 after the update.
LossBreakdown train_step(TrainState& state, const PreparedCorpus& corpus, const NoiseSchedule& sched,
                         const TrainConfig& cfg);

using StepCallback = std::function<void(const TrainState&, const LossBreakdown&)>;

/// Runs until state.step == cfg.steps, logging and checkpointing per cfg.
void run_training(TrainState& state, const PreparedCorpus& corpus, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

/// Full pipeline from clips to a trained model.
DenoiserModel train(const std::vector<TrainingClip>& clips, const TrainConfig& cfg, const DenoiserConfig& dcfg,
                    const StepCallback& on_step = {});

/// "JVTS" optimizer sidecar: magic, u32 version, u64 step, u64 seed,
/// u32 n, n f32 first moments, n f32 second moments. The model is stored
/// separately as a JVMD checkpoint.
void save_train_state(const TrainState& state, const std::filesystem::path& model_path);
TrainState load_train_state(const std::filesystem::path& model_path);

std::filesystem::path train_state_path(const std::filesystem::path& model_path);

}  // namespace motiondiff
