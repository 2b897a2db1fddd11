// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/common.hpp"
#include "motiondiff/diffusion.hpp"
#include "motiondiff/motion.hpp"
#include "motiondiff/params.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace motiondiff {

struct DenoiserConfig {
    int layers = 6;
    int heads = 8;
    int dim = 512;
    int ff_dim = 2048;
    int prev_window = 25;   // W_pre
    int cur_window = 100;   // W_cur
    int keypoints = 21;     // D_m = 7 + 3K
    int audio_dim = 80;     // D_a
    double dropout = 0.1;
    int diffusion_steps = 500;
    ScheduleKind schedule = ScheduleKind::cosine;

    int motion_dim() const { return motiondiff::motion_dim(keypoints); }
    int tokens() const { return prev_window + cur_window; }
    int head_dim() const { return dim / heads; }
    void validate() const;
};

/// Parameter indices into the model's ParamSet.
struct DenoiserLayout {
    struct Layer {
        std::size_t ln1_g, ln1_b;
        std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
        std::size_t ln2_g, ln2_b;
        std::size_t ff1_w, ff1_b, ff2_w, ff2_b;
    };
    std::size_t motion_w, motion_b;
    std::size_t audio_w, audio_b;
    std::size_t pos;
    std::size_t time_w1, time_b1, time_w2, time_b2;
    std::vector<Layer> layers;
    std::size_t final_g, final_b;
    std::size_t head_w, head_b;
    std::size_t x_start, a_start, null_audio;
};

/// Windowed self-attention denoiser. Token i carries motion row i (previous
/// clean context for i < W_pre, current noisy window after), audio row i, a
/// learned position embedding and the diffusion-step embedding. The network
/// predicts clean motion for all W_pre + W_cur positions.
struct DenoiserModel {
    DenoiserConfig config;
    ParamSet params;
    DenoiserLayout layout;
    MotionStats motion_stats;
    FeatureStats audio_stats;

    /// Zero-filled parameters with the layout implied by `config`.
    static DenoiserModel create(const DenoiserConfig& config);
};

std::size_t parameter_count(const DenoiserConfig& config);

/// Xavier-uniform projections, N(0, 0.02^2) embeddings and start/null
/// features, unit LayerNorm gains, zero biases and a zero output head, so the
/// initial prediction is identically zero. Values are rounded to f32.
DenoiserModel init_model(const DenoiserConfig& config, std::uint64_t seed);

/// One denoiser call. Motion and audio are in standardized units.
struct WindowInput {
    Mat prev;       // W_pre x D_m; the first start_rows rows are replaced by X_start
    Mat cur_noisy;  // W_cur x D_m
    Mat audio;      // (W_pre + W_cur) x D_a; first start_rows rows replaced by A_start
    bool null_condition = false;  // every audio position becomes the null embedding
    int start_rows = 0;
    int t = 0;
};

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
    struct Norm {
        Mat xhat;
        Vec rstd;
    };
    struct Layer {
        Norm ln1;
        Mat u, q, k, v;
        std::vector<Mat> probs;
        Mat attn, z, mask1;
        Norm ln2;
        Mat u2, f1, g, mask2;
    };
    Mat motion, audio;
    RowVec t_sin, t_h1, t_act;
    std::vector<Layer> layers;
    Norm final_norm;
    Mat final_out;
};

/// Eval-mode forward: (W_pre + W_cur) x D_m.
Mat forward(const DenoiserModel& model, const WindowInput& input);

/// Training forward. Dropout masks are drawn from `dropout_seed` when present
/// and config.dropout > 0; otherwise identical to eval mode.
Mat forward_train(const DenoiserModel& model, const WindowInput& input, ForwardCache& cache,
                  std::optional<std::uint64_t> dropout_seed);

/// Accumulates d(loss)/d(params) into `grad` (same layout as model.params).
void backward(const DenoiserModel& model, const WindowInput& input, const ForwardCache& cache, const Mat& d_out,
              std::vector<double>& grad);

/// Sinusoidal step embedding of width `dim` (sin half, then cos half).
RowVec timestep_embedding(int t, int dim);

// --- checkpoint ("JVMD") -----------------------------------------------------

inline constexpr std::uint32_t checkpoint_version = 1;

std::vector<std::uint8_t> encode_model(const DenoiserModel& model);
DenoiserModel decode_model(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void save_model(const DenoiserModel& model, const std::filesystem::path& path);
DenoiserModel load_model(const std::filesystem::path& path);

}  // namespace motiondiff
