// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/audio.hpp"
#include "motiondiff/motion.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace motiondiff {

/// Paired audio/motion generator with a closed-form audio -> motion map.
///
/// Each clip draws a smooth envelope e(frame) in [0, 1] (random knots with
/// pauses, piecewise linear, zero-phase low-passed at cutoff_hz). The audio is
/// amplitude * e(tau) * sin(2 pi f tau + phi) for a carrier f drawn from
/// `carriers`. Motion:
///   jaw keypoint delta_y = jaw_gain * e(frame)            (exact)
///   pitch                = nod_gain * lowpass(e, nod_cutoff_hz)  (exact)
///   scale                = 1 + noise
///   every other dim      = noise
/// where noise mixes `latent_dims` slow AR(1) processes through a fixed
/// random matrix scaled by noise_floor, plus a small white component.
struct SyntheticSpec {
    int n_sequences = 30;
    double min_duration = 8.0;  // seconds
    double max_duration = 8.0;
    double fps = 25.0;
    int sample_rate = 16000;
    int keypoints = 4;
    int jaw_keypoint = 3;
    std::vector<double> carriers{220.0, 330.0, 440.0};
    double amplitude = 0.5;
    double cutoff_hz = 3.0;
    double nod_cutoff_hz = 1.0;
    double pause_p = 0.25;
    double jaw_gain = 0.05;
    double nod_gain = 0.1;
    double noise_floor = 0.01;
    int latent_dims = 3;

    void validate() const;
    int jaw_dim() const { return layout::delta + 3 * jaw_keypoint + 1; }
};

struct SyntheticClip {
    PcmAudio audio;
    MotionSequence motion;
    std::vector<double> envelope;  // ground truth e(frame)
};

std::vector<SyntheticClip> make_corpus(const SyntheticSpec& spec, std::uint64_t seed);

/// Motion implied by a given envelope (the deterministic part only, noise set
/// to zero). Linear in `envelope`.
MotionSequence motion_from_envelope(const SyntheticSpec& spec, const std::vector<double>& envelope);

/// Amplitude-modulated carrier for a frame-rate envelope.
PcmAudio audio_from_envelope(const SyntheticSpec& spec, const std::vector<double>& envelope, double carrier_hz,
                             double phase);

/// Per-frame envelope estimate from log-mel features: total mel energy above
/// the log floor, square-rooted to amplitude units and max-normalized.
std::vector<double> envelope_of(const AudioFeatureSequence& features);

/// K keypoints on a ring of radius 0.5 in the xy plane.
CanonicalKeypoints synthetic_keypoints(int keypoints);

struct ManifestEntry {
    std::filesystem::path wav;
    std::filesystem::path motion;
    std::filesystem::path envelope;
    double weight = 1.0;
};

/// Writes clip_%04d.{wav,mseq,env} plus manifest.tsv and keypoints.ckpc into `dir`.
void save_corpus(const std::vector<SyntheticClip>& clips, const SyntheticSpec& spec,
                 const std::filesystem::path& dir);

/// Reads manifest.tsv (tab-separated: wav, mseq, envelope[, weight]); paths are
/// resolved relative to the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

/// Raw little-endian f32 array.
void save_envelope(const std::vector<double>& env, const std::filesystem::path& path);
std::vector<double> load_envelope(const std::filesystem::path& path);

}  // namespace motiondiff
