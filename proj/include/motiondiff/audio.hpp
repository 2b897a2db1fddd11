// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/common.hpp"

#include <filesystem>
#include <vector>

namespace motiondiff {

/// Mono PCM, samples in [-1, 1].
struct PcmAudio {
    std::vector<double> samples;
    int sample_rate = 16000;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Reads RIFF/WAVE, PCM 16-bit mono only.
PcmAudio read_wav(const std::filesystem::path& path);
/// Writes PCM 16-bit mono; samples are clipped to [-1, 1].
void write_wav(const PcmAudio& audio, const std::filesystem::path& path);

/// Log-mel front end. One feature vector per video frame: hop = sample_rate / fps.
///
/// Filterbank: n_mels triangular filters with unit peak on the HTK mel scale
/// mel(f) = 2595 * log10(1 + f / 700). Filter m rises linearly from edge m to
/// center m+1 and falls to edge m+2, where the n_mels + 2 edges are equally
/// spaced in mel between fmin and fmax. Frame i uses a periodic Hann window of
/// win_ms centered on sample (i + 0.5) * hop, zero-padded past either end of
/// the signal, and a zero-padded FFT of fft_size points.
struct MelConfig {
    int sample_rate = 16000;
    int n_mels = 80;
    double win_ms = 40.0;
    double fps = 25.0;
    double fmin = 0.0;
    double fmax = 8000.0;
    int fft_size = 0;  // 0 selects 4x the next power of two >= window length

    int hop_samples() const;
    int win_samples() const;
    int resolved_fft_size() const;
    void validate() const;
};

inline constexpr double logmel_floor = 1e-6;

double hz_to_mel(double hz);
double mel_to_hz(double mel);
/// Center frequencies (Hz) of the n_mels filters.
std::vector<double> mel_center_frequencies(const MelConfig& cfg);
/// n_mels x (fft_size / 2 + 1).
Mat mel_filterbank(const MelConfig& cfg);

struct AudioFeatureSequence {
    Mat features;  // N x D_a
    double fps = 25.0;

    int frames() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }
    void validate() const;
};

/// floor(duration * fps) frames of log(mel_energy + 1e-6).
AudioFeatureSequence extract_logmel(const PcmAudio& audio, const MelConfig& cfg);

/// "AFSQ": magic, u32 version=1, u32 N, u32 D_a, f32 fps, then N x D_a f32 LE.
std::vector<std::uint8_t> encode_features(const AudioFeatureSequence& seq);
AudioFeatureSequence decode_features(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void save_features(const AudioFeatureSequence& seq, const std::filesystem::path& path);
AudioFeatureSequence load_features(const std::filesystem::path& path);

inline constexpr std::uint32_t afs_version = 1;

/// Reconciles length with a motion sequence: extra frames are dropped, missing
/// frames repeat the last feature row.
AudioFeatureSequence align(const AudioFeatureSequence& features, int motion_len);

}  // namespace motiondiff
