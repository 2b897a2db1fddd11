// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/audio.hpp"

#include "motiondiff/binary_io.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

namespace motiondiff {

PcmAudio read_wav(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    ByteReader r(bytes, path.string());
    r.expect_magic("RIFF");
    r.get_u32();
    r.expect_magic("WAVE");
    int channels = 0, bits = 0, format = 0;
    PcmAudio audio;
    bool have_fmt = false;
    while (!r.at_end()) {
        const std::string id = r.get_bytes(4);
        const std::uint32_t size = r.get_u32();
        if (id == "fmt ") {
            if (size < 16) r.fail("fmt chunk too small");
            const std::size_t start = r.offset();
            format = r.get_u8() | (r.get_u8() << 8);
            channels = r.get_u8() | (r.get_u8() << 8);
            audio.sample_rate = static_cast<int>(r.get_u32());
            r.get_u32();  // byte rate
            r.get_u8();
            r.get_u8();  // block align
            bits = r.get_u8() | (r.get_u8() << 8);
            r.get_bytes(size - (r.offset() - start));
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) r.fail("data chunk before fmt chunk");
            if (format != 1 || bits != 16 || channels != 1)
                r.fail("unsupported WAV encoding (need PCM 16-bit mono, got format=" + std::to_string(format) +
                       " bits=" + std::to_string(bits) + " channels=" + std::to_string(channels) + ")");
            if (size % 2 != 0) r.fail("odd PCM16 data size");
            const std::size_t n = size / 2;
            audio.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto lo = r.get_u8();
                const auto hi = r.get_u8();
                const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
                audio.samples[i] = v / 32768.0;
            }
            return audio;
        } else {
            r.get_bytes(size + (size & 1u));
        }
    }
    r.fail("no data chunk");
}

void write_wav(const PcmAudio& audio, const std::filesystem::path& path) {
    ByteWriter w;
    const auto n = static_cast<std::uint32_t>(audio.samples.size());
    w.put_bytes("RIFF");
    w.put_u32(36 + 2 * n);
    w.put_bytes("WAVE");
    w.put_bytes("fmt ");
    w.put_u32(16);
    w.put_u8(1);
    w.put_u8(0);  // PCM
    w.put_u8(1);
    w.put_u8(0);  // mono
    w.put_u32(static_cast<std::uint32_t>(audio.sample_rate));
    w.put_u32(static_cast<std::uint32_t>(audio.sample_rate) * 2);
    w.put_u8(2);
    w.put_u8(0);
    w.put_u8(16);
    w.put_u8(0);
    w.put_bytes("data");
    w.put_u32(2 * n);
    for (double x : audio.samples) {
        const double c = std::clamp(x, -1.0, 1.0);
        const auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
        const auto u = static_cast<std::uint16_t>(v);
        w.put_u8(static_cast<std::uint8_t>(u & 0xff));
        w.put_u8(static_cast<std::uint8_t>(u >> 8));
    }
    write_file(path, w.bytes());
}

int MelConfig::hop_samples() const {
    const double hop = sample_rate / fps;
    const double rounded = std::round(hop);
    if (std::abs(hop - rounded) > 1e-9)
        throw Error("sample_rate / fps must be integral (got " + std::to_string(hop) + ")");
    return static_cast<int>(rounded);
}

int MelConfig::win_samples() const { return static_cast<int>(std::lround(win_ms * 1e-3 * sample_rate)); }

int MelConfig::resolved_fft_size() const {
    if (fft_size > 0) return fft_size;
    int n = 1;
    while (n < win_samples()) n <<= 1;
    return 4 * n;
}

void MelConfig::validate() const {
    if (sample_rate <= 0 || n_mels < 1 || !(win_ms > 0) || !(fps > 0)) throw Error("invalid mel configuration");
    if (!(fmin >= 0) || !(fmax > fmin) || fmax > sample_rate / 2.0) throw Error("invalid mel frequency range");
    if (resolved_fft_size() < win_samples()) throw Error("fft_size smaller than window");
    hop_samples();
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(const MelConfig& cfg) {
    const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i) edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
    return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(const MelConfig& cfg) {
    const auto edges = mel_edges(cfg);
    return {edges.begin() + 1, edges.end() - 1};
}

Mat mel_filterbank(const MelConfig& cfg) {
    const int nfft = cfg.resolved_fft_size();
    const int bins = nfft / 2 + 1;
    const auto edges = mel_edges(cfg);
    Mat fb = Mat::Zero(cfg.n_mels, bins);
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
        for (int b = 0; b < bins; ++b) {
            const double f = static_cast<double>(b) * cfg.sample_rate / nfft;
            const double w = std::min((f - lo) / (c - lo), (hi - f) / (hi - c));
            if (w > 0) fb(m, b) = w;
        }
    }
    return fb;
}

void AudioFeatureSequence::validate() const {
    if (features.rows() < 1 || features.cols() < 1) throw ShapeError("audio features must be N x D_a with N >= 1");
    if (!(fps > 0)) throw Error("audio feature fps must be > 0");
    if (!features.allFinite()) throw Error("audio features contain non-finite values");
}

AudioFeatureSequence extract_logmel(const PcmAudio& audio, const MelConfig& cfg) {
    cfg.validate();
    if (audio.sample_rate != cfg.sample_rate)
        throw Error("extract_logmel: sample rate " + std::to_string(audio.sample_rate) + " does not match config " +
                    std::to_string(cfg.sample_rate));
    if (audio.samples.empty()) throw Error("extract_logmel: empty audio");
    const int hop = cfg.hop_samples();
    const int win = cfg.win_samples();
    const int nfft = cfg.resolved_fft_size();
    const auto n = static_cast<long long>(audio.samples.size());
    const long long frames = n / hop;
    if (frames < 1) throw Error("extract_logmel: audio shorter than one frame");

    std::vector<double> window(win);
    for (int i = 0; i < win; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
    const Mat fb = mel_filterbank(cfg);

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> buf(nfft);
    std::vector<std::complex<double>> spec;
    Vec power(nfft / 2 + 1);

    AudioFeatureSequence out;
    out.fps = cfg.fps;
    out.features.resize(frames, cfg.n_mels);
    for (long long f = 0; f < frames; ++f) {
        std::fill(buf.begin(), buf.end(), 0.0);
        const long long center2 = (2 * f + 1) * hop;  // twice the center sample
        const auto start = static_cast<long long>(std::floor((center2 - win) / 2.0));
        for (int i = 0; i < win; ++i) {
            const long long s = start + i;
            if (s >= 0 && s < n) buf[i] = audio.samples[s] * window[i];
        }
        fft.fwd(spec, buf);
        for (int b = 0; b < power.size(); ++b) power[b] = std::norm(spec[b]);
        const Vec mel = fb * power;
        for (int m = 0; m < cfg.n_mels; ++m) out.features(f, m) = std::log(mel[m] + logmel_floor);
    }
    return out;
}

std::vector<std::uint8_t> encode_features(const AudioFeatureSequence& seq) {
    ByteWriter w;
    w.put_bytes("AFSQ");
    w.put_u32(afs_version);
    w.put_u32(static_cast<std::uint32_t>(seq.frames()));
    w.put_u32(static_cast<std::uint32_t>(seq.dim()));
    w.put_f32(static_cast<float>(seq.fps));
    for (Eigen::Index i = 0; i < seq.features.size(); ++i) w.put_f32(static_cast<float>(seq.features.data()[i]));
    return w.bytes();
}

AudioFeatureSequence decode_features(std::span<const std::uint8_t> bytes, const std::string& source) {
    ByteReader r(bytes, source);
    r.expect_magic("AFSQ");
    const std::uint32_t version = r.get_u32();
    if (version != afs_version)
        throw UnsupportedVersionError(source, 4, "unsupported AFS version " + std::to_string(version));
    const std::uint32_t n = r.get_u32();
    const std::uint32_t d = r.get_u32();
    const float fps = r.get_f32();
    if (n < 1 || d < 1) r.fail("empty feature matrix");
    if (!(fps > 0.0f) || !std::isfinite(fps)) r.fail("invalid fps");
    const std::size_t expected = static_cast<std::size_t>(n) * d * 4;
    if (r.remaining() != expected)
        r.fail("payload size mismatch: expected " + std::to_string(expected) + " bytes, found " +
               std::to_string(r.remaining()));
    AudioFeatureSequence seq;
    seq.fps = fps;
    seq.features.resize(n, d);
    for (Eigen::Index i = 0; i < seq.features.size(); ++i) seq.features.data()[i] = r.get_f32();
    return seq;
}

void save_features(const AudioFeatureSequence& seq, const std::filesystem::path& path) {
    write_file(path, encode_features(seq));
}

AudioFeatureSequence load_features(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_features(bytes, path.string());
}

AudioFeatureSequence align(const AudioFeatureSequence& features, int motion_len) {
    if (motion_len < 1) throw Error("align: motion length must be >= 1");
    if (features.frames() < 1) throw Error("align: empty feature sequence");
    AudioFeatureSequence out;
    out.fps = features.fps;
    out.features.resize(motion_len, features.dim());
    const int keep = std::min(motion_len, features.frames());
    out.features.topRows(keep) = features.features.topRows(keep);
    for (int i = keep; i < motion_len; ++i) out.features.row(i) = features.features.row(features.frames() - 1);
    return out;
}

}  // namespace motiondiff
