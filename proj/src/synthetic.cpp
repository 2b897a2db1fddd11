// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/synthetic.hpp"

#include "motiondiff/binary_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace motiondiff {

namespace {

double pole(double cutoff_hz, double rate) { return std::exp(-2.0 * std::numbers::pi * cutoff_hz / rate); }

std::vector<double> one_pole(const std::vector<double>& x, double a) {
    std::vector<double> y(x.size());
    double s = x.empty() ? 0.0 : x.front();
    for (std::size_t i = 0; i < x.size(); ++i) {
        s = a * s + (1.0 - a) * x[i];
        y[i] = s;
    }
    return y;
}

// Forward-backward one-pole: zero phase.
std::vector<double> zero_phase(const std::vector<double>& x, double a) {
    auto y = one_pole(x, a);
    std::reverse(y.begin(), y.end());
    y = one_pole(y, a);
    std::reverse(y.begin(), y.end());
    return y;
}

std::vector<double> random_envelope(const SyntheticSpec& spec, int frames, Rng& rng) {
    std::uniform_real_distribution<double> gap(0.08, 0.35);
    std::uniform_real_distribution<double> level(0.3, 1.0);
    std::bernoulli_distribution pause(spec.pause_p);
    const double duration = frames / spec.fps;
    std::vector<double> kt{0.0}, kv{pause(rng) ? 0.0 : level(rng)};
    while (kt.back() < duration) {
        kt.push_back(kt.back() + gap(rng));
        kv.push_back(pause(rng) ? 0.0 : level(rng));
    }
    std::vector<double> env(frames);
    std::size_t k = 0;
    for (int i = 0; i < frames; ++i) {
        const double tau = (i + 0.5) / spec.fps;
        while (k + 1 < kt.size() && kt[k + 1] < tau) ++k;
        const double u = (tau - kt[k]) / (kt[k + 1] - kt[k]);
        env[i] = kv[k] + u * (kv[k + 1] - kv[k]);
    }
    env = zero_phase(env, pole(spec.cutoff_hz, spec.fps));
    for (double& v : env) v = std::clamp(v, 0.0, 1.0);
    return env;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n_sequences < 1) throw Error("synthetic spec: n_sequences must be >= 1");
    if (!(min_duration > 0) || max_duration < min_duration) throw Error("synthetic spec: invalid duration range");
    if (!(fps > 0) || sample_rate <= 0) throw Error("synthetic spec: invalid rates");
    if (keypoints < 1 || jaw_keypoint < 0 || jaw_keypoint >= keypoints)
        throw Error("synthetic spec: jaw keypoint index must be < K");
    if (!(cutoff_hz > 0 && cutoff_hz < fps / 2) || !(nod_cutoff_hz > 0 && nod_cutoff_hz < fps / 2))
        throw Error("synthetic spec: cutoff must be in (0, fps / 2)");
    if (carriers.empty()) throw Error("synthetic spec: need at least one carrier frequency");
    for (double c : carriers)
        if (!(c > 0 && c < sample_rate / 2.0)) throw Error("synthetic spec: carrier outside (0, Nyquist)");
    if (!std::isfinite(jaw_gain) || !std::isfinite(nod_gain) || !(noise_floor >= 0) || !std::isfinite(amplitude))
        throw Error("synthetic spec: gains must be finite");
    if (latent_dims < 0) throw Error("synthetic spec: latent_dims must be >= 0");
    const double hop = sample_rate / fps;
    if (std::abs(hop - std::round(hop)) > 1e-9) throw Error("synthetic spec: sample_rate / fps must be integral");
}

MotionSequence motion_from_envelope(const SyntheticSpec& spec, const std::vector<double>& envelope) {
    const int n = static_cast<int>(envelope.size());
    const auto nod = one_pole(envelope, pole(spec.nod_cutoff_hz, spec.fps));
    Mat m = Mat::Zero(n, motion_dim(spec.keypoints));
    for (int i = 0; i < n; ++i) {
        m(i, layout::scale) = 1.0;
        m(i, spec.jaw_dim()) = spec.jaw_gain * envelope[i];
        m(i, layout::euler) = spec.nod_gain * nod[i];
    }
    return from_matrix(m, spec.keypoints, spec.fps);
}

PcmAudio audio_from_envelope(const SyntheticSpec& spec, const std::vector<double>& envelope, double carrier_hz,
                             double phase) {
    const int hop = static_cast<int>(std::lround(spec.sample_rate / spec.fps));
    const int n = static_cast<int>(envelope.size());
    PcmAudio audio;
    audio.sample_rate = spec.sample_rate;
    audio.samples.resize(static_cast<std::size_t>(n) * hop);
    for (std::size_t s = 0; s < audio.samples.size(); ++s) {
        // envelope value at frame centers, linear in between
        const double pos = (static_cast<double>(s) + 0.5) / hop - 0.5;
        double e;
        if (pos <= 0)
            e = envelope.front();
        else if (pos >= n - 1)
            e = envelope.back();
        else {
            const auto i = static_cast<int>(std::floor(pos));
            e = envelope[i] + (pos - i) * (envelope[i + 1] - envelope[i]);
        }
        const double tau = static_cast<double>(s) / spec.sample_rate;
        audio.samples[s] = spec.amplitude * e * std::sin(2.0 * std::numbers::pi * carrier_hz * tau + phase);
    }
    return audio;
}

std::vector<SyntheticClip> make_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int dm = motion_dim(spec.keypoints);
    // Mixing matrix shared by every clip of the corpus.
    Rng mix_rng(derive_seed(seed, 0x313C));
    Mat mixing = randn(dm, spec.latent_dims, mix_rng) * spec.noise_floor;
    mixing.row(spec.jaw_dim()).setZero();
    mixing.row(layout::euler).setZero();

    std::vector<SyntheticClip> clips;
    for (int c = 0; c < spec.n_sequences; ++c) {
        Rng rng(derive_seed(seed, 0xC11F, static_cast<std::uint64_t>(c)));
        const double duration = std::uniform_real_distribution<double>(spec.min_duration, spec.max_duration)(rng);
        const int frames = std::max(1, static_cast<int>(std::floor(duration * spec.fps + 1e-9)));
        SyntheticClip clip;
        clip.envelope = random_envelope(spec, frames, rng);
        const double carrier =
            spec.carriers[std::uniform_int_distribution<std::size_t>(0, spec.carriers.size() - 1)(rng)];
        const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
        clip.audio = audio_from_envelope(spec, clip.envelope, carrier, phase);

        Mat m = to_matrix(motion_from_envelope(spec, clip.envelope));
        if (spec.latent_dims > 0 && spec.noise_floor > 0) {
            const double rho = pole(0.5, spec.fps);
            const double innov = std::sqrt(1.0 - rho * rho);
            Mat z(frames, spec.latent_dims);
            RowVec state = randn(1, spec.latent_dims, rng);
            for (int i = 0; i < frames; ++i) {
                state = rho * state + innov * randn(1, spec.latent_dims, rng);
                z.row(i) = state;
            }
            Mat noise = z * mixing.transpose() + 0.05 * spec.noise_floor * randn(frames, dm, rng);
            noise.col(spec.jaw_dim()).setZero();
            noise.col(layout::euler).setZero();
            m += noise;
        }
        clip.motion = from_matrix(m, spec.keypoints, spec.fps);
        clips.push_back(std::move(clip));
    }
    return clips;
}

std::vector<double> envelope_of(const AudioFeatureSequence& features) {
    const double floor = features.dim() * logmel_floor;
    std::vector<double> env(features.frames());
    double peak = 0;
    for (int i = 0; i < features.frames(); ++i) {
        const double energy = features.features.row(i).array().exp().sum() - floor;
        env[i] = std::sqrt(std::max(energy, 0.0));
        peak = std::max(peak, env[i]);
    }
    // Values within rounding of the floor count as silence.
    if (peak <= 1e-9) return std::vector<double>(env.size(), 0.0);
    for (double& v : env) v /= peak;
    return env;
}

CanonicalKeypoints synthetic_keypoints(int keypoints) {
    if (keypoints < 1) throw Error("synthetic_keypoints: K must be >= 1");
    CanonicalKeypoints xc;
    xc.points = Mat::Zero(keypoints, 3);
    for (int i = 0; i < keypoints; ++i) {
        // last keypoint sits at the bottom of the ring (jaw)
        const double a = -std::numbers::pi / 2 + 2.0 * std::numbers::pi * (i + 1) / keypoints;
        xc.points(i, 0) = 0.5 * std::cos(a);
        xc.points(i, 1) = 0.5 * std::sin(a);
    }
    return xc;
}

void save_envelope(const std::vector<double>& env, const std::filesystem::path& path) {
    ByteWriter w;
    for (double v : env) w.put_f32(static_cast<float>(v));
    write_file(path, w.bytes());
}

std::vector<double> load_envelope(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    ByteReader r(bytes, path.string());
    if (bytes.size() % 4 != 0) r.fail("envelope size is not a multiple of 4");
    std::vector<double> env(bytes.size() / 4);
    for (auto& v : env) v = r.get_f32();
    return env;
}

void save_corpus(const std::vector<SyntheticClip>& clips, const SyntheticSpec& spec,
                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream manifest;
    manifest << "wav\tmseq\tenvelope\tweight\n";
    for (std::size_t i = 0; i < clips.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "clip_%04zu", i);
        const std::string s = stem;
        write_wav(clips[i].audio, dir / (s + ".wav"));
        save_mseq(clips[i].motion, dir / (s + ".mseq"));
        save_envelope(clips[i].envelope, dir / (s + ".env"));
        manifest << s << ".wav\t" << s << ".mseq\t" << s << ".env\t1\n";
    }
    const std::string text = manifest.str();
    write_file(dir / "manifest.tsv", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    save_keypoints(synthetic_keypoints(spec.keypoints), dir / "keypoints.ckpc");
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(path.string() + ": cannot open manifest");
    const auto base = path.parent_path();
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string wav, mseq, env, weight;
        std::getline(ss, wav, '\t');
        std::getline(ss, mseq, '\t');
        std::getline(ss, env, '\t');
        std::getline(ss, weight, '\t');
        if (lineno == 1 && wav == "wav") continue;
        if (wav.empty() || mseq.empty())
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected at least wav and mseq columns");
        ManifestEntry e;
        e.wav = base / wav;
        e.motion = base / mseq;
        if (!env.empty()) e.envelope = base / env;
        if (!weight.empty()) {
            try {
                e.weight = std::stod(weight);
            } catch (const std::exception&) {
                throw Error(path.string() + ":" + std::to_string(lineno) + ": invalid weight '" + weight + "'");
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace motiondiff
