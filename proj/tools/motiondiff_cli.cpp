// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

// motiondiff: audio-driven facial motion generation, end to end.
//
// Every subcommand echoes its resolved configuration (TOML, loadable again
// with --config) and exits nonzero with a single JSON error line on failure.

#include "motiondiff/audio.hpp"
#include "motiondiff/binary_io.hpp"
#include "motiondiff/inference.hpp"
#include "motiondiff/metrics.hpp"
#include "motiondiff/parallel.hpp"
#include "motiondiff/render.hpp"
#include "motiondiff/synthetic.hpp"
#include "motiondiff/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace motiondiff;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    int threads = 0;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Config echo

bool is_number(const std::string& v) {
    if (v.empty()) return false;
    char* end = nullptr;
    std::strtod(v.c_str(), &end);
    return end == v.c_str() + v.size();
}

std::string toml_scalar(const CLI::Option* opt, const std::string& v) {
    if (opt->get_type_name() == "BOOLEAN" || opt->get_type_size() == 0) {
        const bool on = v == "1" || v == "true" || v == "on" || v == "yes";
        return on ? "true" : "false";
    }
    return is_number(v) ? v : nlohmann::json(v).dump();
}

std::string toml_value(const CLI::Option* opt) {
    std::vector<std::string> vals = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    const bool many = opt->get_expected_max() > 1;
    if (vals.empty()) {
        const std::string d = opt->get_default_str();
        if (many && (d.empty() || d == "{}" || d == "[]")) return "";  // unset list: omitted
        if (!d.empty()) vals.push_back(d);
        else if (opt->get_type_size() == 0) vals.push_back("false");
        else return "";
    }
    if (!many) return toml_scalar(opt, vals.back());
    std::string out = "[";
    for (std::size_t i = 0; i < vals.size(); ++i) out += (i ? ", " : "") + toml_scalar(opt, vals[i]);
    return out + "]";
}

void echo_options(std::ostream& os, const CLI::App& app) {
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config" || !opt->get_configurable()) continue;
        const std::string v = toml_value(opt);
        if (!v.empty()) os << name << " = " << v << '\n';
    }
}

void echo_config(const CLI::App& app, const CLI::App& sub) {
    std::ostringstream os;
    os << "# motiondiff " << sub.get_name() << ": resolved configuration (reload with --config)\n";
    echo_options(os, app);
    os << '[' << sub.get_name() << "]\n";
    echo_options(os, sub);
    std::cerr << os.str() << std::flush;
}

// ---------------------------------------------------------------------------
// Helpers

std::string read_magic(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(path.string() + ": cannot open");
    char m[4] = {};
    in.read(m, 4);
    if (in.gcount() != 4) throw FormatError(path.string(), 0, "file shorter than a 4-byte magic");
    return std::string(m, 4);
}

/// WAV is converted to log-mel features; AFS is loaded as is.
AudioFeatureSequence load_audio_features(const fs::path& path, const MelConfig& base) {
    const std::string magic = read_magic(path);
    if (magic == "AFSQ") return load_features(path);
    if (magic == "RIFF") {
        const PcmAudio pcm = read_wav(path);
        MelConfig mc = base;
        mc.sample_rate = pcm.sample_rate;
        return extract_logmel(pcm, mc);
    }
    throw FormatError(path.string(), 0, "expected a WAV or AFS file (magic '" + magic + "')");
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void add_mel_options(CLI::App* sub, MelConfig& mc) {
    sub->add_option("--n-mels", mc.n_mels, "Mel bands");
    sub->add_option("--fps", mc.fps, "Feature frame rate (must divide the sample rate)");
    sub->add_option("--win-ms", mc.win_ms, "Analysis window length in milliseconds");
    sub->add_option("--fmin", mc.fmin, "Lowest filter edge in Hz");
    sub->add_option("--fmax", mc.fmax, "Highest filter edge in Hz");
}

// ---------------------------------------------------------------------------
// inspect

void inspect_file(const fs::path& path) {
    const std::string magic = read_magic(path);
    std::cout << "file=" << path.string() << '\n';
    if (magic == "MSEQ") {
        const auto seq = load_mseq(path);
        std::cout << "format=MSEQ\nversion=" << mseq_version << "\nframe_count=" << seq.frames.size()
                  << "\nK=" << seq.keypoints << "\nfps=" << seq.fps << "\nmotion_dim=" << motion_dim(seq.keypoints)
                  << '\n';
    } else if (magic == "AFSQ") {
        const auto f = load_features(path);
        std::cout << "format=AFS\nversion=" << afs_version << "\nframe_count=" << f.frames()
                  << "\nfeature_dim=" << f.features.cols() << "\nfps=" << f.fps << '\n';
    } else if (magic == "CKPC") {
        const auto xc = load_keypoints(path);
        std::cout << "format=CKPC\nK=" << xc.points.rows() << '\n';
    } else if (magic == "JVMD") {
        const auto m = load_model(path);
        const auto& c = m.config;
        std::cout << "format=checkpoint\nlayers=" << c.layers << "\nheads=" << c.heads << "\ndim=" << c.dim
                  << "\nff_dim=" << c.ff_dim << "\nprev_window=" << c.prev_window << "\ncur_window=" << c.cur_window
                  << "\nK=" << c.keypoints << "\nmotion_dim=" << c.motion_dim() << "\naudio_dim=" << c.audio_dim
                  << "\ndiffusion_steps=" << c.diffusion_steps << "\nschedule=" << to_string(c.schedule)
                  << "\ndropout=" << c.dropout << "\nparameters=" << m.params.size() << '\n';
    } else if (magic == "JVTS") {
        const auto bytes = read_file(path);
        ByteReader r(bytes, path.string());
        r.expect_magic("JVTS");
        const std::uint32_t version = r.get_u32();
        const std::uint64_t step = r.get_u64();
        const std::uint64_t seed = r.get_u64();
        const std::uint32_t n = r.get_u32();
        std::cout << "format=train_state\nversion=" << version << "\nstep=" << step << "\nseed=" << seed
                  << "\nparameters=" << n << '\n';
    } else if (magic == "RIFF") {
        const auto pcm = read_wav(path);
        std::cout << "format=WAV\nsample_rate=" << pcm.sample_rate << "\nsamples=" << pcm.samples.size()
                  << "\nduration_s=" << pcm.duration() << '\n';
    } else {
        throw FormatError(path.string(), 0, "unrecognized magic '" + magic + "'");
    }
}

// ---------------------------------------------------------------------------
// train

std::vector<TrainingClip> load_training_clips(const fs::path& manifest, const MelConfig& mc) {
    std::vector<TrainingClip> clips;
    for (const auto& e : load_manifest(manifest)) {
        TrainingClip c;
        c.motion = load_mseq(e.motion);
        c.audio = load_audio_features(e.wav, mc);
        c.weight = e.weight;
        c.name = e.wav.stem().string();
        clips.push_back(std::move(c));
    }
    if (clips.empty()) throw Error(manifest.string() + ": manifest lists no clips");
    return clips;
}

struct TrainArgs {
    fs::path manifest, out, log;
    bool resume = false;
    int progress_every = 100;
    MelConfig mel;
    TrainConfig tc;
    DenoiserConfig dc;
    std::string schedule = "cosine";
};

void run_train(const TrainArgs& a, const Globals& g) {
    TrainConfig tc = a.tc;
    tc.seed = g.seed;
    tc.log_path = a.log;
    tc.checkpoint_path = a.out;
    DenoiserConfig dc = a.dc;
    dc.schedule = parse_schedule_kind(a.schedule);

    const auto clips = load_training_clips(a.manifest, a.mel);
    ensure_parent(a.out);
    TrainState state;
    PreparedCorpus corpus;
    if (a.resume) {
        state = load_train_state(a.out);
        corpus = prepare_corpus(clips, tc.min_len, state.model.motion_stats, state.model.audio_stats);
        std::cerr << "resuming " << a.out.string() << " at step " << state.step << '\n';
    } else {
        dc.keypoints = clips.front().motion.keypoints;
        dc.audio_dim = static_cast<int>(clips.front().audio.features.cols());
        dc.validate();
        corpus = prepare_corpus(clips, tc.min_len);
        state = init_train_state(dc, corpus, tc.seed);
    }
    const auto t0 = std::chrono::steady_clock::now();
    run_training(state, corpus, tc, [&](const TrainState& s, const LossBreakdown& l) {
        if (a.progress_every > 0 && (s.step % a.progress_every == 0 || s.step == static_cast<std::uint64_t>(tc.steps))) {
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cerr << "step " << s.step << '/' << tc.steps << " loss " << l.total << " simple " << l.simple
                      << " vel " << l.vel << " smooth " << l.smooth << " exp " << l.exp << " (" << std::fixed
                      << std::setprecision(1) << wall << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
        }
    });
    save_model(state.model, a.out);
    save_train_state(state, a.out);
    std::cout << "wrote " << a.out.string() << " (step " << state.step << ")\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::vector<fs::path> generated, real, audio, envelopes;
    fs::path csv, model;
    int window = 0;
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

/// junction p95, within p95, ratio; blank when the sequence has no window boundary.
std::vector<std::string> stitch_cells(const StitchReport& r) {
    if (r.junction_velocity.empty()) return {"", "", ""};
    return {fmt(r.junction_p95), fmt(r.within_p95), r.within_p95 > 0 ? fmt(r.junction_p95 / r.within_p95) : ""};
}

void run_eval(const EvalArgs& a) {
    if (!a.audio.empty() && a.audio.size() != a.generated.size())
        throw UsageError("--audio must list one file per --generated sequence");
    if (!a.envelopes.empty() && a.envelopes.size() != a.generated.size())
        throw UsageError("--envelope must list one file per --generated sequence");

    std::optional<DenoiserModel> model;
    if (!a.model.empty()) model = load_model(a.model);
    const int window = a.window > 0 ? a.window : (model ? model->config.cur_window : 0);
    const MotionStats* stats = model ? &model->motion_stats : nullptr;

    std::vector<MotionSequence> gen, real;
    for (const auto& p : a.generated) gen.push_back(load_mseq(p));
    for (const auto& p : a.real) real.push_back(load_mseq(p));

    const std::vector<std::string> header{"sequence",    "frames",       "smoothness",  "audio_corr",
                                          "envelope_r",  "junction_p95", "within_p95",  "stitch_ratio"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < gen.size(); ++i) {
        std::vector<std::string> row{a.generated[i].filename().string(), std::to_string(gen[i].frames.size()),
                                     fmt(smoothness(gen[i]))};
        row.push_back(a.audio.empty() ? "" : fmt(audio_motion_corr(gen[i], load_audio_features(a.audio[i], {}))));
        if (a.envelopes.empty()) {
            row.emplace_back();
        } else {
            const auto env = load_envelope(a.envelopes[i]);
            std::vector<double> jaw;
            const int ch = delta_y_channel(gen[i].keypoints - 1);
            for (const auto& f : gen[i].frames) jaw.push_back(flatten(f)(ch));
            row.push_back(fmt(pearson(jaw, env)));
        }
        if (window > 0) {
            const auto cells = stitch_cells(stitch_report(gen[i], window, stats));
            row.insert(row.end(), cells.begin(), cells.end());
        } else {
            row.insert(row.end(), {"", "", ""});
        }
        rows.push_back(std::move(row));
    }
    if (window > 0 && gen.size() > 1) {
        std::vector<std::string> row{"pooled", "", "", "", ""};
        const auto cells = stitch_cells(stitch_report(gen, window, stats));
        row.insert(row.end(), cells.begin(), cells.end());
        rows.push_back(std::move(row));
    }
    std::vector<std::pair<std::string, double>> summary;
    if (!real.empty()) summary.emplace_back("motion_frechet", motion_frechet(real, gen));

    if (!a.csv.empty()) {
        ensure_parent(a.csv);
        std::ofstream out(a.csv);
        if (!out) throw Error(a.csv.string() + ": cannot open for writing");
        out << "sequence,metric,value\n";
        for (const auto& row : rows)
            for (std::size_t c = 1; c < row.size(); ++c)
                if (!row[c].empty()) out << row[0] << ',' << header[c] << ',' << row[c] << '\n';
        for (const auto& [k, v] : summary) out << "all," << k << ',' << fmt(v) << '\n';
        if (!out) throw Error(a.csv.string() + ": write failed");
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    auto print_row = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c)
            std::cout << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << (row[c].empty() ? "-" : row[c]);
        std::cout << '\n';
    };
    print_row(header);
    for (const auto& row : rows) print_row(row);
    for (const auto& [k, v] : summary) std::cout << k << " = " << fmt(v) << '\n';
}

// ---------------------------------------------------------------------------

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << nlohmann::json{{"status", "error"}, {"kind", kind}, {"message", message}}.dump() << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audio-conditioned diffusion over facial motion parameters"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML config file; command-line flags take precedence");
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random draw of this run");
    app.add_option("--threads", g.threads, "Cap on worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);

    // extract-features
    auto* ex = app.add_subcommand("extract-features", "WAV -> AFS log-mel features");
    fs::path ex_in, ex_out;
    MelConfig ex_mel;
    ex->add_option("--audio", ex_in, "Input WAV")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", ex_out, "Output AFS file")->required();
    add_mel_options(ex, ex_mel);

    // synth-data
    auto* sy = app.add_subcommand("synth-data", "Write a synthetic paired audio/motion corpus");
    SyntheticSpec spec;
    fs::path sy_out;
    double duration = spec.max_duration;
    int jaw_keypoint = -1;
    sy->add_option("--out", sy_out, "Output directory")->required();
    sy->add_option("--sequences", spec.n_sequences, "Number of clips");
    sy->add_option("--duration", duration, "Clip length in seconds");
    sy->add_option("--keypoints", spec.keypoints, "Keypoint count K");
    sy->add_option("--jaw-keypoint", jaw_keypoint, "Keypoint driven by the envelope (-1 = last)");
    sy->add_option("--noise-floor", spec.noise_floor, "Scale of the nuisance motion");
    sy->add_option("--pause-p", spec.pause_p, "Probability that an envelope knot is a pause");

    // train
    auto* tr = app.add_subcommand("train", "Train the denoiser on a manifest of WAV/MSEQ pairs");
    TrainArgs ta;
    tr->add_option("--manifest", ta.manifest, "manifest.tsv (wav, mseq, envelope[, weight])")
        ->required()
        ->check(CLI::ExistingFile);
    tr->add_option("--out", ta.out, "Output checkpoint (optimizer state goes to <out>.state)")->required();
    tr->add_option("--log", ta.log, "Append-only CSV training log");
    tr->add_flag("--resume", ta.resume, "Continue from <out> and <out>.state");
    tr->add_option("--progress-every", ta.progress_every, "Progress line interval in steps (0 = silent)");
    tr->add_option("--steps", ta.tc.steps, "Total optimizer steps");
    tr->add_option("--batch", ta.tc.batch_size, "Windows per step");
    tr->add_option("--lr", ta.tc.lr, "Adam learning rate");
    tr->add_option("--lambda-vel", ta.tc.weights.vel, "Velocity loss weight");
    tr->add_option("--lambda-smooth", ta.tc.weights.smooth, "Smoothness loss weight");
    tr->add_option("--lambda-exp", ta.tc.weights.exp, "Expression loss weight");
    tr->add_option("--cond-drop", ta.tc.cond_drop_p, "Condition dropout probability");
    tr->add_option("--truncation", ta.tc.truncation, "Random window truncation");
    tr->add_option("--min-len", ta.tc.min_len, "Shortest truncated window");
    tr->add_option("--initial-window-p", ta.tc.initial_window_p, "Probability of drawing a clip-start window");
    tr->add_option("--grad-clip", ta.tc.grad_clip, "Global gradient-norm clip");
    tr->add_option("--checkpoint-every", ta.tc.checkpoint_every, "Periodic checkpoint interval (0 = off)");
    tr->add_option("--log-every", ta.tc.log_every, "CSV log interval in steps");
    tr->add_option("--layers", ta.dc.layers, "Transformer layers");
    tr->add_option("--heads", ta.dc.heads, "Attention heads");
    tr->add_option("--dim", ta.dc.dim, "Model width");
    tr->add_option("--ff-dim", ta.dc.ff_dim, "Feed-forward width");
    tr->add_option("--prev-window", ta.dc.prev_window, "Context window W_pre");
    tr->add_option("--cur-window", ta.dc.cur_window, "Generated window W_cur");
    tr->add_option("--dropout", ta.dc.dropout, "Residual dropout");
    tr->add_option("--diffusion-steps", ta.dc.diffusion_steps, "Diffusion steps T");
    tr->add_option("--schedule", ta.schedule, "Noise schedule")->check(CLI::IsMember({"cosine", "linear"}));
    add_mel_options(tr, ta.mel);

    // generate
    auto* ge = app.add_subcommand("generate", "Generate motion for an audio track");
    fs::path ge_model, ge_audio, ge_out;
    GenerateConfig gc;
    std::string sampler = to_string(gc.sampler);
    MelConfig ge_mel;
    ge->add_option("--model", ge_model, "Checkpoint")->required()->check(CLI::ExistingFile);
    ge->add_option("--audio", ge_audio, "WAV or AFS input")->required()->check(CLI::ExistingFile);
    ge->add_option("--out", ge_out, "Output MSEQ")->required();
    ge->add_option("--cfg-scale", gc.cfg_scale, "Classifier-free guidance scale");
    ge->add_option("--sampler", sampler, "full (ancestral, T steps) or strided (deterministic)")
        ->check(CLI::IsMember({"full", "strided"}));
    ge->add_option("--steps", gc.sample_steps, "Strided sampler step count");
    add_mel_options(ge, ge_mel);

    // eval
    auto* ev = app.add_subcommand("eval", "Metrics over generated sequences");
    EvalArgs ea;
    ev->add_option("--generated", ea.generated, "Generated MSEQ files")->required()->check(CLI::ExistingFile);
    ev->add_option("--real", ea.real, "Reference MSEQ files for the Frechet distance")->check(CLI::ExistingFile);
    ev->add_option("--audio", ea.audio, "WAV/AFS per generated file (audio-motion correlation)")
        ->check(CLI::ExistingFile);
    ev->add_option("--envelope", ea.envelopes, "Ground-truth envelope per generated file")->check(CLI::ExistingFile);
    ev->add_option("--model", ea.model, "Checkpoint: standardizes stitch velocities, supplies W_cur")
        ->check(CLI::ExistingFile);
    ev->add_option("--window", ea.window, "W_cur for the stitch report (overrides --model)");
    ev->add_option("--csv", ea.csv, "Metrics CSV output");

    // render
    auto* re = app.add_subcommand("render", "Rasterize a motion sequence to PPM frames");
    fs::path re_kp, re_motion, re_out;
    int re_size = 256;
    re->add_option("--keypoints", re_kp, "CKPC canonical keypoints")->required()->check(CLI::ExistingFile);
    re->add_option("--motion", re_motion, "MSEQ motion")->required()->check(CLI::ExistingFile);
    re->add_option("--out", re_out, "Output directory")->required();
    re->add_option("--size", re_size, "Square image size in pixels")->check(CLI::PositiveNumber);

    // inspect
    auto* in = app.add_subcommand("inspect", "Print header metadata of MSEQ/AFS/CKPC/checkpoint/WAV files");
    std::vector<fs::path> in_files;
    in->add_option("files", in_files, "Files to inspect")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        set_max_threads(g.threads);
        const CLI::App* sub = app.get_subcommands().front();
        if (sub != in) echo_config(app, *sub);

        if (sub == ex) {
            const auto feats = load_audio_features(ex_in, ex_mel);
            ensure_parent(ex_out);
            save_features(feats, ex_out);
            std::cout << "wrote " << ex_out.string() << " (" << feats.frames() << " frames)\n";
        } else if (sub == sy) {
            spec.min_duration = spec.max_duration = duration;
            spec.jaw_keypoint = jaw_keypoint < 0 ? spec.keypoints - 1 : jaw_keypoint;
            spec.validate();
            save_corpus(make_corpus(spec, g.seed), spec, sy_out);
            std::cout << "wrote " << spec.n_sequences << " clips to " << sy_out.string() << '\n';
        } else if (sub == tr) {
            run_train(ta, g);
        } else if (sub == ge) {
            gc.seed = g.seed;
            gc.sampler = parse_sampler_kind(sampler);
            const auto model = load_model(ge_model);
            const auto feats = load_audio_features(ge_audio, ge_mel);
            const auto seq = generate(model, feats, gc);
            ensure_parent(ge_out);
            save_mseq(seq, ge_out);
            std::cout << "wrote " << ge_out.string() << " (" << seq.frames.size() << " frames)\n";
        } else if (sub == ev) {
            run_eval(ea);
        } else if (sub == re) {
            const int n = render_sequence(load_keypoints(re_kp), load_mseq(re_motion), re_out, re_size);
            std::cout << "wrote " << n << " frames to " << re_out.string() << '\n';
        } else if (sub == in) {
            for (std::size_t i = 0; i < in_files.size(); ++i) {
                if (i) std::cout << '\n';
                inspect_file(in_files[i]);
            }
        }
    } catch (const UsageError& e) {
        return fail("usage", e.what(), 2);
    } catch (const UnsupportedVersionError& e) {
        return fail("version", e.what(), 1);
    } catch (const FormatError& e) {
        return fail("format", e.what(), 1);
    } catch (const ShapeError& e) {
        return fail("shape", e.what(), 1);
    } catch (const TrainingError& e) {
        return fail("training", e.what(), 1);
    } catch (const fs::filesystem_error& e) {
        return fail("io", e.what(), 1);
    } catch (const Error& e) {
        return fail("error", e.what(), 1);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
