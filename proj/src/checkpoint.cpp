// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/binary_io.hpp"
#include "motiondiff/denoiser.hpp"

#include <zlib.h>

namespace motiondiff {

// "JVMD" layout (little-endian):
//   magic, u32 version
//   config: u32 layers, heads, dim, ff_dim, W_pre, W_cur, K, D_a, T, schedule; f64 dropout
//   motion stats: u32 D_m, D_m f32 mean, D_m f32 std
//   audio stats:  u32 D_a, D_a f32 mean, D_a f32 std
//   u32 tensor count, then per tensor: u32 name length, name, u32 rows, u32 cols, rows*cols f32
//   u32 CRC-32 of every preceding byte

namespace {

void put_stats(ByteWriter& w, const FeatureStats& s) {
    w.put_u32(static_cast<std::uint32_t>(s.dim()));
    for (double v : s.mean) w.put_f32(static_cast<float>(v));
    for (double v : s.std) w.put_f32(static_cast<float>(v));
}

FeatureStats get_stats(ByteReader& r, int expected_dim, const char* what) {
    const std::uint32_t d = r.get_u32();
    if (static_cast<int>(d) != expected_dim)
        r.fail(std::string(what) + " stats dimension " + std::to_string(d) + " does not match config");
    FeatureStats s;
    s.mean.resize(d);
    s.std.resize(d);
    for (std::uint32_t i = 0; i < d; ++i) s.mean[i] = r.get_f32();
    for (std::uint32_t i = 0; i < d; ++i) {
        s.std[i] = r.get_f32();
        if (!(s.std[i] > 0)) r.fail(std::string(what) + " stats contain non-positive std");
    }
    return s;
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const DenoiserModel& model) {
    const auto& c = model.config;
    ByteWriter w;
    w.put_bytes("JVMD");
    w.put_u32(checkpoint_version);
    for (int v : {c.layers, c.heads, c.dim, c.ff_dim, c.prev_window, c.cur_window, c.keypoints, c.audio_dim,
                  c.diffusion_steps})
        w.put_u32(static_cast<std::uint32_t>(v));
    w.put_u32(c.schedule == ScheduleKind::cosine ? 0u : 1u);
    w.put_f64(c.dropout);
    put_stats(w, model.motion_stats);
    put_stats(w, model.audio_stats);
    const auto& entries = model.params.entries();
    w.put_u32(static_cast<std::uint32_t>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        w.put_string(e.name);
        w.put_u32(static_cast<std::uint32_t>(e.rows));
        w.put_u32(static_cast<std::uint32_t>(e.cols));
        for (std::size_t j = 0; j < e.size(); ++j) w.put_f32(static_cast<float>(model.params.values()[e.offset + j]));
    }
    std::vector<std::uint8_t> bytes = w.bytes();
    const std::uint32_t crc = crc_of(bytes);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return bytes;
}

DenoiserModel decode_model(std::span<const std::uint8_t> bytes, const std::string& source) {
    ByteReader r(bytes, source);
    r.expect_magic("JVMD");
    const std::uint32_t version = r.get_u32();
    if (version != checkpoint_version)
        throw UnsupportedVersionError(source, 4, "unsupported checkpoint version " + std::to_string(version));
    if (bytes.size() < 12) r.fail("file too short");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), source);
    if (tail.get_u32() != crc_of(body)) throw FormatError(source, bytes.size() - 4, "checksum mismatch (corrupted file)");

    DenoiserConfig c;
    int* fields[] = {&c.layers, &c.heads, &c.dim, &c.ff_dim, &c.prev_window, &c.cur_window, &c.keypoints,
                     &c.audio_dim, &c.diffusion_steps};
    for (int* f : fields) {
        const std::uint32_t v = r.get_u32();
        if (v > (1u << 24)) r.fail("implausible config value " + std::to_string(v));
        *f = static_cast<int>(v);
    }
    const std::uint32_t sched = r.get_u32();
    if (sched > 1) r.fail("unknown schedule id " + std::to_string(sched));
    c.schedule = sched == 0 ? ScheduleKind::cosine : ScheduleKind::linear;
    c.dropout = r.get_f64();
    try {
        c.validate();
    } catch (const Error& e) {
        r.fail(std::string("invalid config: ") + e.what());
    }

    DenoiserModel m = DenoiserModel::create(c);
    m.motion_stats = get_stats(r, c.motion_dim(), "motion");
    m.audio_stats = get_stats(r, c.audio_dim, "audio");
    const std::uint32_t count = r.get_u32();
    if (count != m.params.entries().size())
        r.fail("tensor count " + std::to_string(count) + " does not match config (" +
               std::to_string(m.params.entries().size()) + ")");
    for (const auto& e : m.params.entries()) {
        const std::string name = r.get_string();
        if (name != e.name) r.fail("unexpected tensor '" + name + "', expected '" + e.name + "'");
        const std::uint32_t rows = r.get_u32(), cols = r.get_u32();
        if (static_cast<int>(rows) != e.rows || static_cast<int>(cols) != e.cols)
            r.fail("tensor '" + name + "' has wrong shape");
        for (std::size_t j = 0; j < e.size(); ++j) m.params.values()[e.offset + j] = r.get_f32();
    }
    if (r.remaining() != 4) r.fail("trailing bytes after tensor table");
    if (!m.params.all_finite()) r.fail("non-finite parameter values");
    return m;
}

void save_model(const DenoiserModel& model, const std::filesystem::path& path) {
    write_file(path, encode_model(model));
}

DenoiserModel load_model(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_model(bytes, path.string());
}

}  // namespace motiondiff
