// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/binary_io.hpp"

#include "motiondiff/common.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace motiondiff {

FormatError::FormatError(const std::string& path, std::size_t offset, const std::string& what)
    : Error(path + ": " + what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    return h;
}

Mat randn(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

void ByteWriter::put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

void ByteWriter::put_string(std::string_view s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
}

void ByteReader::need(std::size_t n, const char* what) {
    if (remaining() < n) fail(std::string("truncated payload reading ") + what);
}

void ByteReader::fail(const std::string& what) const { throw FormatError(source_, pos_, what); }

std::uint8_t ByteReader::get_u8() {
    need(1, "u8");
    return data_[pos_++];
}

std::uint32_t ByteReader::get_u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::get_u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

float ByteReader::get_f32() { return std::bit_cast<float>(get_u32()); }

double ByteReader::get_f64() { return std::bit_cast<double>(get_u64()); }

std::string ByteReader::get_bytes(std::size_t n) {
    need(n, "bytes");
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

std::string ByteReader::get_string(std::size_t max_len) {
    const std::uint32_t n = get_u32();
    if (n > max_len) fail("string length " + std::to_string(n) + " exceeds limit");
    return get_bytes(n);
}

void ByteReader::expect_magic(std::string_view magic) {
    const std::size_t at = pos_;
    if (remaining() < magic.size()) fail("file too short for magic '" + std::string(magic) + "'");
    const std::string got = get_bytes(magic.size());
    if (got != magic) throw FormatError(source_, at, "bad magic, expected '" + std::string(magic) + "'");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(path.string() + ": cannot open for reading");
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> data(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size)))
        throw Error(path.string() + ": read failed");
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(path.string() + ": cannot open for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(path.string() + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(path.string() + ": cannot move temporary file into place");
    }
}

}  // namespace motiondiff
