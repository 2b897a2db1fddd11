// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace motiondiff {

/// Little-endian byte sink.
class ByteWriter {
public:
    void put_u8(std::uint8_t v) { buf_.push_back(v); }
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f32(float v);
    void put_f64(double v);
    void put_bytes(std::string_view bytes);
    void put_string(std::string_view s);  // u32 length + bytes

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::size_t size() const { return buf_.size(); }

private:
    std::vector<std::uint8_t> buf_;
};

/// Little-endian byte source. Every read is bounds-checked and reports the
/// failing offset through FormatError.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string source)
        : data_(data), source_(std::move(source)) {}

    std::uint8_t get_u8();
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    float get_f32();
    double get_f64();
    std::string get_bytes(std::size_t n);
    std::string get_string(std::size_t max_len = 4096);

    void expect_magic(std::string_view magic);
    [[noreturn]] void fail(const std::string& what) const;

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }
    const std::string& source() const { return source_; }

private:
    void need(std::size_t n, const char* what);

    std::span<const std::uint8_t> data_;
    std::string source_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace motiondiff
