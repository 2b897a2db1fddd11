// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace motiondiff {

// Frames/tokens are rows throughout.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated file. `offset` is the byte position where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& path, std::size_t offset, const std::string& what);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Mixes a base seed with stream tags (splitmix64 finalizer) so that every
/// consumer of randomness gets an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// rows x cols of i.i.d. N(0, 1).
Mat randn(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Rounds to the nearest binary32 value; on-disk tensors are f32.
// The volatile store keeps the narrowing alive: GCC 11's SLP vectorizer at -O3
// folds a plain double->float->double round trip away in unrolled loops.
inline double round_f32(double x) {
    volatile float f = static_cast<float>(x);
    return f;
}

}  // namespace motiondiff
