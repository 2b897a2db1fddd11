// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace motiondiff {

struct ParamEntry {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;

    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Named tensors packed into one flat buffer. Gradients and optimizer
/// moments use parallel buffers with the same layout.
class ParamSet {
public:
    std::size_t add(std::string name, int rows, int cols);

    const std::vector<ParamEntry>& entries() const { return entries_; }
    const ParamEntry& entry(std::size_t idx) const { return entries_.at(idx); }
    std::optional<std::size_t> find(const std::string& name) const;

    std::size_t size() const { return values_.size(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    Eigen::Map<Mat> mat(std::size_t idx) { return view(idx, values_); }
    Eigen::Map<const Mat> mat(std::size_t idx) const { return view(idx, values_); }
    Eigen::Map<RowVec> row(std::size_t idx) { return row_view(idx, values_); }
    Eigen::Map<const RowVec> row(std::size_t idx) const { return row_view(idx, values_); }

    Eigen::Map<Mat> view(std::size_t idx, std::vector<double>& buffer) const;
    Eigen::Map<const Mat> view(std::size_t idx, const std::vector<double>& buffer) const;
    Eigen::Map<RowVec> row_view(std::size_t idx, std::vector<double>& buffer) const;
    Eigen::Map<const RowVec> row_view(std::size_t idx, const std::vector<double>& buffer) const;

    bool all_finite() const;

private:
    std::vector<ParamEntry> entries_;
    std::vector<double> values_;
};

}  // namespace motiondiff
