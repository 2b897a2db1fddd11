// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/params.hpp"

#include <cmath>

namespace motiondiff {

std::size_t ParamSet::add(std::string name, int rows, int cols) {
    if (rows < 1 || cols < 1) throw ShapeError("parameter '" + name + "' must have positive shape");
    if (find(name)) throw Error("duplicate parameter name '" + name + "'");
    ParamEntry e{std::move(name), rows, cols, values_.size()};
    values_.resize(values_.size() + e.size(), 0.0);
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return i;
    return std::nullopt;
}

Eigen::Map<Mat> ParamSet::view(std::size_t idx, std::vector<double>& buffer) const {
    const auto& e = entries_.at(idx);
    return {buffer.data() + e.offset, e.rows, e.cols};
}

Eigen::Map<const Mat> ParamSet::view(std::size_t idx, const std::vector<double>& buffer) const {
    const auto& e = entries_.at(idx);
    return {buffer.data() + e.offset, e.rows, e.cols};
}

Eigen::Map<RowVec> ParamSet::row_view(std::size_t idx, std::vector<double>& buffer) const {
    const auto& e = entries_.at(idx);
    return {buffer.data() + e.offset, static_cast<Eigen::Index>(e.size())};
}

Eigen::Map<const RowVec> ParamSet::row_view(std::size_t idx, const std::vector<double>& buffer) const {
    const auto& e = entries_.at(idx);
    return {buffer.data() + e.offset, static_cast<Eigen::Index>(e.size())};
}

bool ParamSet::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace motiondiff
