// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace motiondiff {

/// Caps worker threads for internal parallel loops (0 = hardware concurrency).
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n) on up to max_threads() threads. Each index is
/// processed exactly once; the first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace motiondiff
