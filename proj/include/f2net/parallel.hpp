// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#pragma once

#include <functional>

namespace f2net {

/// Caps worker threads used inside primitive kernels (>= 1).
void set_num_threads(int n);
int num_threads();

/// Resolves a thread count from an explicit value, falling back to the
/// F2NET_THREADS environment variable, then 1.
int resolve_thread_count(int requested);

/// Runs fn(begin, end) over contiguous chunks of [0, n). Each index is owned
/// by exactly one chunk, so kernels that write disjoint rows stay
/// bit-identical across thread counts.
void parallel_for(int n, const std::function<void(int, int)>& fn, long work_per_item = 1);

}  // namespace f2net
