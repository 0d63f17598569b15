// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace nestedsurf {

// Worker count used by every data-parallel loop in the library. Zero means
// "all hardware threads". Results never depend on this value.
void set_thread_count(int n);
int thread_count();

// Runs body(begin, end) over contiguous, disjoint chunks of [0, n). Chunks are
// a pure function of n and the worker count; bodies must write only to
// locations owned by their chunk.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace nestedsurf
