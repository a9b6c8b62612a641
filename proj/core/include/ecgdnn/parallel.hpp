#pragma once

#include <cstddef>
#include <functional>

namespace ecgdnn {

/// Sets the worker-thread count for parallel_for. 1 (the default) runs
/// everything inline. Thread-safe to call between operations, not during.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, n), split into contiguous chunks across the
/// worker pool. Every index is written by exactly one invocation, and each
/// invocation runs its indices in increasing order, so results are
/// bit-identical for any thread count as long as callers give each index
/// sole ownership of its outputs (all call sites in this library do).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Chunked variant: fn(begin, end) over disjoint ranges. Lower overhead for
/// tight loops; same single-writer determinism contract.
void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace ecgdnn
