#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>

namespace roiloc {

/// Worker cap: ROI_LOC_THREADS if set and positive, else the hardware thread count.
int thread_count();

/// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
/// that output does not depend on scheduling. The exception of the lowest
/// failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed and a path of indices.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

}  // namespace roiloc
