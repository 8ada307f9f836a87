#pragma once

#include <cstddef>
#include <functional>

namespace geomopt {

/// Number of worker threads used by the internal kernels.
///
/// Defaults to the hardware concurrency; the GEOMOPT_THREADS environment
/// variable overrides it, and set_num_threads() overrides both.
int num_threads();

/// Sets the thread count for subsequent kernel calls. Values < 1 restore the
/// environment/hardware default.
void set_num_threads(int n);

/// Splits [0, n) into contiguous chunks and runs body(begin, end) on each.
/// Chunks never share an index, so kernels writing disjoint slices stay
/// deterministic regardless of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace geomopt
