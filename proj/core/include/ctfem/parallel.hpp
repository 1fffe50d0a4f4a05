#pragma once

#include <cstddef>
#include <functional>

namespace ctfem {

/// Runs body(i) for i in [0, count) on up to `workers` threads using a
/// static contiguous partition. Each index is visited exactly once, so
/// results written to per-index slots do not depend on the worker count.
/// If any body throws, the exception from the lowest failing chunk is
/// rethrown after all workers join.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace ctfem
