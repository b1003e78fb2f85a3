#pragma once

#include <cstddef>
#include <functional>

namespace ncollage {

/// Number of hardware threads, at least 1.
int hardware_threads();

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
///
/// Callers must only write to slots owned by index i; the result is then
/// independent of the schedule. The first exception thrown by any task is
/// rethrown on the calling thread after all workers have joined.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace ncollage
