#pragma once

#include <cstddef>
#include <functional>

namespace focuscal {

// Worker count from FOCUSCAL_THREADS (0 or unset = hardware concurrency).
int ConfiguredThreadCount();

// Runs fn(i) for i in [0, n) on up to ConfiguredThreadCount() threads. The
// first exception thrown by any task is rethrown on the caller's thread.
void ParallelFor(size_t n, const std::function<void(size_t)>& fn);

}  // namespace focuscal
