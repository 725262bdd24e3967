#pragma once

#include <cstddef>
#include <functional>

namespace elltest {

// Worker count: ELLTEST_THREADS if set, else the hardware concurrency.
int thread_count();

// Runs fn(i) for i in [0, count). The first exception (lowest index) is
// rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, int threads = 0);

} // namespace elltest
