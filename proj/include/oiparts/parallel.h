#pragma once

#include <cstddef>
#include <functional>

namespace oiparts {

// Runs fn(i) for every i in [0, n) on up to `threads` workers using static
// contiguous chunks. Callers must make each index independent of the others;
// then results do not depend on the thread count. The first exception thrown
// by any worker is rethrown on the calling thread.
void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t)>& fn);

// Thread count from OIPARTS_THREADS, else hardware concurrency (at least 1).
int DefaultThreadCount();

}  // namespace oiparts
