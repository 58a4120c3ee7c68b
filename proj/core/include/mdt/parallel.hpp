#pragma once

#include <cstdint>
#include <functional>

namespace mdt {

// Number of worker threads. Controlled by MDT_THREADS; MDT_SINGLE_THREAD=1
// forces 1. Results are bit-identical for any thread count: work is split so
// that each output element is computed by exactly one task in a fixed
// sequential order.
int thread_count();

// Runs fn(begin, end) over disjoint chunks of [0, n). With one thread this is
// a plain call; otherwise chunks are distributed over a persistent pool.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace mdt
