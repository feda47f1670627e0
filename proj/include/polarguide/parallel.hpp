#pragma once

#include <functional>

namespace polarguide {

// Process-wide cap on worker threads. 1 disables threading.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [begin, end) split into contiguous static chunks.
// Chunk boundaries only change which thread runs an index, never the
// order of any reduction, so elementwise kernels stay bit-identical.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace polarguide
