#pragma once

#include <cstddef>
#include <functional>

namespace tge {

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Work is split into
// static contiguous blocks so each index is always processed by a pure call;
// results written into per-index slots are identical for any job count.
// jobs <= 1 runs inline; jobs == 0 uses the hardware concurrency.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

int resolve_jobs(int jobs);

}  // namespace tge
