#pragma once

#include <cstddef>
#include <functional>

namespace schauder {

/// Worker count used by the parallel loops. Defaults to the SCHAUDER_LAB_THREADS
/// environment variable when set, else the hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Splits [0, n) into contiguous chunks, one per worker, and runs
/// body(begin, end, worker) on each. Chunking depends only on n and the worker
/// count, so reductions merged by worker index are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t, int)>& body);

/// Runs task(i) for i in [0, n) with dynamic scheduling. Results must be written
/// to per-index slots by the caller.
void parallel_tasks(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace schauder
