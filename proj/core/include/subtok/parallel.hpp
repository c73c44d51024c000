#pragma once

#include <cstddef>
#include <functional>

namespace subtok {

/// Worker count for internal parallelism: the SUBTOK_THREADS environment
/// variable when it holds a positive integer, else hardware concurrency.
std::size_t worker_count();

/// Runs `task(i)` for every i in [0, n). Tasks must write only to disjoint,
/// index-addressed state; callers reduce results in index order so output
/// never depends on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace subtok
