#pragma once

#include <cstddef>
#include <functional>

namespace memaudit {

/// Runs fn(0..n-1) on up to `workers` threads. Tasks are claimed in
/// ascending order; the first exception thrown by any task is rethrown
/// after all threads join. workers <= 1 runs inline.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Worker count from MEMAUDIT_WORKERS, else hardware concurrency, at least 1.
std::size_t default_workers();

}  // namespace memaudit
