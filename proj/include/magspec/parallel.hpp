#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace magspec {

// Worker budget: MAGSPEC_WORKERS if set and positive, else the hardware
// concurrency (at least 1).
unsigned worker_budget();

// Evaluates fn(i) for i in [0, n) on up to `workers` threads and returns the
// results indexed by i. Exceptions from fn are rethrown on the caller thread
// (the one with the smallest index wins).
std::vector<double> parallel_map(std::size_t n, const std::function<double(std::size_t)> &fn, unsigned workers = 0);

// Runs fn(i) for i in [0, n); same scheduling and error contract as parallel_map.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn, unsigned workers = 0);

// Sum in index order; independent of how the values were produced.
double ordered_sum(const std::vector<double> &v);

} // namespace magspec
