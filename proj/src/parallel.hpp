#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace adbn::detail {

// Runs body(i) for i in [0, n) on up to worker_count() threads. Callers must
// only write to per-index slots; reductions happen afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace adbn::detail
