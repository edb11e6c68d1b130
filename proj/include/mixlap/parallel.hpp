#pragma once

#include <cstddef>
#include <functional>

namespace mixlap {

/// Number of workers used by parallel_for. Results never depend on it:
/// every index is computed by exactly one worker and reductions are done
/// by the caller in index order.
void set_thread_count(int threads);
int thread_count();

/// Calls body(begin, end) on disjoint contiguous chunks covering [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mixlap
