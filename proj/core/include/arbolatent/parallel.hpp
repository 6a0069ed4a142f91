#pragma once

#include <cstddef>
#include <functional>

namespace arbolatent {

// Worker cap: ARBOLATENT_THREADS env var, defaulting to the logical core count.
std::size_t worker_count();

// Runs fn(0..n-1), possibly on several threads. fn must only write state owned
// by its own index; callers reduce per-index results in index order so the
// outcome is identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace arbolatent
