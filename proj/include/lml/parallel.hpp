#pragma once

#include <cstddef>
#include <functional>

namespace lml {

// Runs fn(0..n-1) on at most `jobs` threads (0 = hardware concurrency).
// The first exception by index is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace lml
