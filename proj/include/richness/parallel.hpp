#pragma once

#include <cstddef>
#include <functional>

namespace richness {

// Thread count from RICHNESS_THREADS, else hardware concurrency (at least 1).
unsigned default_threads();

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = default).
/// If any call throws, the exception from the smallest failing index is
/// rethrown after all workers finish, independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace richness
