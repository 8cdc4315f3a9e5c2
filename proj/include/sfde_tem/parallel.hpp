#pragma once

#include <cstddef>
#include <functional>

namespace sfde {

/// Worker count from SFDE_TEM_THREADS (0 or unset: hardware concurrency).
std::size_t default_thread_count();

/// Runs body(i) for i in [0, count) on up to `threads` workers (0: default).
/// Work is handed out dynamically; callers must write results by index so the
/// outcome does not depend on scheduling. If bodies throw, the exception of
/// the smallest failing index is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

}  // namespace sfde
