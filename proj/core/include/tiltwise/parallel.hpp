#pragma once

#include <cstddef>
#include <functional>

namespace tiltwise {

//! Worker cap: TILTWISE_THREADS when set to a positive integer, otherwise the
//! hardware concurrency (at least 1).
std::size_t worker_count();

//! Runs body(i) for i in [0, count). Each index runs exactly once; callers write
//! results into slot i so the outcome does not depend on scheduling. Nested
//! calls from inside a worker run serially. If any body throws, the exception
//! from the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t max_workers = 0);

} // namespace tiltwise
