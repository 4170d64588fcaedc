#pragma once

#include <cstddef>
#include <functional>

namespace coordsim {

/// Worker pool size: hardware concurrency, capped by COORDSIM_THREADS.
std::size_t worker_count();

/// Runs body(i) for i in [0, count) on up to worker_count() threads. Work
/// items are claimed dynamically; callers write results into slot i so the
/// outcome does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace coordsim
