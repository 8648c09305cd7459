#pragma once

#include <cstddef>
#include <functional>

namespace mzkernel {

/// Upper bound on worker threads used by the library. 0 means "hardware".
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks; the
/// caller must make each body(i) write only its own outputs so that results do
/// not depend on the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mzkernel
