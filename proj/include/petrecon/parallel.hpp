#pragma once

#include <cstddef>
#include <functional>

namespace petrecon {

/// Upper bound on worker threads used by parallel_for (0 = hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs fn(i) for i in [0, n). Each index must write only its own outputs, so
/// results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace petrecon
