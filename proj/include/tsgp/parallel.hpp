#pragma once

#include <cstddef>
#include <functional>

namespace tsgp {

/// Worker count used when a caller passes threads <= 0.
int default_threads();

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Indices are split
/// into contiguous chunks, so per-index results written to distinct slots are
/// independent of the worker count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace tsgp
