#pragma once

#include <cstddef>
#include <functional>

namespace sfpe {

/// Worker count: `requested` if nonzero, else $SFPE_THREADS, else hardware concurrency.
unsigned resolve_threads(unsigned requested = 0);

/// Runs body(i) for i in [0, n) on up to `threads` workers.
///
/// Items are independent; if any throw, the exception from the lowest failing
/// index is rethrown after all workers join, so the reported failure does not
/// depend on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace sfpe
