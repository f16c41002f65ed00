#pragma once

#include <cstddef>
#include <functional>

namespace spdesync {

/// Worker count: `requested` if positive, else SPDE_SYNC_THREADS if set and
/// positive, else the hardware concurrency (at least 1).
int resolve_threads(int requested);

/// Calls task(i) for i in [0, count) on up to `threads` workers. Tasks must
/// write only to their own slot; the first exception by index is rethrown
/// after every worker has stopped.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

}  // namespace spdesync
