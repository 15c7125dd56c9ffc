#pragma once

#include <cstddef>
#include <functional>

namespace qbar {

// Worker count for scans: `requested` when non-zero, else the QBAR_WORKERS
// environment variable, else the hardware concurrency (at least 1).
std::size_t worker_count(std::size_t requested = 0);

// Runs body(i) for i in [0, n) across workers. Callers write results by index,
// so output order never depends on scheduling. If any call throws, the
// exception from the lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace qbar
