#pragma once

#include <cstddef>
#include <functional>

namespace ris {

/// Worker count from RIS_SENSE_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Iterations must write disjoint state; the
/// result is independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Keeps large freed blocks in the heap instead of returning them to the OS,
/// so per-batch activations reuse already-faulted pages. No-op off glibc.
void configure_allocator();

}  // namespace ris
