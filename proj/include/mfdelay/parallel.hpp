#pragma once

#include <cstddef>
#include <functional>

namespace mfdelay {

/// Runs body(i) for i in [0, n) split across up to n_threads workers. Workers
/// only write to index-owned slots; every reduction in this library happens
/// serially afterwards, so results are bit-identical for any thread count.
void parallel_for(std::size_t n, std::size_t n_threads,
                  const std::function<void(std::size_t)>& body);

/// Process-wide worker cap used by the numerical kernels (set from --threads).
void set_worker_count(std::size_t n_threads);
std::size_t worker_count();

} // namespace mfdelay
