#pragma once

#include <cstdint>
#include <functional>

namespace tempro {

/// Global worker-thread budget. Resolution order: explicit set_thread_count(),
/// then the TEMPRO_THREADS environment variable, then 1.
/// All parallel paths in the toolkit partition work into per-index jobs whose
/// results are reduced in index order, so outputs do not depend on the budget.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for i in [0, n). Indices are split into contiguous chunks, one
/// per worker. With a budget of 1 this degenerates to a plain loop.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace tempro
