#pragma once

#include <cstddef>
#include <functional>

namespace snarf {

/// Worker count: SNARF_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int thread_count();

/// Calls fn(i) for every i in [0, n). Work items are handed out dynamically, so
/// fn must not depend on which thread runs it. Exceptions are rethrown on the
/// calling thread (the first one by item index).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace snarf
