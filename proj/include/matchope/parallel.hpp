#pragma once

#include <cstddef>
#include <functional>

namespace matchope {

/// Resolves a requested job count: 0 means "all hardware threads".
unsigned resolve_jobs(unsigned jobs);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must write
/// only to their own output slot; the first exception (lowest index) is
/// rethrown after all threads join.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace matchope
