#pragma once

#include <cstddef>
#include <functional>

namespace otfwi {

/// Global cap on worker threads (the CLI's --jobs). 0 means hardware concurrency.
void set_max_jobs(int jobs);
int max_jobs();

/// Runs fn(i) for i in [0, n). Exceptions from workers are rethrown on the
/// caller (the one with the lowest index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace otfwi
