#pragma once

#include <functional>

namespace catgeo {

// Global worker count used by chunked loops. The chunk decomposition is fixed
// by the caller, and every chunk writes to its own slot, so results do not
// depend on this value.
int num_threads();
void set_num_threads(int n);

// Runs fn(i) for i in [0, n); work is distributed over num_threads() workers.
void for_each_chunk(int n, const std::function<void(int)>& fn);

}  // namespace catgeo
