#pragma once

#include <cstddef>
#include <functional>

namespace tvmix {

// Runs fn(i) for every i in [0, n). Jobs must only write to slots they own
// (indexed by i), so results do not depend on scheduling. Calls made from
// inside a running job execute inline rather than spawning more threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tvmix
