#pragma once

#include <cstddef>
#include <functional>

namespace ordflow {

// Number of worker threads used by node/particle-parallel loops.
// Defaults to ORDFLOW_WORKERS from the environment, else hardware concurrency.
std::size_t worker_count();
void set_worker_count(std::size_t n);  // 0 restores the default

// Runs body(i) for i in [0, n). Each index is visited exactly once; bodies must
// only write to index-owned storage so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ordflow
