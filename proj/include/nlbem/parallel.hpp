#pragma once

#include <functional>

namespace nlbem {

// Upper bound on worker threads used by parallel loops (0 = hardware concurrency).
void set_thread_limit(int k);
int thread_limit();

// Runs fn(i) for i in [0, n). Each index is evaluated independently, so results do
// not depend on the thread count. The first exception thrown is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace nlbem
