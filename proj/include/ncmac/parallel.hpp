#pragma once

#include <cstddef>
#include <functional>

namespace ncmac {

// 0 means hardware concurrency
void set_thread_count(int n);
int thread_count();

// Runs f(i) for i in [0, n). Work is split statically; f must only write to
// slots indexed by i so results do not depend on the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace ncmac
