#pragma once

#include <mutex>

namespace specsense::detail {

// FFTW plan creation/destruction is not thread-safe; every planner call in
// the library takes this lock. Plan execution needs no lock.
std::mutex& fftw_planner_mutex();

} // namespace specsense::detail
