// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace gwlab {

/// Number of workers to use when the caller passes 0.
std::size_t default_workers();

/// Calls fn(i) for every i in [0, count) using up to `workers` threads
/// (0 = default_workers()). Indices are handed out dynamically, so fn must
/// write its result into a slot owned by i. The first exception thrown by
/// any call is rethrown after all threads have joined; remaining indices
/// are skipped once an exception is seen.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace gwlab
