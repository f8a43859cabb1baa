#pragma once

#include <cstddef>
#include <functional>

namespace geoup {

/// Caps the worker count used by parallel_for. 0 means hardware concurrency.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs body(i) for i in [0, n) over contiguous static chunks. Callers write
/// results into per-index slots, so output never depends on the schedule.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace geoup
