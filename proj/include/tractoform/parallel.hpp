#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace tractoform {

/// Upper bound on worker threads used by the library. Defaults to the
/// TRACTOFORM_THREADS environment variable, else hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Calls body(i) for i in [0, n) over contiguous static chunks. Each index is
/// visited exactly once, so writing to slot i keeps results independent of
/// the thread count. The exception of the lowest failing chunk is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace tractoform
