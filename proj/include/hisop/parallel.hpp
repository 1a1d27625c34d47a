#pragma once

#include <cstddef>
#include <functional>

namespace hisop {

/// Worker count used by intra-op loops. Defaults to 1.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Every index is
/// visited by exactly one call, so per-index work stays deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace hisop
