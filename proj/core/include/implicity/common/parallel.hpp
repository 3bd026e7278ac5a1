// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace implicity {

/// Global cap on worker threads (the CLI's --threads). 0 means hardware concurrency.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(begin, end) over disjoint chunks of [0, n). Chunk boundaries depend only
/// on n and grain, so per-index results are independent of the thread count.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace implicity
