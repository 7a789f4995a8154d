#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace rmpc {

/// Runs fn(i) for i in [0, count). Items are independent; results must be
/// written by index so the merge is deterministic regardless of schedule.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                         int workers = 0) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t nw = std::min<std::size_t>(workers, count);
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += nw) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rmpc
