#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace reposer {

/// Splits [0, n) into `workers` contiguous chunks and runs fn(begin, end) on
/// each, joining before return. Chunk boundaries never affect results as long
/// as fn only touches its own index range.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(workers - 1);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int b = std::min(n, w * chunk), e = std::min(n, (w + 1) * chunk);
    if (b < e) threads.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0, std::min(n, chunk));
}

inline int default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace reposer
