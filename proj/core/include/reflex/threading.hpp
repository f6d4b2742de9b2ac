#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace reflex {

// Runs fn(block_index) for block_index in [0, blocks) on up to `threads`
// workers. Callers own the block decomposition; keeping block boundaries
// fixed (independent of the thread count) is what makes reductions bitwise
// reproducible under any parallelism.
inline void parallel_blocks(size_t blocks, int threads,
                            const std::function<void(size_t)>& fn) {
  if (threads <= 1 || blocks <= 1) {
    for (size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  const size_t nworkers = std::min<size_t>(threads, blocks);
  std::vector<std::thread> pool;
  pool.reserve(nworkers);
  for (size_t w = 0; w < nworkers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t b = w; b < blocks; b += nworkers) fn(b);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace reflex
