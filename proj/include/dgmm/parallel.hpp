#pragma once

// Minimal static-partition parallel loop over a row range.

#include <dgmm/common.hpp>

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace dgmm {

/// Number of workers actually used for `n` items: at most `threads`, at
/// least 1, and never more than one per `min_chunk` items.
inline int effective_workers(Index n, int threads, Index min_chunk = 2048) {
  const Index by_size = std::max<Index>(1, n / std::max<Index>(1, min_chunk));
  return static_cast<int>(std::max<Index>(1, std::min<Index>(std::max(threads, 1), by_size)));
}

/// Calls fn(worker, begin, end) on `workers` contiguous slices of [0, n).
/// Worker 0 runs on the calling thread. Exceptions are rethrown in the caller.
template <class Fn>
void parallel_slices(Index n, int workers, Fn&& fn) {
  if (workers <= 1) {
    fn(0, Index{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto bound = [&](int w) { return n * w / workers; };
  for (int w = 1; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        fn(w, bound(w), bound(w + 1));
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  try {
    fn(0, Index{0}, bound(1));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dgmm
