#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace brw {

/// Worker count used by `parallel_blocks` when none is given; 0 means hardware parallelism.
void set_default_threads(unsigned threads);
unsigned default_threads();

/// Splits [0, count) into fixed blocks of `block` items, evaluates
/// `work(begin, end)` for each block on up to `threads` workers, and folds the
/// block results left to right with `merge`. Block boundaries and merge order
/// do not depend on the thread count, so the result is bit-identical for any
/// number of workers.
template <class T, class Work, class Merge>
T parallel_blocks(std::size_t count, std::size_t block, T init, Work work, Merge merge,
                  unsigned threads = 0) {
  if (block == 0) block = 1;
  const std::size_t nblocks = (count + block - 1) / block;
  std::vector<T> parts(nblocks, init);
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(nblocks, 1)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= nblocks) return;
      try {
        const std::size_t lo = b * block;
        parts[b] = work(lo, std::min(count, lo + block));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(nblocks);
      }
    }
  };
  if (threads <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  T acc = std::move(init);
  for (auto& p : parts) merge(acc, p);
  return acc;
}

}  // namespace brw
