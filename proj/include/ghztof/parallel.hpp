// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace ghztof {

/// Default worker count, from GHZTOF_THREADS (falls back to 1).
inline int default_thread_count() {
  if (const char *env = std::getenv("GHZTOF_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return 1;
}

/// Runs fn(row) for every row in [0, rows). Rows are statically partitioned
/// into contiguous blocks; callers must make each row's work independent of
/// the partition (e.g. per-row RNG streams) so results do not depend on threads.
template <typename Fn>
void parallel_rows(int rows, int threads, Fn &&fn) {
  threads = std::clamp(threads, 1, std::max(rows, 1));
  if (threads == 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  const int block = (rows + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const int lo = t * block, hi = std::min(rows, lo + block);
        for (int r = lo; r < hi; ++r) fn(r);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto &th : pool) th.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace ghztof
