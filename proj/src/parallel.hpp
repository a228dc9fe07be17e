#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace gradsim::detail {

// Striped parallel loop over worker indices. Index i is always handled by
// thread i % threads and writes only its own slot, so results are identical
// for every thread count.
inline void for_each_worker(std::uint32_t n, std::uint32_t threads,
                            const std::function<void(std::uint32_t)>& fn) {
  const std::uint32_t use = std::min(std::max(threads, 1u), n);
  if (use <= 1) {
    for (std::uint32_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(use);
  pool.reserve(use);
  for (std::uint32_t t = 0; t < use; ++t) {
    pool.emplace_back([&errs, &fn, n, use, t]() {
      try {
        for (std::uint32_t i = t; i < n; i += use) fn(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gradsim::detail
