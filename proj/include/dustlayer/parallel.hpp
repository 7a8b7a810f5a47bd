// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <thread>
#include <utility>
#include <vector>

namespace dustlayer {

/// Deterministic work partitioning: the index range [0, n) is split into
/// `threads` contiguous chunks and each chunk is processed by one worker.
/// Workers write disjoint output slices and never reduce, so results are
/// bitwise identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t nt =
      threads <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (nt == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

/// Resolve a requested worker count: 0 means "use the hardware default".
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace dustlayer
