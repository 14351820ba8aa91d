#pragma once

// Deterministic fan-out over fixed-size chunks. Chunk boundaries depend only
// on the problem size, never on the thread count, and callers reduce the
// per-chunk results in chunk order, so results are bitwise identical for any
// number of threads.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace bumpnet {

inline constexpr std::size_t kChunkSize = 256;

inline std::size_t chunk_count(std::size_t items) { return (items + kChunkSize - 1) / kChunkSize; }

/// Calls body(chunk, begin, end) for every chunk, using up to `threads` workers.
template <class Body>
void for_each_chunk(std::size_t items, std::size_t threads, Body&& body) {
  const std::size_t chunks = chunk_count(items);
  auto run = [&](std::size_t c) { body(c, c * kChunkSize, std::min(items, (c + 1) * kChunkSize)); };
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, chunks);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) run(c);
    });
  for (auto& th : pool) th.join();
}

}  // namespace bumpnet
