#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ssa {

/// Number of worker threads operations may use for batch-axis parallelism.
/// Defaults to 1; results for any setting differ from the single-threaded run
/// only by floating-point reassociation of cross-sample reductions.
void set_num_threads(unsigned threads);
unsigned num_threads();

/// Splits [0, count) into at most num_threads() contiguous chunks and calls
/// fn(chunk, begin, end) for each. The partition depends only on count and
/// the thread setting, so reductions done per chunk are reproducible.
template <typename Fn>
void parallel_chunks(std::size_t count, Fn&& fn) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(num_threads(), count));
  if (chunks == 1) {
    fn(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(chunks - 1);
  const std::size_t base = count / chunks;
  const std::size_t extra = count % chunks;
  std::size_t begin = 0;
  std::size_t first_end = 0;
  for (std::size_t i = 0; i < chunks; ++i) {
    const std::size_t end = begin + base + (i < extra ? 1 : 0);
    if (i == 0) {
      first_end = end;
    } else {
      workers.emplace_back([&fn, i, begin, end] { fn(i, begin, end); });
    }
    begin = end;
  }
  fn(std::size_t{0}, std::size_t{0}, first_end);
}

inline std::size_t chunk_count(std::size_t count) {
  return std::max<std::size_t>(1, std::min<std::size_t>(num_threads(), count));
}

}  // namespace ssa
