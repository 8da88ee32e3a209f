#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace blur {

// Fixed-size chunking for deterministic parallel loops. Chunk boundaries
// depend only on `total`, never on the thread count, so each output element
// is produced by the same serial instruction order no matter how many
// threads run the loop.
constexpr int64_t kParallelChunk = 4096;

template <class Fn>
inline void parallel_chunks(int64_t total, Fn&& fn) {
  if (total <= 0) return;
  const int64_t chunks = (total + kParallelChunk - 1) / kParallelChunk;
  if (chunks == 1) {
    fn(0, total);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < chunks; ++c) {
    const int64_t begin = c * kParallelChunk;
    const int64_t end = begin + kParallelChunk < total ? begin + kParallelChunk : total;
    fn(begin, end);
  }
}

// Parallel loop over independent items (lanes, rows, features). Each index
// is handled entirely by one thread.
template <class Fn>
inline void parallel_for(int64_t total, Fn&& fn) {
  if (total <= 0) return;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < total; ++i) fn(i);
}

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace blur
