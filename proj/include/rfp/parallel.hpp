#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include <omp.h>

namespace rfp::par {

inline void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

inline int max_threads() { return omp_get_max_threads(); }

// Sums f(i) for i in [0, n) in fixed blocks of 256 terms. The block partials
// are added left to right, so the result does not depend on the thread count.
template <class F>
double deterministic_sum(std::ptrdiff_t n, F&& f) {
  constexpr std::ptrdiff_t kBlock = 256;
  const std::ptrdiff_t nblocks = (n + kBlock - 1) / kBlock;
  if (nblocks <= 1) {
    double s = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) s += f(i);
    return s;
  }
  std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
#pragma omp parallel for schedule(static) if (nblocks > 8)
  for (std::ptrdiff_t b = 0; b < nblocks; ++b) {
    const std::ptrdiff_t lo = b * kBlock;
    const std::ptrdiff_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) s += f(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace rfp::par
