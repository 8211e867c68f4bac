// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace csidn {

// Inner loops shared by the layer implementations. Written so the
// compiler can vectorize without -ffast-math: axpy has independent lanes,
// dot uses four fixed accumulators (fixed summation order, so results are
// reproducible run to run).

template <typename T>
inline void axpy(T* dst, const T* src, T alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * src[i];
}

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return ((s0 + s1) + (s2 + s3));
}

}  // namespace csidn
