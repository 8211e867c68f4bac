// SPDX-License-Identifier: Apache-2.0
#include "csidn/dft.hpp"

#include <cmath>

namespace csidn {

CMat dft_matrix(std::size_t n) {
  if (n == 0) throw ConfigError("dft_matrix: size must be positive");
  CMat f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double step = -2.0 * 3.14159265358979323846 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      // Reduce j*k modulo n before the trig call to keep phases accurate
      // for large n.
      const std::size_t jk = (j * k) % n;
      const double phase = step * static_cast<double>(jk);
      f(j, k) = cplx(scale * std::cos(phase), scale * std::sin(phase));
    }
  }
  return f;
}

}  // namespace csidn
