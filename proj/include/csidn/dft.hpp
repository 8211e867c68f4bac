// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "csidn/complex_mat.hpp"
#include "csidn/error.hpp"

namespace csidn {

/// Unitary DFT matrix: entry (j,k) = exp(-2*pi*i*j*k/n) / sqrt(n).
CMat dft_matrix(std::size_t n);

}  // namespace csidn
