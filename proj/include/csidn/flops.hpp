// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "csidn/layer.hpp"

namespace csidn {

// Multiply-accumulate count of a layer stack. Only weighted layers cost:
// dense contributes out*in, conv2d the equivalent dense cost per output
// element (in_channels*k*k). Activations, batch norm and reshapes are free.
inline uint64_t flops_estimate(const std::vector<LayerSpec>& specs) {
  uint64_t total = 0;
  for (const LayerSpec& s : specs) {
    switch (s.kind) {
      case LayerKind::dense:
        total += static_cast<uint64_t>(s.output_dims[0]) * s.input_dims[0];
        break;
      case LayerKind::conv2d:
        total += static_cast<uint64_t>(shape_numel(s.output_dims)) * s.in_channels * s.kernel *
                 s.kernel;
        break;
      default:
        break;
    }
  }
  return total;
}

}  // namespace csidn
