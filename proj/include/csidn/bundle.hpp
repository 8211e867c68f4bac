// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "csidn/autoencoder.hpp"
#include "csidn/dnnet.hpp"
#include "csidn/rng.hpp"

namespace csidn {

// The three networks of one feedback pipeline. Copyable, so training
// stages can snapshot the best-validation state.
template <typename T>
struct ModelBundle {
  AutoencoderSpec ae_spec;
  DnnetSpec dn_spec;
  Encoder<T> encoder;
  Decoder<T> decoder;
  Dnnet<T> dnnet;
  uint64_t train_step = 0;

  ModelBundle(const AutoencoderSpec& ae, const DnnetSpec& dn, uint64_t master_seed)
      : ae_spec(ae),
        dn_spec(dn),
        encoder(ae, Rng(seed_mix(master_seed, seed_tag("init-encoder")))),
        decoder(ae, Rng(seed_mix(master_seed, seed_tag("init-decoder")))),
        dnnet(dn, Rng(seed_mix(master_seed, seed_tag("init-dnnet")))) {
    if (dn.n_cw != ae.n_cw) {
      throw ConfigError("bundle: dnnet codeword length " + std::to_string(dn.n_cw) +
                        " differs from autoencoder codeword length " + std::to_string(ae.n_cw));
    }
  }

  void zero_grad() {
    encoder.zero_grad();
    decoder.zero_grad();
    dnnet.zero_grad();
  }

  void set_autoencoder_frozen(bool f) {
    encoder.set_frozen(f);
    decoder.set_frozen(f);
  }
  void set_dnnet_frozen(bool f) { dnnet.set_frozen(f); }
};

}  // namespace csidn
