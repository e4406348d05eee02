#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arclite/config.hpp"
#include "arclite/weights.hpp"

namespace arclite {

// Self-contained test model generator. Weight names follow the loader
// contract: model.embed, layers.N.{attn_norm,wq,wk,wv,wo,mlp_norm,w_gate,
// w_up,w_down}, model.norm, model.lm_head.
struct ToyOptions {
  uint64_t seed = 1;
  // Integer-valued entries in {-2..2} (norm weights 1), exactly
  // representable in every float width. Otherwise uniform floats scaled by
  // 1/sqrt(hidden).
  bool integer_weights = false;
};

std::vector<RawTensor> make_toy_weights(const ModelConfig& cfg,
                                        const ToyOptions& opt);

void write_toy_model(const std::string& path, const ModelConfig& cfg,
                     const ToyOptions& opt);

}  // namespace arclite
