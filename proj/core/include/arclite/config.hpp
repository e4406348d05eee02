#pragma once

#include <cstdint>

#include "arclite/error.hpp"

namespace arclite {

struct ModelConfig {
  int32_t vocab = 0;
  int32_t hidden = 0;
  int32_t intermediate = 0;
  int32_t n_layers = 0;
  int32_t n_heads = 0;
  int32_t n_kv_heads = 0;
  int32_t head_dim = 0;
  int32_t max_seq = 0;
  float rope_theta = 10000.0f;
  float rms_eps = 1e-5f;

  int32_t q_dim() const { return n_heads * head_dim; }
  int32_t kv_dim() const { return n_kv_heads * head_dim; }

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) fail(ErrorCode::InvalidConfig, what);
    };
    req(vocab > 0, "vocab must be positive");
    req(hidden > 0, "hidden must be positive");
    req(intermediate > 0, "intermediate must be positive");
    req(n_layers > 0, "n_layers must be positive");
    req(n_heads > 0, "n_heads must be positive");
    req(n_kv_heads > 0 && n_heads % n_kv_heads == 0,
        "n_kv_heads must divide n_heads");
    req(head_dim > 0 && head_dim % 2 == 0, "head_dim must be positive even");
    req(max_seq > 0, "max_seq must be positive");
    req(rope_theta > 0, "rope_theta must be positive");
    req(rms_eps > 0, "rms_eps must be positive");
  }
};

}  // namespace arclite
