#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "arclite/error.hpp"

namespace support {

// Error code raised by the call, or nullopt when it returned normally.
template <typename F>
std::optional<arclite::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const arclite::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::vector<float> uniform(std::mt19937& g, size_t n, float lo,
                                  float hi) {
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

// max |a-b| over the vectors, scaled by max |b| (b is the reference).
inline double rel_diff(const std::vector<float>& a,
                       const std::vector<float>& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < b.size(); i++) {
    num = std::max(num, std::abs(double(a[i]) - double(b[i])));
    den = std::max(den, std::abs(double(b[i])));
  }
  return den == 0.0 ? num : num / den;
}

// The oracles below are deliberately naive re-derivations, kept apart from
// the kernel code so the two can only agree by computing the same thing.

inline std::vector<float> naive_gemm(const std::vector<float>& w, int64_t M,
                                     int64_t K, const std::vector<float>& x,
                                     int64_t N) {
  std::vector<float> out(size_t(M * N), 0.0f);
  for (int64_t m = 0; m < M; m++)
    for (int64_t n = 0; n < N; n++) {
      float acc = 0.0f;
      for (int64_t k = 0; k < K; k++)
        acc += w[size_t(m * K + k)] * x[size_t(k * N + n)];
      out[size_t(m * N + n)] = acc;
    }
  return out;
}

inline std::vector<float> naive_softmax(const std::vector<float>& x) {
  float m = *std::max_element(x.begin(), x.end());
  std::vector<float> out(x.size());
  double den = 0.0;
  for (size_t i = 0; i < x.size(); i++) {
    out[i] = std::exp(x[i] - m);
    den += out[i];
  }
  for (auto& v : out) v = float(v / den);
  return out;
}

inline std::vector<float> naive_rmsnorm(const std::vector<float>& x,
                                        const std::vector<float>& gamma,
                                        float eps) {
  double ss = 0.0;
  for (float v : x) ss += double(v) * v;
  double inv = 1.0 / std::sqrt(ss / double(x.size()) + eps);
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); i++)
    out[i] = float(double(x[i]) * inv) * (gamma.empty() ? 1.0f : gamma[i]);
  return out;
}

// Two-pass attention for one query token: materialize all logits per head,
// plain softmax, then the weighted value sum. Caches are rows of
// [kv_heads * head_dim]; query head h reads kv head h / (heads / kv_heads).
inline std::vector<float> naive_attention(const std::vector<float>& q,
                                          const std::vector<float>& kc,
                                          const std::vector<float>& vc,
                                          int heads, int kv_heads,
                                          int head_dim, int64_t seq) {
  std::vector<float> out(size_t(heads) * head_dim, 0.0f);
  int64_t row = int64_t(kv_heads) * head_dim;
  float scale = 1.0f / std::sqrt(float(head_dim));
  for (int h = 0; h < heads; h++) {
    int kvh = h / (heads / kv_heads);
    const float* qh = q.data() + size_t(h) * head_dim;
    std::vector<float> logits(static_cast<size_t>(seq));
    for (int64_t t = 0; t < seq; t++) {
      const float* kt = kc.data() + size_t(t * row + kvh * head_dim);
      float dot = 0.0f;
      for (int d = 0; d < head_dim; d++) dot += qh[d] * kt[d];
      logits[size_t(t)] = dot * scale;
    }
    std::vector<float> p = naive_softmax(logits);
    float* oh = out.data() + size_t(h) * head_dim;
    for (int64_t t = 0; t < seq; t++) {
      const float* vt = vc.data() + size_t(t * row + kvh * head_dim);
      for (int d = 0; d < head_dim; d++) oh[d] += p[size_t(t)] * vt[d];
    }
  }
  return out;
}

}  // namespace support
