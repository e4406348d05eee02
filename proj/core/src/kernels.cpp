#include "arclite/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace arclite::kernels {

WorkSlice row_slice(int64_t rows, int parts, int part) {
  int64_t base = rows / parts;
  int64_t extra = rows % parts;
  int64_t begin = part * base + std::min<int64_t>(part, extra);
  return {begin, begin + base + (part < extra ? 1 : 0)};
}

namespace {

void check_slice(WorkSlice s, int64_t total) {
  if (s.begin < 0 || s.end > total || s.begin > s.end)
    fail(ErrorCode::ShapeMismatch, "work slice out of range");
}

void gemm_f32(const float* w, int64_t K, const float* x, int64_t N,
              float* out, WorkSlice rows) {
  for (int64_t m = rows.begin; m < rows.end; m++) {
    const float* wrow = w + m * K;
    for (int64_t n = 0; n < N; n++) {
      float acc = 0.0f;
      for (int64_t k = 0; k < K; k++) acc += wrow[k] * x[k * N + n];
      out[m * N + n] = acc;
    }
  }
}

void gemm_q4b(const std::byte* w, int64_t K, const float* x, int64_t N,
              float* out, WorkSlice rows) {
  int64_t blocks = K / kQ4BBlock;
  float buf[kQ4BBlock];
  std::vector<float> acc(static_cast<size_t>(N));
  for (int64_t m = rows.begin; m < rows.end; m++) {
    const std::byte* wrow = w + m * blocks * kQ4BBlockBytes;
    std::fill(acc.begin(), acc.end(), 0.0f);
    for (int64_t b = 0; b < blocks; b++) {
      q4b_dequant_block(wrow + b * kQ4BBlockBytes, buf);
      const float* xk = x + b * kQ4BBlock * N;
      for (int64_t i = 0; i < kQ4BBlock; i++)
        for (int64_t n = 0; n < N; n++) acc[n] += buf[i] * xk[i * N + n];
    }
    for (int64_t n = 0; n < N; n++) out[m * N + n] = acc[n];
  }
}

}  // namespace

void gemm(const void* w, DType wtype, int64_t M, int64_t K, const float* x,
          int64_t N, float* out, WorkSlice rows) {
  check_slice(rows, M);
  switch (wtype) {
    case DType::F32:
      gemm_f32(static_cast<const float*>(w), K, x, N, out, rows);
      return;
    case DType::Q4B:
      if (K % kQ4BBlock)
        fail(ErrorCode::ShapeMismatch, "q4b gemm needs K % 32 == 0");
      gemm_q4b(static_cast<const std::byte*>(w), K, x, N, out, rows);
      return;
    case DType::F16:
      break;
  }
  fail(ErrorCode::ShapeMismatch, "unsupported gemm weight dtype");
}

void rmsnorm(const float* x, const void* gamma, DType gtype, int64_t n,
             float eps, float* out, WorkSlice slice) {
  check_slice(slice, n);
  float ss = 0.0f;
  for (int64_t i = 0; i < n; i++) ss += x[i] * x[i];
  float inv = 1.0f / std::sqrt(ss / static_cast<float>(n) + eps);
  if (!gamma) {
    for (int64_t i = slice.begin; i < slice.end; i++) out[i] = x[i] * inv;
  } else if (gtype == DType::F32) {
    auto g = static_cast<const float*>(gamma);
    for (int64_t i = slice.begin; i < slice.end; i++)
      out[i] = x[i] * inv * g[i];
  } else if (gtype == DType::Q4B) {
    auto g = static_cast<const std::byte*>(gamma);
    for (int64_t i = slice.begin; i < slice.end; i++)
      out[i] = x[i] * inv *
               q4b_element(g + (i / kQ4BBlock) * kQ4BBlockBytes,
                           static_cast<int>(i % kQ4BBlock));
  } else {
    fail(ErrorCode::ShapeMismatch, "unsupported rmsnorm gamma dtype");
  }
}

void softmax(const float* x, int64_t n, float* out, WorkSlice slice) {
  check_slice(slice, n);
  float m = x[0];
  for (int64_t i = 1; i < n; i++) m = std::max(m, x[i]);
  float den = 0.0f;
  for (int64_t i = 0; i < n; i++) den += std::exp(x[i] - m);
  for (int64_t i = slice.begin; i < slice.end; i++)
    out[i] = std::exp(x[i] - m) / den;
}

void silu(const float* x, int64_t n, float* out, WorkSlice slice) {
  check_slice(slice, n);
  for (int64_t i = slice.begin; i < slice.end; i++)
    out[i] = x[i] / (1.0f + std::exp(-x[i]));
}

void mul(const float* a, const float* b, int64_t n, float* out,
         WorkSlice slice) {
  check_slice(slice, n);
  for (int64_t i = slice.begin; i < slice.end; i++) out[i] = a[i] * b[i];
}

void add(const float* a, const float* b, int64_t n, float* out,
         WorkSlice slice) {
  check_slice(slice, n);
  for (int64_t i = slice.begin; i < slice.end; i++) out[i] = a[i] + b[i];
}

void copy(const float* x, int64_t n, float* out, WorkSlice slice) {
  check_slice(slice, n);
  if (slice.size() > 0)
    std::memcpy(out + slice.begin, x + slice.begin,
                static_cast<size_t>(slice.size()) * sizeof(float));
}

void rope(const float* in, float* out, int heads, int head_dim,
          int64_t position, float theta_base, WorkSlice head_slice) {
  check_slice(head_slice, heads);
  if (head_dim % 2) fail(ErrorCode::ShapeMismatch, "rope needs even head_dim");
  for (int64_t h = head_slice.begin; h < head_slice.end; h++) {
    const float* src = in + h * head_dim;
    float* dst = out + h * head_dim;
    for (int i = 0; i < head_dim / 2; i++) {
      double freq = std::pow(static_cast<double>(theta_base),
                             -2.0 * i / head_dim);
      double angle = static_cast<double>(position) * freq;
      float c = static_cast<float>(std::cos(angle));
      float s = static_cast<float>(std::sin(angle));
      float x0 = src[2 * i];
      float x1 = src[2 * i + 1];
      dst[2 * i] = x0 * c - x1 * s;
      dst[2 * i + 1] = x0 * s + x1 * c;
    }
  }
}

void embed(const void* table, DType ttype, int64_t vocab, int64_t dim,
           int32_t token, float* out, WorkSlice dim_slice) {
  check_slice(dim_slice, dim);
  if (token < 0 || token >= vocab)
    fail(ErrorCode::ShapeMismatch,
         "token " + std::to_string(token) + " outside vocab of " +
             std::to_string(vocab));
  if (ttype == DType::F32) {
    auto t = static_cast<const float*>(table) + int64_t{token} * dim;
    for (int64_t j = dim_slice.begin; j < dim_slice.end; j++) out[j] = t[j];
  } else if (ttype == DType::Q4B) {
    auto t = static_cast<const std::byte*>(table);
    for (int64_t j = dim_slice.begin; j < dim_slice.end; j++) {
      int64_t idx = int64_t{token} * dim + j;
      out[j] = q4b_element(t + (idx / kQ4BBlock) * kQ4BBlockBytes,
                           static_cast<int>(idx % kQ4BBlock));
    }
  } else {
    fail(ErrorCode::ShapeMismatch, "unsupported embedding dtype");
  }
}

void attention(const float* q, const float* k_cache, const float* v_cache,
               AttentionDims dims, int64_t seq_len, float* out,
               WorkSlice head_slice) {
  check_slice(head_slice, dims.heads);
  if (dims.heads % dims.kv_heads)
    fail(ErrorCode::ShapeMismatch, "kv_heads must divide heads");
  if (seq_len <= 0) fail(ErrorCode::ShapeMismatch, "empty attention window");

  int hd = dims.head_dim;
  int64_t row = static_cast<int64_t>(dims.kv_heads) * hd;
  int group = dims.heads / dims.kv_heads;
  float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  std::vector<float> acc(static_cast<size_t>(hd));

  for (int64_t h = head_slice.begin; h < head_slice.end; h++) {
    const float* qh = q + h * hd;
    int64_t kvh = (h / group) * hd;
    float m = 0.0f, den = 0.0f;
    std::fill(acc.begin(), acc.end(), 0.0f);
    for (int64_t t = 0; t < seq_len; t++) {
      const float* kt = k_cache + t * row + kvh;
      const float* vt = v_cache + t * row + kvh;
      float dot = 0.0f;
      for (int d = 0; d < hd; d++) dot += qh[d] * kt[d];
      float logit = dot * scale;
      if (t == 0) {
        m = logit;
        den = 1.0f;
        for (int d = 0; d < hd; d++) acc[d] = vt[d];
      } else if (logit <= m) {
        float w = std::exp(logit - m);
        den += w;
        for (int d = 0; d < hd; d++) acc[d] += w * vt[d];
      } else {
        float c = std::exp(m - logit);
        den = den * c + 1.0f;
        for (int d = 0; d < hd; d++) acc[d] = acc[d] * c + vt[d];
        m = logit;
      }
    }
    for (int d = 0; d < hd; d++) out[h * hd + d] = acc[d] / den;
  }
}

}  // namespace arclite::kernels
