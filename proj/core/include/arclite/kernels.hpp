#pragma once

#include <cstdint>

#include "arclite/tensor.hpp"

namespace arclite::kernels {

// Reference scalar kernels. Work splits by output rows only; reductions
// (the K axis, softmax denominators, rms means, attention streams) are never
// divided, so results are bit-identical for any worker count. Shared scalars
// like the rms mean are recomputed by every worker from the same inputs in
// the same order, which is redundant but exact.

struct WorkSlice {
  int64_t begin = 0;
  int64_t end = 0;
  int64_t size() const { return end - begin; }
};

// Near-equal contiguous piece `part` of [0, rows) split `parts` ways.
// Piece sizes differ by at most one, larger pieces first.
WorkSlice row_slice(int64_t rows, int parts, int part);

// out[m,n] = sum_k w[m,k] * x[k,n]. w is row-major [M,K], F32 or Q4B
// (K % 32 == 0); x is row-major [K,N] F32; out is [M,N] F32. Accumulation
// in F32, k ascending. rows slices M.
void gemm(const void* w, DType wtype, int64_t M, int64_t K, const float* x,
          int64_t N, float* out, WorkSlice rows);

// out[i] = x[i] * gamma[i] / sqrt(mean(x^2) + eps). gamma F32 or Q4B, or
// null for 1. slice covers output elements; the mean is over all n.
void rmsnorm(const float* x, const void* gamma, DType gtype, int64_t n,
             float eps, float* out, WorkSlice slice);

// Max-subtracted softmax over the whole vector; slice covers outputs.
void softmax(const float* x, int64_t n, float* out, WorkSlice slice);

void silu(const float* x, int64_t n, float* out, WorkSlice slice);
void mul(const float* a, const float* b, int64_t n, float* out,
         WorkSlice slice);
void add(const float* a, const float* b, int64_t n, float* out,
         WorkSlice slice);
void copy(const float* x, int64_t n, float* out, WorkSlice slice);

// Rotates pairs (2i, 2i+1) inside each head by
// position * theta_base^(-2i/head_dim). in/out are [heads * head_dim];
// slice covers heads.
void rope(const float* in, float* out, int heads, int head_dim,
          int64_t position, float theta_base, WorkSlice head_slice);

// out[j] = table[token, j] for j in slice. table is [vocab, dim], F32 or
// Q4B. token must lie in [0, vocab).
void embed(const void* table, DType ttype, int64_t vocab, int64_t dim,
           int32_t token, float* out, WorkSlice dim_slice);

struct AttentionDims {
  int heads;     // query heads present in q
  int kv_heads;  // kv heads present in the caches; divides heads
  int head_dim;
};

// Causal attention for one query token against seq_len cached positions.
// q is [heads * head_dim]; caches are [seq_len, kv_heads, head_dim] rows.
// Softmax is evaluated streaming (online max and denominator) in one pass.
// slice covers query heads.
void attention(const float* q, const float* k_cache, const float* v_cache,
               AttentionDims dims, int64_t seq_len, float* out,
               WorkSlice head_slice);

}  // namespace arclite::kernels
