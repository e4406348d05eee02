// Single-thread kernel microbenchmarks. GEMM numbers report the weight
// bytes streamed per second, which is the axis the runtime cares about;
// everything here is memory-bound at decode shapes.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <random>
#include <vector>

#include "arclite/kernels.hpp"
#include "arclite/tensor.hpp"

using namespace arclite;

namespace {

std::vector<float> random_floats(size_t n, uint32_t seed) {
  std::mt19937 g(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = d(g);
  return v;
}

kernels::WorkSlice full(int64_t n) { return {0, n}; }

}  // namespace

static void BM_GemvF32(benchmark::State& state) {
  const int64_t n = state.range(0);
  std::vector<float> w = random_floats(size_t(n * n), 1);
  std::vector<float> x = random_floats(size_t(n), 2);
  std::vector<float> out(static_cast<size_t>(n));
  for (auto _ : state) {
    kernels::gemm(w.data(), DType::F32, n, n, x.data(), 1, out.data(),
                  full(n));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(int64_t(state.iterations()) * n * n *
                          int64_t(sizeof(float)));
}
BENCHMARK(BM_GemvF32)->Arg(64)->Arg(256)->Arg(1024)->Arg(2048);

static void BM_GemvQ4B(benchmark::State& state) {
  const int64_t n = state.range(0);
  std::vector<float> w = random_floats(size_t(n * n), 3);
  std::vector<std::byte> packed(size_t(n * (n / kQ4BBlock) *
                                       kQ4BBlockBytes));
  quantize_q4b(w, packed);
  std::vector<float> x = random_floats(size_t(n), 4);
  std::vector<float> out(static_cast<size_t>(n));
  for (auto _ : state) {
    kernels::gemm(packed.data(), DType::Q4B, n, n, x.data(), 1, out.data(),
                  full(n));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(int64_t(state.iterations()) *
                          int64_t(packed.size()));
}
BENCHMARK(BM_GemvQ4B)->Arg(64)->Arg(256)->Arg(1024)->Arg(2048);

static void BM_RmsNorm(benchmark::State& state) {
  const int64_t n = state.range(0);
  std::vector<float> x = random_floats(size_t(n), 5);
  std::vector<float> gamma = random_floats(size_t(n), 6);
  std::vector<float> out(static_cast<size_t>(n));
  for (auto _ : state) {
    kernels::rmsnorm(x.data(), gamma.data(), DType::F32, n, 1e-5f,
                     out.data(), full(n));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * n);
}
BENCHMARK(BM_RmsNorm)->Arg(64)->Arg(4096);

static void BM_Softmax(benchmark::State& state) {
  const int64_t n = state.range(0);
  std::vector<float> x = random_floats(size_t(n), 7);
  std::vector<float> out(static_cast<size_t>(n));
  for (auto _ : state) {
    kernels::softmax(x.data(), n, out.data(), full(n));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * n);
}
BENCHMARK(BM_Softmax)->Arg(256)->Arg(4096);

static void BM_Rope(benchmark::State& state) {
  const int heads = int(state.range(0));
  const int hd = int(state.range(1));
  std::vector<float> x = random_floats(size_t(heads) * hd, 8);
  std::vector<float> out(x.size());
  int64_t pos = 0;
  for (auto _ : state) {
    kernels::rope(x.data(), out.data(), heads, hd, pos++ & 1023, 10000.0f,
                  full(heads));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * heads * hd);
}
BENCHMARK(BM_Rope)->Args({4, 16})->Args({32, 128});

static void BM_Attention(benchmark::State& state) {
  const int64_t seq = state.range(0);
  kernels::AttentionDims dims{4, 2, 16};
  std::vector<float> q = random_floats(size_t(dims.heads * dims.head_dim), 9);
  std::vector<float> k =
      random_floats(size_t(seq * dims.kv_heads * dims.head_dim), 10);
  std::vector<float> v =
      random_floats(size_t(seq * dims.kv_heads * dims.head_dim), 11);
  std::vector<float> out(q.size());
  for (auto _ : state) {
    kernels::attention(q.data(), k.data(), v.data(), dims, seq, out.data(),
                       full(dims.heads));
    benchmark::DoNotOptimize(out.data());
  }
  // Two cache streams read per step.
  state.SetBytesProcessed(int64_t(state.iterations()) * 2 * seq *
                          dims.kv_heads * dims.head_dim *
                          int64_t(sizeof(float)));
}
BENCHMARK(BM_Attention)->Arg(64)->Arg(512)->Arg(2048);

static void BM_QuantizeQ4B(benchmark::State& state) {
  const int64_t n = 1 << 20;
  std::vector<float> x = random_floats(size_t(n), 12);
  std::vector<std::byte> packed(size_t(n / kQ4BBlock * kQ4BBlockBytes));
  for (auto _ : state) {
    quantize_q4b(x, packed);
    benchmark::DoNotOptimize(packed.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * n);
}
BENCHMARK(BM_QuantizeQ4B);

static void BM_DequantizeQ4B(benchmark::State& state) {
  const int64_t n = 1 << 20;
  std::vector<float> x = random_floats(size_t(n), 13);
  std::vector<std::byte> packed(size_t(n / kQ4BBlock * kQ4BBlockBytes));
  quantize_q4b(x, packed);
  std::vector<float> out(static_cast<size_t>(n));
  for (auto _ : state) {
    dequantize_q4b(packed, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * n);
}
BENCHMARK(BM_DequantizeQ4B);

BENCHMARK_MAIN();
