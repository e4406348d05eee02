// End-to-end decode benchmarks on the integer toy (hidden 64,
// intermediate 128, 2 layers, vocab 256). Absolute numbers are toy-sized;
// the point is the relative cost of tp width, sync mode, and thread count
// on one machine.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "arclite/model.hpp"
#include "arclite/scheduler.hpp"
#include "arclite/threading.hpp"
#include "arclite/toy.hpp"
#include "arclite/weights.hpp"

using namespace arclite;

namespace {

const WeightFileData& toy() {
  static const WeightFileData data = [] {
    ModelConfig cfg;
    cfg.vocab = 256;
    cfg.hidden = 64;
    cfg.intermediate = 128;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.n_kv_heads = 2;
    cfg.head_dim = 16;
    cfg.max_seq = 256;
    ToyOptions opt;
    opt.seed = 7;
    opt.integer_weights = true;
    WeightFileData d;
    d.config = cfg;
    d.tensors = make_toy_weights(cfg, opt);
    return d;
  }();
  return data;
}

const WeightFileData& toy_q4b() {
  static const WeightFileData data = [] {
    WeightFileData d = toy();
    for (RawTensor& t : d.tensors) {
      if (t.dtype != DType::F32 || t.shape.inner() % kQ4BBlock) continue;
      std::vector<std::byte> packed(byte_size(t.shape, DType::Q4B));
      quantize_q4b(std::span<const float>(t.f32(), t.shape.count()),
                   packed);
      t.dtype = DType::Q4B;
      t.data = std::move(packed);
    }
    return d;
  }();
  return data;
}

}  // namespace

// One decode step at a growing-then-recycled cache position.
static void BM_DecodeStep(benchmark::State& state) {
  const int tp = int(state.range(0));
  const SyncMode sync = state.range(1) ? SyncMode::B : SyncMode::A;
  const int threads = int(state.range(2));
  Model m = load_model(toy(), NodeLayout::emulated(tp), tp);
  ThreadPool pool(threads);

  int64_t pos = 0;
  for (auto _ : state) {
    if (pos == toy().config.max_seq) {
      state.PauseTiming();
      m.reset();
      pos = 0;
      state.ResumeTiming();
    }
    std::vector<float> logits =
        forward_step(*m.graph, pool, sync, int32_t(pos & 127), pos);
    benchmark::DoNotOptimize(logits.data());
    pos++;
  }
  state.SetItemsProcessed(int64_t(state.iterations()));
}
BENCHMARK(BM_DecodeStep)
    ->ArgNames({"tp", "sync_b", "threads"})
    ->Args({1, 0, 1})
    ->Args({1, 1, 1})
    ->Args({1, 0, 2})
    ->Args({2, 0, 2})
    ->Args({2, 1, 2})
    ->Args({4, 0, 4})
    ->Args({4, 1, 4});

static void BM_DecodeStepQ4B(benchmark::State& state) {
  const int tp = int(state.range(0));
  Model m = load_model(toy_q4b(), NodeLayout::emulated(tp), tp);
  ThreadPool pool(tp);

  int64_t pos = 0;
  for (auto _ : state) {
    if (pos == toy_q4b().config.max_seq) {
      state.PauseTiming();
      m.reset();
      pos = 0;
      state.ResumeTiming();
    }
    std::vector<float> logits =
        forward_step(*m.graph, pool, SyncMode::A, int32_t(pos & 127), pos);
    benchmark::DoNotOptimize(logits.data());
    pos++;
  }
  state.SetItemsProcessed(int64_t(state.iterations()));
}
BENCHMARK(BM_DecodeStepQ4B)->ArgName("tp")->Arg(1)->Arg(2);

// Whole generate() call: 3-token prompt prefill plus 32 decoded tokens,
// including cache reset.
static void BM_Generate32(benchmark::State& state) {
  Model m = load_model(toy(), NodeLayout::emulated(1), 1);
  ThreadPool pool(int(state.range(0)));
  std::vector<int32_t> prompt = {1, 2, 3};
  for (auto _ : state) {
    m.reset();
    std::vector<int32_t> out =
        generate(*m.graph, pool, SyncMode::A, prompt, 32);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * 32);
}
BENCHMARK(BM_Generate32)->ArgName("threads")->Arg(1)->Arg(2);

BENCHMARK_MAIN();
