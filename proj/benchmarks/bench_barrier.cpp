// Synchronization cost benchmarks: barrier round latency by pool size,
// group-local vs global, plus dispatch and regroup overhead. Oversubscribed
// pools (more threads than cores) are the interesting rows on small
// machines; the futex path keeps them from collapsing.

#include <benchmark/benchmark.h>

#include <vector>

#include "arclite/threading.hpp"

using namespace arclite;

namespace {
constexpr int kRounds = 1024;  // barriers per dispatch, amortizes run()
}

static void BM_GlobalBarrier(benchmark::State& state) {
  ThreadPool pool(int(state.range(0)));
  for (auto _ : state) {
    pool.run([](WorkerContext& wc) {
      for (int i = 0; i < kRounds; i++) wc.global_barrier();
    });
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * kRounds);
}
BENCHMARK(BM_GlobalBarrier)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

static void BM_LocalBarrier(benchmark::State& state) {
  const int threads = int(state.range(0));
  ThreadPool pool(threads);
  std::vector<int> halves = {threads / 2, threads - threads / 2};
  pool.reconfigure(halves);
  for (auto _ : state) {
    pool.run([](WorkerContext& wc) {
      for (int i = 0; i < kRounds; i++) wc.local_barrier();
    });
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * kRounds);
}
BENCHMARK(BM_LocalBarrier)->Arg(2)->Arg(4)->Arg(8);

// Round-trip latency of dispatching an empty program to the pool.
static void BM_Dispatch(benchmark::State& state) {
  ThreadPool pool(int(state.range(0)));
  for (auto _ : state) {
    pool.run([](WorkerContext&) {});
  }
  state.SetItemsProcessed(int64_t(state.iterations()));
}
BENCHMARK(BM_Dispatch)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

// Cost of flipping the group layout, as done at scatter/gather borders.
static void BM_Reconfigure(benchmark::State& state) {
  const int threads = int(state.range(0));
  ThreadPool pool(threads);
  std::vector<int> whole = {threads};
  std::vector<int> halves = {threads / 2, threads - threads / 2};
  for (auto _ : state) {
    pool.reconfigure(halves);
    pool.reconfigure(whole);
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * 2);
}
BENCHMARK(BM_Reconfigure)->Arg(2)->Arg(4)->Arg(8);

BENCHMARK_MAIN();
