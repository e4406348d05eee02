#pragma once

#include <span>
#include <vector>

#include "arclite/graph.hpp"
#include "arclite/threading.hpp"

namespace arclite {

// Sync A executes every entry in lockstep: one global barrier per entry,
// inside parallel regions too. Sync B keeps groups independent inside a
// region, local barriers between region entries, and meets globally only
// where the region opens and closes.
enum class SyncMode : uint8_t { A = 0, B = 1 };

const char* sync_mode_name(SyncMode m);

// Per-worker record of entry indexes in the order the worker started them.
struct ExecTrace {
  std::vector<std::vector<int32_t>> per_worker;
};

// Runs the graph's execution list once for the step inputs already stored
// on the graph (token, position). The pool must be in single-group mode and
// is returned to it. Inside a region the pool is split into
// min(threads, lanes) groups; group g owns a contiguous chunk of lanes.
// In emulated mode every region tensor and its sources are checked to live
// on the lane's node; scatter and gather are the only cross-node points.
void execute_step(Graph& g, ThreadPool& pool, SyncMode mode,
                  ExecTrace* trace = nullptr);

// Sets token/position, runs one step, returns a copy of the logits.
std::vector<float> forward_step(Graph& g, ThreadPool& pool, SyncMode mode,
                                int32_t token, int64_t position);

// Greedy argmax; ties resolve to the lowest index.
int32_t argmax(std::span<const float> logits);

// Feeds the prompt one token at a time, then decodes n_gen tokens greedily.
// Returns only the generated ids. Needs prompt.size() + n_gen - 1 cache
// rows. Caches are reset first.
std::vector<int32_t> generate(Graph& g, ThreadPool& pool, SyncMode mode,
                              std::span<const int32_t> prompt, int n_gen);

}  // namespace arclite
