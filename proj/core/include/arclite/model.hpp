#pragma once

#include <memory>
#include <string>

#include "arclite/graph.hpp"
#include "arclite/memory.hpp"
#include "arclite/parallel.hpp"
#include "arclite/weights.hpp"

namespace arclite {

// A loaded model: placed weights, built graph, caches. The pool is sized
// from the file header, weights land in per-node weight arenas according to
// the partition plan, and the static graph is constructed once.
struct Model {
  ModelConfig config;
  NodeLayout layout;
  PartitionPlan plan;
  bool quantized = false;
  std::unique_ptr<MemoryPool> pool;
  std::unique_ptr<Graph> graph;

  void reset() { graph->reset_caches(); }
};

Model load_model(const std::string& path, const NodeLayout& layout,
                 int tp_lanes);

// Same, from weights already in memory (skips the file, used by tests).
Model load_model(const WeightFileData& data, const NodeLayout& layout,
                 int tp_lanes);

}  // namespace arclite
