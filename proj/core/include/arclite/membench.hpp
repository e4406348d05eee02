#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arclite/memory.hpp"

namespace arclite {

// Sequential-read bandwidth for every (cores on node i, memory on node j)
// pair. Real mode binds one buffer per memory node and pins reader threads
// per core node; emulated or single-node layouts collapse to a 1x1 matrix.
struct BandwidthResult {
  NumaMode mode = NumaMode::Emulated;
  int nodes = 1;
  std::vector<double> gbps;  // row-major [core_node][mem_node]

  double at(int core_node, int mem_node) const {
    return gbps[static_cast<size_t>(core_node) * nodes + mem_node];
  }
};

// buffer_bytes per probe buffer (>= a few cache sizes to defeat caching),
// threads per probe (0 picks the core count of the node, or 1 when
// unknown), repeats full passes per measurement.
BandwidthResult measure_bandwidth(const NodeLayout& layout,
                                  size_t buffer_bytes, int threads,
                                  int repeats);

// Matrix layout: one row per core node, one column per memory node.
std::string format_bandwidth(const BandwidthResult& r);

}  // namespace arclite
