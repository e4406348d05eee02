#pragma once

#include <map>
#include <string>
#include <vector>

#include "arclite/config.hpp"
#include "arclite/tensor.hpp"
#include "arclite/weights.hpp"

namespace arclite {

// How one weight matrix is divided across lanes. Ranges are stored in
// element units of the partitioned axis: output rows for Heads and Rows,
// input columns for Columns. Replicated weights carry no ranges.
enum class PartitionAxis : uint8_t { Replicate, Heads, Rows, Columns };

const char* partition_axis_name(PartitionAxis a);

struct LaneRange {
  int64_t begin = 0;
  int64_t end = 0;
  int64_t size() const { return end - begin; }
};

struct WeightPartition {
  PartitionAxis axis = PartitionAxis::Replicate;
  std::vector<LaneRange> ranges;  // one per lane; empty for Replicate
};

// Lane layout for one model. Roles: wq/wk/wv split by heads (rows in units
// of head_dim), w_gate/w_up split by output rows, wo/w_down split by input
// columns aligned with the producing partition, attn_norm/mlp_norm
// replicated. Column splits of quantized weights must fall on 32-element
// block boundaries.
struct PartitionPlan {
  int lanes = 1;
  std::vector<int> lane_nodes;
  std::map<std::string, WeightPartition> roles;

  const WeightPartition& role(const std::string& name) const;
};

// lanes must divide n_heads. kv heads split evenly when lanes <= n_kv_heads;
// with more lanes than kv heads (lanes a multiple of n_kv_heads) every lane
// replicates the one kv head its query heads read, so those ranges overlap.
// node_count maps lane l to node l % node_count. quantized toggles the
// block-alignment validation for the column splits.
PartitionPlan plan_partition(const ModelConfig& cfg, int lanes,
                             int node_count, bool quantized);

// Copies lane `lane`'s slice of a staged full weight into dst, which must
// already have the lane shape. Row-family splits are contiguous block
// copies; column splits copy a sub-range of every output row, whole Q4B
// blocks at a time, so lane bytes equal the corresponding full-weight bytes.
void materialize_partition(const WeightPartition& part, int lane,
                           const RawTensor& full, Tensor* dst);

// Lane shape of a full weight under a partition.
Shape partition_shape(const WeightPartition& part, int lane,
                      const Shape& full);

}  // namespace arclite
