#include "arclite/parallel.hpp"

#include <cstring>

namespace arclite {

const char* partition_axis_name(PartitionAxis a) {
  switch (a) {
    case PartitionAxis::Replicate: return "replicate";
    case PartitionAxis::Heads: return "heads";
    case PartitionAxis::Rows: return "rows";
    case PartitionAxis::Columns: return "columns";
  }
  return "?";
}

const WeightPartition& PartitionPlan::role(const std::string& name) const {
  auto it = roles.find(name);
  if (it == roles.end()) fail(ErrorCode::PlanError, "no role '" + name + "'");
  return it->second;
}

namespace {

std::vector<LaneRange> even_ranges(int64_t total, int lanes, int64_t unit,
                                   const char* what) {
  if (total % (static_cast<int64_t>(lanes) * unit))
    fail(ErrorCode::PlanError,
         std::string(what) + ": " + std::to_string(total) +
             " does not split into " + std::to_string(lanes) +
             " lanes of whole units of " + std::to_string(unit));
  int64_t per = total / lanes;
  std::vector<LaneRange> r(lanes);
  for (int l = 0; l < lanes; l++) r[l] = {l * per, (l + 1) * per};
  return r;
}

}  // namespace

PartitionPlan plan_partition(const ModelConfig& cfg, int lanes,
                             int node_count, bool quantized) {
  cfg.validate();
  if (lanes < 1) fail(ErrorCode::PlanError, "lanes must be >= 1");
  if (node_count < 1) fail(ErrorCode::PlanError, "node_count must be >= 1");

  PartitionPlan plan;
  plan.lanes = lanes;
  plan.lane_nodes.resize(lanes);
  for (int l = 0; l < lanes; l++) plan.lane_nodes[l] = l % node_count;
  if (lanes == 1) return plan;

  if (cfg.n_heads % lanes)
    fail(ErrorCode::PlanError,
         "n_heads " + std::to_string(cfg.n_heads) + " not divisible by " +
             std::to_string(lanes) + " lanes");
  if (cfg.n_kv_heads % lanes && lanes % cfg.n_kv_heads)
    fail(ErrorCode::PlanError,
         "n_kv_heads " + std::to_string(cfg.n_kv_heads) +
             " incompatible with " + std::to_string(lanes) +
             " lanes (neither divides the other)");

  // Query projection split by whole heads; ranges in output rows.
  plan.roles["wq"] = {PartitionAxis::Heads,
                      even_ranges(cfg.q_dim(), lanes, cfg.head_dim, "wq")};

  // Key/value: disjoint head split when possible. With more lanes than kv
  // heads each lane replicates the single kv head its query heads map to,
  // so the kv ranges overlap across lanes sharing a head.
  std::vector<LaneRange> kv_ranges(lanes);
  if (cfg.n_kv_heads % lanes == 0) {
    kv_ranges = even_ranges(cfg.kv_dim(), lanes, cfg.head_dim, "wk");
  } else {
    int lanes_per_head = lanes / cfg.n_kv_heads;
    for (int l = 0; l < lanes; l++) {
      int64_t h = l / lanes_per_head;
      kv_ranges[l] = {h * cfg.head_dim, (h + 1) * cfg.head_dim};
    }
  }
  plan.roles["wk"] = {PartitionAxis::Heads, kv_ranges};
  plan.roles["wv"] = {PartitionAxis::Heads, kv_ranges};

  // Output projection consumes the per-lane attention outputs, so its
  // column ranges are exactly the wq row ranges.
  plan.roles["wo"] = {PartitionAxis::Columns, plan.roles["wq"].ranges};

  // MLP: gate/up by rows, down by the matching columns. Quantized column
  // splits must keep whole 32-element blocks together.
  int64_t unit = quantized ? kQ4BBlock : 1;
  plan.roles["w_gate"] = {
      PartitionAxis::Rows,
      even_ranges(cfg.intermediate, lanes, unit, "w_gate")};
  plan.roles["w_up"] = plan.roles["w_gate"];
  plan.roles["w_up"].axis = PartitionAxis::Rows;
  plan.roles["w_down"] = {PartitionAxis::Columns,
                          plan.roles["w_gate"].ranges};

  if (quantized) {
    for (const char* role : {"wo", "w_down"}) {
      for (const LaneRange& r : plan.roles[role].ranges)
        if (r.begin % kQ4BBlock || r.end % kQ4BBlock)
          fail(ErrorCode::PlanError,
               std::string(role) +
                   ": quantized column split not block aligned");
    }
  }

  plan.roles["attn_norm"] = {PartitionAxis::Replicate, {}};
  plan.roles["mlp_norm"] = {PartitionAxis::Replicate, {}};
  return plan;
}

Shape partition_shape(const WeightPartition& part, int lane,
                      const Shape& full) {
  if (part.axis == PartitionAxis::Replicate) return full;
  if (lane < 0 || static_cast<size_t>(lane) >= part.ranges.size())
    fail(ErrorCode::PlanError, "lane outside plan");
  const LaneRange& r = part.ranges[lane];
  if (full.rank != 2)
    fail(ErrorCode::PlanError, "partitioned weights must be rank 2");
  Shape s = full;
  if (part.axis == PartitionAxis::Columns) {
    if (r.end > full.cols()) fail(ErrorCode::PlanError, "column range");
    s.extent[0] = r.size();
  } else {
    if (r.end > full.rows()) fail(ErrorCode::PlanError, "row range");
    s.extent[1] = r.size();
  }
  return s;
}

void materialize_partition(const WeightPartition& part, int lane,
                           const RawTensor& full, Tensor* dst) {
  Shape want = partition_shape(part, lane, full.shape);
  if (!(dst->shape == want) || dst->dtype != full.dtype)
    fail(ErrorCode::PlanError,
         full.name + ": destination is " + dst->shape.str() + ", plan needs " +
             want.str());

  if (part.axis == PartitionAxis::Replicate) {
    std::memcpy(dst->data, full.data.data(), full.data.size());
    return;
  }

  const LaneRange& r = part.ranges[lane];
  if (part.axis != PartitionAxis::Columns) {
    // Whole output rows: one contiguous block.
    size_t row_bytes = byte_size(full.shape, full.dtype) /
                       static_cast<size_t>(full.shape.rows());
    std::memcpy(dst->data, full.data.data() + r.begin * row_bytes,
                static_cast<size_t>(r.size()) * row_bytes);
    return;
  }

  // Column sub-range of every row.
  int64_t rows = full.shape.rows();
  if (full.dtype == DType::F32) {
    int64_t cols = full.shape.cols();
    for (int64_t m = 0; m < rows; m++)
      std::memcpy(dst->data + m * r.size() * 4,
                  full.data.data() + (m * cols + r.begin) * 4,
                  static_cast<size_t>(r.size()) * 4);
  } else if (full.dtype == DType::Q4B) {
    if (r.begin % kQ4BBlock || r.size() % kQ4BBlock)
      fail(ErrorCode::PlanError,
           full.name + ": q4b column split not block aligned");
    int64_t row_blocks = full.shape.cols() / kQ4BBlock;
    int64_t lane_blocks = r.size() / kQ4BBlock;
    int64_t first = r.begin / kQ4BBlock;
    for (int64_t m = 0; m < rows; m++)
      std::memcpy(
          dst->data + m * lane_blocks * kQ4BBlockBytes,
          full.data.data() + (m * row_blocks + first) * kQ4BBlockBytes,
          static_cast<size_t>(lane_blocks) * kQ4BBlockBytes);
  } else {
    fail(ErrorCode::PlanError, "unsupported dtype for column split");
  }
}

}  // namespace arclite
