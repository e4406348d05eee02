#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <random>
#include <vector>

#include "arclite/memory.hpp"
#include "arclite/parallel.hpp"
#include "support.hpp"

using namespace arclite;
using support::code_of;

namespace {

ModelConfig config(int heads, int kv_heads, int head_dim, int intermediate) {
  ModelConfig cfg;
  cfg.vocab = 64;
  cfg.hidden = heads * head_dim;
  cfg.intermediate = intermediate;
  cfg.n_layers = 1;
  cfg.n_heads = heads;
  cfg.n_kv_heads = kv_heads;
  cfg.head_dim = head_dim;
  cfg.max_seq = 8;
  return cfg;
}

RawTensor raw(const char* name, Shape shape, std::vector<float> vals) {
  RawTensor t;
  t.name = name;
  t.shape = shape;
  t.data.resize(byte_size(shape, DType::F32));
  std::memcpy(t.data.data(), vals.data(), t.data.size());
  return t;
}

Tensor lane_dst(const Shape& s, DType dt, std::vector<std::byte>& buf,
                int node) {
  buf.assign(byte_size(s, dt), std::byte{0});
  Tensor t;
  t.name = "lane";
  t.shape = s;
  t.dtype = dt;
  t.data = buf.data();
  t.node_assignment = node;
  return t;
}

}  // namespace

TEST_CASE("single lane plan is the identity") {
  PartitionPlan p = plan_partition(config(8, 4, 8, 128), 1, 1, false);
  CHECK(p.lanes == 1);
  CHECK(p.roles.empty());
  CHECK(p.lane_nodes == std::vector<int>{0});
}

TEST_CASE("four lanes split eight heads and four kv heads evenly") {
  ModelConfig cfg = config(8, 4, 8, 128);
  PartitionPlan p = plan_partition(cfg, 4, 4, false);

  // Two query heads (16 rows) and one kv head (8 rows) per lane.
  const auto& wq = p.role("wq");
  const auto& wk = p.role("wk");
  REQUIRE(wq.ranges.size() == 4);
  for (int l = 0; l < 4; l++) {
    CHECK(wq.ranges[size_t(l)].begin == l * 16);
    CHECK(wq.ranges[size_t(l)].end == (l + 1) * 16);
    CHECK(wk.ranges[size_t(l)].begin == l * 8);
    CHECK(wk.ranges[size_t(l)].end == (l + 1) * 8);
  }
  const auto& wv = p.role("wv");
  REQUIRE(wv.ranges.size() == wk.ranges.size());
  for (size_t l = 0; l < wv.ranges.size(); l++) {
    CHECK(wv.ranges[l].begin == wk.ranges[l].begin);
    CHECK(wv.ranges[l].end == wk.ranges[l].end);
  }
  CHECK(p.lane_nodes == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("output projections consume the producing lane's rows") {
  ModelConfig cfg = config(8, 4, 8, 128);
  PartitionPlan p = plan_partition(cfg, 2, 2, false);

  const auto& wq = p.role("wq");
  const auto& wo = p.role("wo");
  CHECK(wo.axis == PartitionAxis::Columns);
  REQUIRE(wo.ranges.size() == 2);
  for (int l = 0; l < 2; l++) {
    CHECK(wo.ranges[size_t(l)].begin == wq.ranges[size_t(l)].begin);
    CHECK(wo.ranges[size_t(l)].end == wq.ranges[size_t(l)].end);
  }

  const auto& gate = p.role("w_gate");
  const auto& down = p.role("w_down");
  CHECK(gate.axis == PartitionAxis::Rows);
  CHECK(down.axis == PartitionAxis::Columns);
  // 128 intermediate rows over 2 lanes: [0,64) and [64,128).
  CHECK(gate.ranges[0].begin == 0);
  CHECK(gate.ranges[0].end == 64);
  CHECK(gate.ranges[1].begin == 64);
  CHECK(gate.ranges[1].end == 128);
  CHECK(down.ranges[0].end == 64);
  CHECK(down.ranges[1].begin == 64);

  CHECK(p.role("attn_norm").axis == PartitionAxis::Replicate);
  CHECK(p.role("mlp_norm").axis == PartitionAxis::Replicate);
}

TEST_CASE("more lanes than kv heads replicates the shared head") {
  // Four lanes, two kv heads: lanes 0,1 read head 0 and lanes 2,3 read
  // head 1, matching the query-head grouping.
  ModelConfig cfg = config(4, 2, 16, 128);
  PartitionPlan p = plan_partition(cfg, 4, 4, false);
  const auto& wk = p.role("wk");
  REQUIRE(wk.ranges.size() == 4);
  CHECK(wk.ranges[0].begin == 0);
  CHECK(wk.ranges[0].end == 16);
  CHECK(wk.ranges[1].begin == 0);
  CHECK(wk.ranges[1].end == 16);
  CHECK(wk.ranges[2].begin == 16);
  CHECK(wk.ranges[2].end == 32);
  CHECK(wk.ranges[3].begin == 16);
  CHECK(wk.ranges[3].end == 32);
  // Query rows stay disjoint.
  const auto& wq = p.role("wq");
  CHECK(wq.ranges[1].begin == 16);
  CHECK(wq.ranges[3].end == 64);
}

TEST_CASE("plan rejects incompatible head counts naming the dimension") {
  CHECK(code_of([] { plan_partition(config(8, 4, 8, 128), 3, 3, false); }) ==
        ErrorCode::PlanError);
  try {
    plan_partition(config(8, 4, 8, 128), 3, 3, false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("n_heads") != std::string::npos);
  }
  // kv=4, lanes=6: neither divides the other.
  CHECK(code_of([] { plan_partition(config(12, 4, 8, 144), 6, 6, false); }) ==
        ErrorCode::PlanError);
}

TEST_CASE("quantized plans keep column splits on block boundaries") {
  // 96 intermediate rows over 2 lanes is 48 per lane, not a whole number
  // of 32-blocks.
  CHECK(code_of([] { plan_partition(config(8, 4, 8, 96), 2, 2, true); }) ==
        ErrorCode::PlanError);
  PartitionPlan ok = plan_partition(config(8, 4, 8, 128), 2, 2, true);
  CHECK(ok.role("w_down").ranges[1].begin % 32 == 0);
}

TEST_CASE("lane nodes wrap around the node count") {
  PartitionPlan p = plan_partition(config(8, 4, 8, 128), 4, 2, false);
  CHECK(p.lane_nodes == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("row split materializes contiguous rows per lane") {
  // [4,2] weight, 2 lanes: lane 0 holds rows 0 and 1.
  RawTensor full = raw("w", Shape::make({4, 2}), {0, 1, 2, 3, 4, 5, 6, 7});
  WeightPartition part{PartitionAxis::Rows, {{0, 2}, {2, 4}}};

  CHECK(partition_shape(part, 0, full.shape) == Shape::make({2, 2}));

  std::vector<std::byte> buf;
  Tensor dst = lane_dst(Shape::make({2, 2}), DType::F32, buf, 0);
  materialize_partition(part, 0, full, &dst);
  CHECK(dst.f32()[0] == 0.0f);
  CHECK(dst.f32()[3] == 3.0f);
  CHECK(dst.node_assignment == 0);

  Tensor dst1 = lane_dst(Shape::make({2, 2}), DType::F32, buf, 1);
  materialize_partition(part, 1, full, &dst1);
  CHECK(dst1.f32()[0] == 4.0f);
  CHECK(dst1.f32()[3] == 7.0f);
}

TEST_CASE("column split copies a sub-range of every row") {
  std::vector<float> vals(6 * 4);
  for (size_t i = 0; i < vals.size(); i++) vals[i] = float(i);
  RawTensor full = raw("w", Shape::make({6, 4}), vals);
  WeightPartition part{PartitionAxis::Columns, {{0, 2}, {2, 4}}};

  CHECK(partition_shape(part, 1, full.shape) == Shape::make({6, 2}));

  std::vector<std::byte> buf;
  Tensor dst = lane_dst(Shape::make({6, 2}), DType::F32, buf, 0);
  materialize_partition(part, 1, full, &dst);
  for (int m = 0; m < 6; m++) {
    CHECK(dst.f32()[2 * m] == float(4 * m + 2));
    CHECK(dst.f32()[2 * m + 1] == float(4 * m + 3));
  }
}

TEST_CASE("quantized column split moves whole blocks bit-identically") {
  std::mt19937 g(61);
  int64_t rows = 4, cols = 64;
  std::vector<float> vals =
      support::uniform(g, size_t(rows * cols), -2, 2);
  RawTensor full;
  full.name = "w";
  full.dtype = DType::Q4B;
  full.shape = Shape::make({rows, cols});
  full.data.resize(byte_size(full.shape, DType::Q4B));
  quantize_q4b(vals, full.data);

  WeightPartition part{PartitionAxis::Columns, {{0, 32}, {32, 64}}};
  std::vector<std::byte> buf;
  Tensor dst = lane_dst(Shape::make({rows, 32}), DType::Q4B, buf, 0);
  materialize_partition(part, 1, full, &dst);

  // Lane 1's block m must be the second block of row m in the full weight.
  for (int64_t m = 0; m < rows; m++) {
    const std::byte* want = full.data.data() + (2 * m + 1) * kQ4BBlockBytes;
    const std::byte* got = buf.data() + m * kQ4BBlockBytes;
    CHECK(std::memcmp(want, got, size_t(kQ4BBlockBytes)) == 0);
  }
}

TEST_CASE("materialize validates the destination shape") {
  RawTensor full = raw("w", Shape::make({4, 2}), {0, 1, 2, 3, 4, 5, 6, 7});
  WeightPartition part{PartitionAxis::Rows, {{0, 2}, {2, 4}}};
  std::vector<std::byte> buf;
  Tensor wrong = lane_dst(Shape::make({3, 2}), DType::F32, buf, 0);
  CHECK(code_of([&] { materialize_partition(part, 0, full, &wrong); }) ==
        ErrorCode::PlanError);
}

TEST_CASE("replicated roles copy the full tensor") {
  RawTensor full = raw("norm", Shape::vec(4), {1, 2, 3, 4});
  WeightPartition part{PartitionAxis::Replicate, {}};
  std::vector<std::byte> buf;
  Tensor dst = lane_dst(Shape::vec(4), DType::F32, buf, 1);
  materialize_partition(part, 1, full, &dst);
  for (int i = 0; i < 4; i++) CHECK(dst.f32()[i] == float(i + 1));
}
