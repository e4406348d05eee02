#include "arclite/model.hpp"

#include <cstring>

namespace arclite {

namespace {

size_t round_up(size_t v, size_t a) { return (v + a - 1) / a * a; }

struct RoleSpec {
  const char* role;
  Shape shape;
};

std::vector<RoleSpec> layer_roles(const ModelConfig& cfg) {
  return {
      {"attn_norm", Shape::vec(cfg.hidden)},
      {"wq", Shape::mat(cfg.q_dim(), cfg.hidden)},
      {"wk", Shape::mat(cfg.kv_dim(), cfg.hidden)},
      {"wv", Shape::mat(cfg.kv_dim(), cfg.hidden)},
      {"wo", Shape::mat(cfg.hidden, cfg.q_dim())},
      {"mlp_norm", Shape::vec(cfg.hidden)},
      {"w_gate", Shape::mat(cfg.intermediate, cfg.hidden)},
      {"w_up", Shape::mat(cfg.intermediate, cfg.hidden)},
      {"w_down", Shape::mat(cfg.hidden, cfg.intermediate)},
  };
}

const RawTensor& expect(const WeightFileData& data, const std::string& name,
                        const Shape& shape) {
  const RawTensor* t = data.find(name);
  if (!t) fail(ErrorCode::LoaderMissingTensor, name);
  if (!(t->shape == shape))
    fail(ErrorCode::LoaderShape, name + ": file has " + t->shape.str() +
                                     ", config needs " + shape.str());
  if (t->dtype == DType::F16)
    fail(ErrorCode::LoaderFormat, name + ": f16 weights are not executable");
  return *t;
}

}  // namespace

Model load_model(const std::string& path, const NodeLayout& layout,
                 int tp_lanes) {
  return load_model(read_weight_file(path), layout, tp_lanes);
}

Model load_model(const WeightFileData& data, const NodeLayout& layout,
                 int tp_lanes) {
  const ModelConfig& cfg = data.config;
  auto roles = layer_roles(cfg);

  // Validate the full tensor set up front and find out whether any
  // column-split weight is quantized (that constrains the plan).
  const RawTensor& embed =
      expect(data, "model.embed", Shape::mat(cfg.vocab, cfg.hidden));
  const RawTensor& final_norm =
      expect(data, "model.norm", Shape::vec(cfg.hidden));
  const RawTensor& lm_head =
      expect(data, "model.lm_head", Shape::mat(cfg.vocab, cfg.hidden));
  bool quantized = false;
  bool quantized_cols = false;
  for (int32_t l = 0; l < cfg.n_layers; l++) {
    std::string p = "layers." + std::to_string(l) + ".";
    for (const RoleSpec& r : roles) {
      const RawTensor& t = expect(data, p + r.role, r.shape);
      if (t.dtype == DType::Q4B) {
        quantized = true;
        if (std::string_view(r.role) == "wo" ||
            std::string_view(r.role) == "w_down")
          quantized_cols = true;
      }
    }
  }

  Model m;
  m.config = cfg;
  m.layout = layout;
  m.quantized = quantized;
  m.plan = plan_partition(cfg, tp_lanes, layout.node_count, quantized_cols);
  int lanes = m.plan.lanes;

  // Weight arena demand per node, mirroring the allocations made below.
  size_t align = MemoryPool::kDefaultAlignment;
  std::vector<size_t> wbytes(layout.node_count, 0);
  auto charge = [&](int node, size_t b) { wbytes[node] += round_up(b, align); };
  charge(0, embed.data.size());
  charge(0, final_norm.data.size());
  charge(0, lm_head.data.size());
  for (int32_t l = 0; l < cfg.n_layers; l++) {
    std::string p = "layers." + std::to_string(l) + ".";
    for (const RoleSpec& r : roles) {
      const RawTensor& full = data.tensor(p + r.role);
      if (lanes == 1) {
        charge(0, full.data.size());
      } else {
        const WeightPartition& part = m.plan.role(r.role);
        for (int k = 0; k < lanes; k++)
          charge(m.plan.lane_nodes[k],
                 byte_size(partition_shape(part, k, full.shape), full.dtype));
      }
    }
    int kvh = std::max(1, cfg.n_kv_heads / lanes);
    size_t cache_bytes = static_cast<size_t>(cfg.max_seq) * kvh *
                         cfg.head_dim * sizeof(float);
    for (int k = 0; k < lanes; k++) {
      int node = lanes == 1 ? 0 : m.plan.lane_nodes[k];
      charge(node, cache_bytes);
      charge(node, cache_bytes);
    }
  }
  size_t wmax = 4096;
  for (size_t b : wbytes) wmax = std::max(wmax, b + 4096);

  // Activation demand is bounded by two layers in flight plus the pre and
  // post tensors; vocab covers the logits.
  size_t act = sizeof(float) *
                   (3 * static_cast<size_t>(cfg.vocab) + 16 * cfg.hidden +
                    8 * cfg.q_dim() + 8 * cfg.kv_dim() +
                    6 * cfg.intermediate) +
               4096;

  m.pool = std::make_unique<MemoryPool>(layout, wmax, act);
  GraphBuilder b(*m.pool, cfg, m.plan.lane_nodes);

  auto fill = [&](Tensor* t, const RawTensor& raw) {
    std::memcpy(t->data, raw.data.data(), raw.data.size());
    return t;
  };

  DecoderHandles H;
  H.embed = fill(b.weight(embed.name, embed.shape, embed.dtype, 0), embed);
  H.final_norm = fill(
      b.weight(final_norm.name, final_norm.shape, final_norm.dtype, 0),
      final_norm);
  H.lm_head =
      fill(b.weight(lm_head.name, lm_head.shape, lm_head.dtype, 0), lm_head);

  for (int32_t l = 0; l < cfg.n_layers; l++) {
    std::string p = "layers." + std::to_string(l) + ".";
    LayerHandles lh;
    auto bundle_for = [&](const char* role) -> TensorBundle {
      const RawTensor& full = data.tensor(p + role);
      if (lanes == 1)
        return TensorBundle(
            fill(b.weight(full.name, full.shape, full.dtype, 0), full));
      const WeightPartition& part = m.plan.role(role);
      TensorBundle out;
      for (int k = 0; k < lanes; k++) {
        Shape s = partition_shape(part, k, full.shape);
        Tensor* t = b.weight(full.name + ".l" + std::to_string(k), s,
                             full.dtype, m.plan.lane_nodes[k]);
        t->lane = k;
        materialize_partition(part, k, full, t);
        out.push_back(t);
      }
      return out;
    };
    lh.attn_norm = bundle_for("attn_norm");
    lh.wq = bundle_for("wq");
    lh.wk = bundle_for("wk");
    lh.wv = bundle_for("wv");
    lh.wo = bundle_for("wo");
    lh.mlp_norm = bundle_for("mlp_norm");
    lh.w_gate = bundle_for("w_gate");
    lh.w_up = bundle_for("w_up");
    lh.w_down = bundle_for("w_down");
    H.layers.push_back(std::move(lh));
  }

  b.build_decoder(H);
  m.graph = b.finish();
  return m;
}

}  // namespace arclite
