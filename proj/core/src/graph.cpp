#include "arclite/graph.hpp"

#include <cstring>

namespace arclite {

const char* append_mode_name(AppendMode m) {
  switch (m) {
    case AppendMode::Serial: return "serial";
    case AppendMode::Scatter: return "scatter";
    case AppendMode::Parallel: return "parallel";
    case AppendMode::Gather: return "gather";
  }
  return "?";
}

int32_t ExecList::append(TensorBundle bundle, AppendMode mode) {
  if (bundle.empty())
    fail(ErrorCode::GraphConstruction, "empty bundle");
  int32_t idx = static_cast<int32_t>(entries_.size());

  switch (mode) {
    case AppendMode::Serial:
      if (open_ >= 0)
        fail(ErrorCode::GraphConstruction,
             "serial append inside an open region");
      if (bundle.size() != 1)
        fail(ErrorCode::GraphConstruction,
             "serial entries hold exactly one handle");
      break;
    case AppendMode::Scatter:
      if (open_ >= 0)
        fail(ErrorCode::GraphConstruction, "regions do not nest");
      if (bundle.size() < 2)
        fail(ErrorCode::GraphConstruction,
             "scatter needs one handle per lane, at least two");
      break;
    case AppendMode::Parallel: {
      if (open_ < 0)
        fail(ErrorCode::GraphConstruction,
             "parallel append outside a region");
      size_t lanes = entries_[open_].bundle.size();
      if (bundle.size() != lanes)
        fail(ErrorCode::GraphConstruction,
             "bundle width " + std::to_string(bundle.size()) +
                 " does not match region width " + std::to_string(lanes));
      break;
    }
    case AppendMode::Gather:
      if (open_ < 0)
        fail(ErrorCode::GraphConstruction, "gather without an open region");
      if (bundle.size() != 1)
        fail(ErrorCode::GraphConstruction,
             "gather returns to a single handle");
      if (entries_.back().mode != AppendMode::Parallel)
        fail(ErrorCode::GraphConstruction,
             "gather must follow a parallel entry");
      break;
  }

  for (Tensor* t : bundle) {
    if (!t) fail(ErrorCode::GraphConstruction, "null handle");
    if (t->entry != -1)
      fail(ErrorCode::GraphConstruction,
           "tensor '" + t->name + "' already scheduled");
    for (Tensor* s : t->src) {
      if (!s) continue;
      if (s->op != OpKind::None && s->entry == -1)
        fail(ErrorCode::GraphConstruction,
             "source '" + s->name + "' of '" + t->name +
                 "' is not scheduled");
    }
  }
  for (Tensor* t : bundle) t->entry = idx;

  if (!entries_.empty()) entries_.back().successor = idx;
  entries_.push_back({std::move(bundle), -1, mode});

  if (mode == AppendMode::Scatter) open_ = idx;
  if (mode == AppendMode::Gather) {
    regions_.push_back({open_, idx});
    open_ = -1;
  }
  return idx;
}

const ExecList::RegionSpan* ExecList::region_of(int32_t idx) const {
  for (const RegionSpan& r : regions_)
    if (idx >= r.open && idx <= r.close) return &r;
  return nullptr;
}

void ExecList::verify() const {
  if (open_ >= 0)
    fail(ErrorCode::GraphConstruction, "unclosed region");
  for (size_t i = 0; i < entries_.size(); i++) {
    const Entry& e = entries_[i];
    int32_t want = i + 1 < entries_.size() ? static_cast<int32_t>(i + 1) : -1;
    if (e.successor != want)
      fail(ErrorCode::GraphConstruction, "broken successor chain");
    for (Tensor* t : e.bundle) {
      if (t->entry != static_cast<int32_t>(i))
        fail(ErrorCode::GraphConstruction,
             "tensor '" + t->name + "' does not point at its entry");
      for (Tensor* s : t->src) {
        if (!s) continue;
        if (s->uid >= t->uid)
          fail(ErrorCode::GraphConstruction,
               "source '" + s->name + "' created after '" + t->name + "'");
        if (s->op != OpKind::None &&
            (s->entry < 0 || s->entry >= static_cast<int32_t>(i)))
          fail(ErrorCode::GraphConstruction,
               "source '" + s->name + "' scheduled after '" + t->name + "'");
      }
    }
  }
}

void KVCache::set(int64_t position, std::span<const float> k_row,
                  std::span<const float> v_row) {
  size_t row = static_cast<size_t>(kv_heads_) * head_dim_;
  if (k_row.size() != row || v_row.size() != row)
    fail(ErrorCode::ShapeMismatch, "cache row size mismatch");
  if (position >= capacity_)
    fail(ErrorCode::CacheCapacity,
         "position " + std::to_string(position) + " beyond capacity " +
             std::to_string(capacity_));
  if (position != length_)
    fail(ErrorCode::CacheOrder,
         "position " + std::to_string(position) + " but cache holds " +
             std::to_string(length_) + " rows");
  std::memcpy(k_->f32() + position * row, k_row.data(), row * sizeof(float));
  std::memcpy(v_->f32() + position * row, v_row.data(), row * sizeof(float));
  length_++;
}

std::pair<Tensor, Tensor> KVCache::get() const {
  if (length_ == 0) fail(ErrorCode::InvalidView, "cache is empty");
  return {make_view(*k_, 0, length_, k_->name + ".win"),
          make_view(*v_, 0, length_, v_->name + ".win")};
}

Tensor* Graph::find(std::string_view name) {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

KVCache& Graph::cache(int layer, int lane) {
  if (layer < 0 || static_cast<size_t>(layer) >= caches_.size() || lane < 0 ||
      static_cast<size_t>(lane) >= caches_[layer].size() ||
      !caches_[layer][lane])
    fail(ErrorCode::InvalidConfig, "no cache for layer " +
                                       std::to_string(layer) + " lane " +
                                       std::to_string(lane));
  return *caches_[layer][lane];
}

void Graph::reset_caches() {
  for (auto& row : caches_)
    for (auto& c : row)
      if (c) c->reset();
  position = 0;
}

GraphBuilder::GraphBuilder(MemoryPool& pool, ModelConfig config,
                           std::vector<int> lane_nodes)
    : graph_(new Graph()), lane_nodes_(std::move(lane_nodes)) {
  config.validate();
  if (lane_nodes_.empty()) lane_nodes_.push_back(0);
  for (int n : lane_nodes_)
    if (n < 0 || n >= pool.node_count())
      fail(ErrorCode::InvalidConfig, "lane node outside pool layout");
  graph_->config_ = config;
  graph_->pool_ = &pool;
  graph_->lane_nodes_ = lane_nodes_;
  graph_->caches_.resize(config.n_layers);
  for (auto& row : graph_->caches_)
    row.resize(lane_nodes_.size());
}

void GraphBuilder::begin_layer(int layer) {
  if (layer < layer_)
    fail(ErrorCode::GraphConstruction, "layers must not decrease");
  layer_ = layer;
}

Tensor* GraphBuilder::fresh(std::string name, Shape shape, DType dt,
                            OpKind op, int node, Alloc alloc) {
  if (finished_) fail(ErrorCode::GraphConstruction, "builder is finished");
  if (name.empty()) fail(ErrorCode::GraphConstruction, "empty tensor name");
  if (graph_->by_name_.count(name))
    fail(ErrorCode::GraphConstruction, "duplicate tensor '" + name + "'");

  graph_->tensors_.emplace_back();
  Tensor* t = &graph_->tensors_.back();
  t->name = std::move(name);
  t->shape = shape;
  t->dtype = dt;
  t->op = op;
  t->node_assignment = node;
  t->uid = next_uid_++;
  if (alloc != Alloc::None) {
    size_t bytes = byte_size(shape, dt);
    t->region = alloc == Alloc::Weight
                    ? graph_->pool_->alloc_weight(node, bytes)
                    : graph_->pool_->alloc_activation(node, layer_, bytes);
    t->data = graph_->pool_->data(t->region);
  }
  graph_->by_name_[t->name] = t;
  return t;
}

Tensor* GraphBuilder::weight(std::string name, Shape shape, DType dt,
                             int node) {
  return fresh(std::move(name), shape, dt, OpKind::None, node,
               Alloc::Weight);
}

Tensor* GraphBuilder::activation(std::string name, Shape shape, int node) {
  return fresh(std::move(name), shape, DType::F32, OpKind::None, node,
               Alloc::Activation);
}

Tensor* GraphBuilder::view_of(Tensor* src, int64_t begin, int64_t end,
                              std::string name) {
  Tensor v = make_view(*src, begin, end, name);
  Tensor* t = fresh(std::move(v.name), v.shape, v.dtype, OpKind::None,
                    v.node_assignment, Alloc::None);
  t->region = v.region;
  t->data = v.data;
  t->lane = v.lane;
  return t;
}

void GraphBuilder::append_serial(Tensor* t) {
  graph_->exec_.append(TensorBundle(t), AppendMode::Serial);
}

void GraphBuilder::append_parallel(TensorBundle b) {
  graph_->exec_.append(std::move(b), AppendMode::Parallel);
}

Tensor* GraphBuilder::lane_node_tensor(std::string name, Shape shape,
                                       OpKind op, int lane) {
  Tensor* t = fresh(std::move(name), shape, DType::F32, op,
                    lane < 0 ? serial_node() : lane_nodes_[lane],
                    Alloc::Activation);
  t->lane = lane;
  return t;
}

Tensor* GraphBuilder::embed_node(Tensor* table, std::string name) {
  if (table->shape.rank != 2)
    fail(ErrorCode::ShapeMismatch, "embedding table must be rank 2");
  Tensor* t = lane_node_tensor(std::move(name),
                               Shape::vec(table->shape.cols()), OpKind::Embed,
                               -1);
  t->src[0] = table;
  append_serial(t);
  return t;
}

namespace {

void check_matmul(const Tensor* w, const Tensor* x) {
  if (w->shape.rank != 2 || x->shape.rank != 1)
    fail(ErrorCode::ShapeMismatch,
         "matmul needs [M,K] weight and [K] input, got '" + w->name + "' " +
             w->shape.str() + " x '" + x->name + "' " + x->shape.str());
  if (w->shape.cols() != x->shape.count())
    fail(ErrorCode::ShapeMismatch,
         "matmul K mismatch: '" + w->name + "' " + w->shape.str() + " x '" +
             x->name + "' " + x->shape.str());
}

}  // namespace

Tensor* GraphBuilder::matmul_node(Tensor* w, Tensor* x, std::string name) {
  check_matmul(w, x);
  Tensor* t = lane_node_tensor(std::move(name), Shape::vec(w->shape.rows()),
                               OpKind::MatMul, -1);
  t->src[0] = x;
  t->src[1] = w;
  append_serial(t);
  return t;
}

Tensor* GraphBuilder::rmsnorm_node(Tensor* x, Tensor* gamma, float eps,
                                   std::string name) {
  if (gamma && gamma->shape.count() != x->shape.count())
    fail(ErrorCode::ShapeMismatch, "rmsnorm gamma size mismatch");
  Tensor* t = lane_node_tensor(std::move(name), x->shape, OpKind::RMSNorm,
                               -1);
  t->src[0] = x;
  t->src[1] = gamma;
  t->aux[kAuxEps] = eps;
  append_serial(t);
  return t;
}

namespace {

void check_same_shape(const Tensor* a, const Tensor* b, const char* what) {
  if (!(a->shape == b->shape))
    fail(ErrorCode::ShapeMismatch,
         std::string(what) + ": " + a->shape.str() + " vs " + b->shape.str());
}

}  // namespace

Tensor* GraphBuilder::add_node(Tensor* a, Tensor* b, std::string name) {
  check_same_shape(a, b, "add");
  Tensor* t = lane_node_tensor(std::move(name), a->shape, OpKind::Add, -1);
  t->src[0] = a;
  t->src[1] = b;
  append_serial(t);
  return t;
}

Tensor* GraphBuilder::mul_node(Tensor* a, Tensor* b, std::string name) {
  check_same_shape(a, b, "mul");
  Tensor* t = lane_node_tensor(std::move(name), a->shape, OpKind::Mul, -1);
  t->src[0] = a;
  t->src[1] = b;
  append_serial(t);
  return t;
}

Tensor* GraphBuilder::silu_node(Tensor* x, std::string name) {
  Tensor* t = lane_node_tensor(std::move(name), x->shape, OpKind::SiLU, -1);
  t->src[0] = x;
  append_serial(t);
  return t;
}

Tensor* GraphBuilder::softmax_node(Tensor* x, std::string name) {
  Tensor* t = lane_node_tensor(std::move(name), x->shape, OpKind::Softmax,
                               -1);
  t->src[0] = x;
  append_serial(t);
  return t;
}

TensorBundle GraphBuilder::linear(const TensorBundle& w,
                                  const TensorBundle& x, std::string name) {
  if (w.size() != x.size())
    fail(ErrorCode::GraphConstruction, "linear bundle width mismatch");
  if (w.size() == 1) return TensorBundle(matmul_node(w[0], x[0], name));

  TensorBundle out;
  for (size_t l = 0; l < w.size(); l++) {
    check_matmul(w[l], x[l]);
    Tensor* t = lane_node_tensor(name + ".l" + std::to_string(l),
                                 Shape::vec(w[l]->shape.rows()),
                                 OpKind::MatMul, static_cast<int>(l));
    t->src[0] = x[l];
    t->src[1] = w[l];
    out.push_back(t);
  }
  append_parallel(out);
  return out;
}

TensorBundle GraphBuilder::scatter(Tensor* x, std::string stem) {
  if (lanes() < 2)
    fail(ErrorCode::GraphConstruction, "scatter needs at least two lanes");
  TensorBundle replicas;
  for (int l = 0; l < lanes(); l++) {
    Tensor* t = lane_node_tensor(stem + ".l" + std::to_string(l), x->shape,
                                 OpKind::Scatter, l);
    t->src[0] = x;
    replicas.push_back(t);
  }
  graph_->exec_.append(replicas, AppendMode::Scatter);
  return replicas;
}

Tensor* GraphBuilder::gather(const TensorBundle& parts, std::string name) {
  const ExecList& e = graph_->exec_;
  if (e.size() == 0 || e[e.size() - 1].mode != AppendMode::Parallel)
    fail(ErrorCode::GraphConstruction, "gather must follow a parallel entry");
  const TensorBundle& prev = e[e.size() - 1].bundle;
  if (prev.size() != parts.size())
    fail(ErrorCode::GraphConstruction, "gather width mismatch");
  for (size_t l = 0; l < parts.size(); l++) {
    if (prev[l] != parts[l])
      fail(ErrorCode::GraphConstruction,
           "gather must consume the preceding parallel entry");
    check_same_shape(parts[l], parts[0], "gather");
  }
  // The full lane list is recovered from the preceding entry at execution
  // time; src[0] records a representative for the topology scan.
  Tensor* t = lane_node_tensor(std::move(name), parts[0]->shape,
                               OpKind::Gather, -1);
  t->src[0] = parts[0];
  graph_->exec_.append(TensorBundle(t), AppendMode::Gather);
  return t;
}

Tensor* GraphBuilder::attention_block(Tensor* x, const LayerHandles& w,
                                      int layer) {
  const ModelConfig& cfg = graph_->config_;
  int n = lanes();
  std::string blk = "blk" + std::to_string(layer);
  size_t width = n > 1 ? static_cast<size_t>(n) : 1;
  if (w.wq.size() != width || w.wk.size() != width || w.wv.size() != width ||
      w.wo.size() != width || w.attn_norm.size() != width)
    fail(ErrorCode::GraphConstruction, "attention weight bundle width");

  auto lane_suffix = [&](const char* stem, int l) {
    return n > 1 ? blk + ".attn." + stem + ".l" + std::to_string(l)
                 : blk + ".attn." + stem;
  };

  // Per-lane cache tensors live in the lane node's weight arena.
  for (int l = 0; l < (n > 1 ? n : 1); l++) {
    int kvh = static_cast<int>(w.wk[l]->shape.rows()) / cfg.head_dim;
    int node = n > 1 ? lane_nodes_[l] : serial_node();
    Tensor* ck = weight("cache." + std::to_string(layer) + ".k" +
                            (n > 1 ? ".l" + std::to_string(l) : ""),
                        Shape::make({cfg.max_seq, kvh, cfg.head_dim}),
                        DType::F32, node);
    Tensor* cv = weight("cache." + std::to_string(layer) + ".v" +
                            (n > 1 ? ".l" + std::to_string(l) : ""),
                        Shape::make({cfg.max_seq, kvh, cfg.head_dim}),
                        DType::F32, node);
    ck->lane = cv->lane = n > 1 ? l : -1;
    graph_->caches_[layer][l] = std::make_unique<KVCache>(
        ck, cv, cfg.max_seq, kvh, cfg.head_dim);
  }

  auto rope_of = [&](TensorBundle in, const char* stem) {
    TensorBundle out;
    for (size_t l = 0; l < in.size(); l++) {
      int heads = static_cast<int>(in[l]->shape.count()) / cfg.head_dim;
      Tensor* t = lane_node_tensor(lane_suffix(stem, static_cast<int>(l)),
                                   in[l]->shape, OpKind::RoPE,
                                   n > 1 ? static_cast<int>(l) : -1);
      t->src[0] = in[l];
      t->aux[kAuxHeads] = static_cast<float>(heads);
      t->aux[kAuxHeadDim] = static_cast<float>(cfg.head_dim);
      t->aux[kAuxTheta] = cfg.rope_theta;
      out.push_back(t);
    }
    if (n > 1)
      append_parallel(out);
    else
      append_serial(out.single());
    return out;
  };

  auto attn_of = [&](const TensorBundle& q, const TensorBundle& commit) {
    TensorBundle out;
    for (size_t l = 0; l < q.size(); l++) {
      int lane = n > 1 ? static_cast<int>(l) : 0;
      const KVCache& c = graph_->cache(layer, lane);
      Tensor* t = lane_node_tensor(lane_suffix("ctx", static_cast<int>(l)),
                                   q[l]->shape, OpKind::Attention,
                                   n > 1 ? static_cast<int>(l) : -1);
      t->src[0] = q[l];
      t->src[1] = commit[l];
      t->aux[kAuxHeads] =
          static_cast<float>(q[l]->shape.count() / cfg.head_dim);
      t->aux[kAuxKvHeads] = static_cast<float>(c.kv_heads());
      t->aux[kAuxHeadDim] = static_cast<float>(cfg.head_dim);
      t->aux[kAuxLayer] = static_cast<float>(layer);
      t->aux[kAuxLane] = static_cast<float>(lane);
      out.push_back(t);
    }
    if (n > 1)
      append_parallel(out);
    else
      append_serial(out.single());
    return out;
  };

  auto commit_of = [&](const TensorBundle& k, const TensorBundle& v) {
    TensorBundle out;
    for (size_t l = 0; l < k.size(); l++) {
      Tensor* t = lane_node_tensor(lane_suffix("kv", static_cast<int>(l)),
                                   Shape::vec(1), OpKind::Copy,
                                   n > 1 ? static_cast<int>(l) : -1);
      t->src[0] = k[l];
      t->src[1] = v[l];
      t->aux[kAuxLayer] = static_cast<float>(layer);
      t->aux[kAuxLane] = static_cast<float>(n > 1 ? l : 0);
      out.push_back(t);
    }
    if (n > 1)
      append_parallel(out);
    else
      append_serial(out.single());
    return out;
  };

  auto norm_of = [&](const TensorBundle& xs) {
    TensorBundle out;
    for (size_t l = 0; l < xs.size(); l++) {
      Tensor* t = lane_node_tensor(lane_suffix("norm", static_cast<int>(l)),
                                   xs[l]->shape, OpKind::RMSNorm,
                                   n > 1 ? static_cast<int>(l) : -1);
      t->src[0] = xs[l];
      t->src[1] = w.attn_norm[l];
      t->aux[kAuxEps] = cfg.rms_eps;
      out.push_back(t);
    }
    if (n > 1)
      append_parallel(out);
    else
      append_serial(out.single());
    return out;
  };

  if (n > 1) {
    TensorBundle xr = scatter(x, blk + ".attn.in");
    TensorBundle nrm = norm_of(xr);
    TensorBundle q = linear(w.wq, nrm, blk + ".attn.q");
    TensorBundle k = linear(w.wk, nrm, blk + ".attn.k");
    TensorBundle v = linear(w.wv, nrm, blk + ".attn.v");
    TensorBundle qr = rope_of(q, "q_rot");
    TensorBundle kr = rope_of(k, "k_rot");
    TensorBundle commit = commit_of(kr, v);
    TensorBundle att = attn_of(qr, commit);
    TensorBundle o = linear(w.wo, att, blk + ".attn.o");
    Tensor* g = gather(o, blk + ".attn.out");
    return add_node(x, g, blk + ".attn.res");
  }

  TensorBundle nrm = norm_of(TensorBundle(x));
  TensorBundle q = linear(w.wq, nrm, blk + ".attn.q");
  TensorBundle k = linear(w.wk, nrm, blk + ".attn.k");
  TensorBundle v = linear(w.wv, nrm, blk + ".attn.v");
  TensorBundle qr = rope_of(q, "q_rot");
  TensorBundle kr = rope_of(k, "k_rot");
  TensorBundle commit = commit_of(kr, v);
  TensorBundle att = attn_of(qr, commit);
  TensorBundle o = linear(w.wo, att, blk + ".attn.o");
  return add_node(x, o.single(), blk + ".attn.res");
}

Tensor* GraphBuilder::mlp_block(Tensor* x, const LayerHandles& w, int layer) {
  int n = lanes();
  std::string blk = "blk" + std::to_string(layer);
  size_t width = n > 1 ? static_cast<size_t>(n) : 1;
  if (w.w_gate.size() != width || w.w_up.size() != width ||
      w.w_down.size() != width || w.mlp_norm.size() != width)
    fail(ErrorCode::GraphConstruction, "mlp weight bundle width");

  auto build = [&](const TensorBundle& xs) -> TensorBundle {
    TensorBundle nrm;
    for (size_t l = 0; l < xs.size(); l++) {
      Tensor* t = lane_node_tensor(
          n > 1 ? blk + ".mlp.norm.l" + std::to_string(l) : blk + ".mlp.norm",
          xs[l]->shape, OpKind::RMSNorm, n > 1 ? static_cast<int>(l) : -1);
      t->src[0] = xs[l];
      t->src[1] = w.mlp_norm[l];
      t->aux[kAuxEps] = graph_->config_.rms_eps;
      nrm.push_back(t);
    }
    if (n > 1)
      append_parallel(nrm);
    else
      append_serial(nrm.single());

    TensorBundle gate = linear(w.w_gate, nrm, blk + ".mlp.gate");
    TensorBundle up = linear(w.w_up, nrm, blk + ".mlp.up");

    TensorBundle act;
    for (size_t l = 0; l < gate.size(); l++) {
      Tensor* t = lane_node_tensor(
          n > 1 ? blk + ".mlp.act.l" + std::to_string(l) : blk + ".mlp.act",
          gate[l]->shape, OpKind::SiLU, n > 1 ? static_cast<int>(l) : -1);
      t->src[0] = gate[l];
      act.push_back(t);
    }
    if (n > 1)
      append_parallel(act);
    else
      append_serial(act.single());

    TensorBundle prod;
    for (size_t l = 0; l < act.size(); l++) {
      check_same_shape(act[l], up[l], "mlp mul");
      Tensor* t = lane_node_tensor(
          n > 1 ? blk + ".mlp.prod.l" + std::to_string(l) : blk + ".mlp.prod",
          act[l]->shape, OpKind::Mul, n > 1 ? static_cast<int>(l) : -1);
      t->src[0] = act[l];
      t->src[1] = up[l];
      prod.push_back(t);
    }
    if (n > 1)
      append_parallel(prod);
    else
      append_serial(prod.single());

    return linear(w.w_down, prod, blk + ".mlp.down");
  };

  if (n > 1) {
    TensorBundle xr = scatter(x, blk + ".mlp.in");
    TensorBundle down = build(xr);
    Tensor* g = gather(down, blk + ".mlp.out");
    return add_node(x, g, blk + ".mlp.res");
  }
  TensorBundle down = build(TensorBundle(x));
  return add_node(x, down.single(), blk + ".mlp.res");
}

Tensor* GraphBuilder::build_decoder(const DecoderHandles& w) {
  const ModelConfig& cfg = graph_->config_;
  if (static_cast<int32_t>(w.layers.size()) != cfg.n_layers)
    fail(ErrorCode::GraphConstruction, "layer handle count mismatch");
  if (!w.embed || !w.final_norm || !w.lm_head)
    fail(ErrorCode::GraphConstruction, "missing decoder weights");

  begin_layer(0);
  Tensor* x = embed_node(w.embed, "model.embed_out");
  for (int32_t layer = 0; layer < cfg.n_layers; layer++) {
    begin_layer(layer);
    x = attention_block(x, w.layers[layer], layer);
    x = mlp_block(x, w.layers[layer], layer);
  }
  begin_layer(cfg.n_layers);
  Tensor* fin = rmsnorm_node(x, w.final_norm, cfg.rms_eps, "model.norm_out");
  Tensor* logits = matmul_node(w.lm_head, fin, "model.logits");
  graph_->logits_ = logits;
  return logits;
}

std::unique_ptr<Graph> GraphBuilder::finish() {
  if (finished_) fail(ErrorCode::GraphConstruction, "already finished");
  graph_->exec_.verify();
  finished_ = true;
  return std::move(graph_);
}

}  // namespace arclite
