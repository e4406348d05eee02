#pragma once

#include <deque>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "arclite/config.hpp"
#include "arclite/memory.hpp"
#include "arclite/tensor.hpp"

namespace arclite {

// Append discipline for the flat execution list. Construction order is
// execution order; Scatter/Gather bracket non-nesting parallel regions, so
// bundle sizes along the list follow 1..1, n..n, 1..1.
enum class AppendMode : uint8_t { Serial, Scatter, Parallel, Gather };

const char* append_mode_name(AppendMode m);

class ExecList {
 public:
  struct Entry {
    TensorBundle bundle;
    int32_t successor = -1;  // next entry, -1 at the tail
    AppendMode mode = AppendMode::Serial;
  };

  struct RegionSpan {
    int32_t open = -1;   // Scatter entry
    int32_t close = -1;  // Gather entry
  };

  // Appends one entry and links the predecessor's successor. Mode rules:
  // Serial needs bundle size 1 outside any region; Scatter opens a region
  // with one handle per lane; Parallel needs an open region and the same
  // bundle size as its Scatter; Gather closes the region back to size 1 and
  // must follow at least one Parallel entry. Throws GraphConstruction.
  int32_t append(TensorBundle bundle, AppendMode mode);

  size_t size() const { return entries_.size(); }
  const Entry& operator[](size_t i) const { return entries_[i]; }
  const std::vector<RegionSpan>& regions() const { return regions_; }
  bool region_open() const { return open_ >= 0; }
  // Region the entry belongs to, or null for serial territory. Scatter and
  // Gather entries are boundaries and count as inside.
  const RegionSpan* region_of(int32_t idx) const;

  // Full structural scan: every source was created and scheduled before its
  // consumer and each entry's tensors point back at it.
  void verify() const;

 private:
  std::vector<Entry> entries_;
  std::vector<RegionSpan> regions_;
  int32_t open_ = -1;
};

// Per-layer, per-lane key/value store backed by two [capacity, kv_heads,
// head_dim] tensors in the owning node's weight arena. Rows are append-only
// and strictly ordered.
class KVCache {
 public:
  KVCache(Tensor* k, Tensor* v, int64_t capacity, int kv_heads, int head_dim)
      : k_(k), v_(v), capacity_(capacity), kv_heads_(kv_heads),
        head_dim_(head_dim) {}

  int64_t length() const { return length_; }
  int64_t capacity() const { return capacity_; }
  int kv_heads() const { return kv_heads_; }
  int head_dim() const { return head_dim_; }
  Tensor* key() const { return k_; }
  Tensor* value() const { return v_; }

  // Writes row `position`. Positions must arrive as 0,1,2,...; anything else
  // is a CacheOrder error, and position >= capacity is CacheCapacity.
  void set(int64_t position, std::span<const float> k_row,
           std::span<const float> v_row);

  // Views over rows [0, length). Aliases, not copies.
  std::pair<Tensor, Tensor> get() const;

  void reset() { length_ = 0; }

 private:
  Tensor* k_;
  Tensor* v_;
  int64_t capacity_;
  int kv_heads_;
  int head_dim_;
  int64_t length_ = 0;
};

// A built decoder graph: tensors, execution list, caches, and the runtime
// step inputs. Tensor storage is a deque so handles stay stable.
class Graph {
 public:
  const ExecList& exec() const { return exec_; }
  const ModelConfig& config() const { return config_; }
  MemoryPool& pool() { return *pool_; }
  int lanes() const { return static_cast<int>(lane_nodes_.size()); }
  const std::vector<int>& lane_nodes() const { return lane_nodes_; }

  Tensor* find(std::string_view name);
  KVCache& cache(int layer, int lane);
  Tensor* logits() { return logits_; }

  void reset_caches();

  // Step inputs read by the Embed and Copy executors.
  int32_t token = 0;
  int64_t position = 0;

 private:
  friend class GraphBuilder;
  ModelConfig config_;
  MemoryPool* pool_ = nullptr;
  std::vector<int> lane_nodes_;
  std::deque<Tensor> tensors_;
  std::unordered_map<std::string, Tensor*> by_name_;
  ExecList exec_;
  std::vector<std::vector<std::unique_ptr<KVCache>>> caches_;  // [layer][lane]
  Tensor* logits_ = nullptr;
};

// Weight handles for one decoder layer, one handle per lane for partitioned
// matrices (wq/wk/wv by heads, w_gate/w_up by rows, wo/w_down by columns)
// and one replica per lane for the norms.
struct LayerHandles {
  TensorBundle attn_norm, wq, wk, wv, wo;
  TensorBundle mlp_norm, w_gate, w_up, w_down;
};

struct DecoderHandles {
  Tensor* embed = nullptr;
  std::vector<LayerHandles> layers;
  Tensor* final_norm = nullptr;
  Tensor* lm_head = nullptr;
};

// Builds a Graph. Leaf tensors (weights) are allocated in weight arenas and
// filled by the caller; node tensors get activation regions in the
// parity arena of the current layer. Names must be unique.
class GraphBuilder {
 public:
  GraphBuilder(MemoryPool& pool, ModelConfig config,
               std::vector<int> lane_nodes);

  int lanes() const { return static_cast<int>(lane_nodes_.size()); }

  // Subsequent activations are charged to this layer's parity arena.
  // Layers must not decrease.
  void begin_layer(int layer);
  int current_layer() const { return layer_; }

  Tensor* weight(std::string name, Shape shape, DType dt, int node);
  Tensor* activation(std::string name, Shape shape, int node);
  // Registered alias of rows [begin, end) of src.
  Tensor* view_of(Tensor* src, int64_t begin, int64_t end, std::string name);

  // Serial nodes (outside regions).
  Tensor* embed_node(Tensor* table, std::string name);
  Tensor* matmul_node(Tensor* w, Tensor* x, std::string name);
  Tensor* rmsnorm_node(Tensor* x, Tensor* gamma, float eps, std::string name);
  Tensor* add_node(Tensor* a, Tensor* b, std::string name);
  Tensor* mul_node(Tensor* a, Tensor* b, std::string name);
  Tensor* silu_node(Tensor* x, std::string name);
  Tensor* softmax_node(Tensor* x, std::string name);

  // One MatMul entry, serial or lane-parallel by bundle width.
  TensorBundle linear(const TensorBundle& w, const TensorBundle& x,
                      std::string name);

  // Parallel region plumbing. scatter opens the region by replicating x
  // onto every lane node; gather sums the per-lane tensors of the previous
  // entry back onto serial_node and closes the region.
  TensorBundle scatter(Tensor* x, std::string stem);
  Tensor* gather(const TensorBundle& parts, std::string name);

  // Decoder blocks. With one lane everything is serial; otherwise each
  // block is exactly one scatter/region/gather plus the residual add.
  Tensor* attention_block(Tensor* x, const LayerHandles& w, int layer);
  Tensor* mlp_block(Tensor* x, const LayerHandles& w, int layer);

  // embed -> layers -> final rmsnorm -> lm_head logits.
  Tensor* build_decoder(const DecoderHandles& w);

  std::unique_ptr<Graph> finish();

 private:
  enum class Alloc { Weight, Activation, None };
  Tensor* fresh(std::string name, Shape shape, DType dt, OpKind op, int node,
                Alloc alloc);
  Tensor* lane_node_tensor(std::string name, Shape shape, OpKind op,
                           int lane);
  void append_serial(Tensor* t);
  void append_parallel(TensorBundle b);
  int serial_node() const { return lane_nodes_[0]; }

  std::unique_ptr<Graph> graph_;
  std::vector<int> lane_nodes_;
  int layer_ = 0;
  uint32_t next_uid_ = 0;
  bool finished_ = false;
};

}  // namespace arclite
