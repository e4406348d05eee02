#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "arclite/error.hpp"
#include "arclite/tensor.hpp"

namespace arclite {

enum class NumaMode : uint8_t { Emulated = 0, Real = 1 };

const char* numa_mode_name(NumaMode m);

// Node topology the pool and thread pool place against. Emulated layouts
// invent node_count nodes on ordinary memory; real layouts must match the
// machine and carry each node's CPU list for pinning.
struct NodeLayout {
  NumaMode mode = NumaMode::Emulated;
  int node_count = 1;
  std::vector<std::vector<int>> node_cores;  // real mode only

  static NodeLayout emulated(int nodes);
  // Probes sysfs; throws NumaUnavailable when the machine has fewer nodes
  // than requested or placement syscalls fail.
  static NodeLayout real(int nodes);
};

// Arena-based allocator with explicit placement. Per node: one weight arena
// (weights and kv caches, lives for the model) and two activation arenas
// alternating by layer parity. Activations for layer L come from arena
// L % 2; when a new layer starts allocating from an arena, the cursor
// returns to zero and the bytes of the layer two steps back are reused.
// All allocations are bump-pointer, aligned, and never freed individually.
class MemoryPool {
 public:
  static constexpr size_t kDefaultAlignment = 64;

  enum class ArenaKind : uint8_t { Weight = 0, Activation = 1 };

  struct AllocEvent {
    ArenaKind kind;
    int node;
    int parity;  // -1 for weight allocations
    int layer;   // -1 for weight allocations
    size_t bytes;  // aligned size actually consumed
  };

  struct ArenaStats {
    size_t capacity = 0;
    size_t cursor = 0;
    size_t high_water = 0;
    int last_layer = -1;
  };

  MemoryPool(const NodeLayout& layout, size_t weight_bytes_per_node,
             size_t activation_bytes_per_node,
             size_t alignment = kDefaultAlignment);
  ~MemoryPool();
  MemoryPool(const MemoryPool&) = delete;
  MemoryPool& operator=(const MemoryPool&) = delete;

  Region alloc_weight(int node, size_t bytes);
  Region alloc_activation(int node, int layer, size_t bytes);

  std::byte* data(const Region& r);
  const std::byte* data(const Region& r) const;

  const NodeLayout& layout() const { return layout_; }
  NumaMode mode() const { return layout_.mode; }
  int node_count() const { return layout_.node_count; }
  size_t alignment() const { return alignment_; }

  ArenaStats weight_stats(int node) const;
  ArenaStats activation_stats(int node, int parity) const;
  const std::vector<AllocEvent>& allocation_log() const { return log_; }

  // Node the OS reports backing the region's first page. Real mode only;
  // emulated placement is metadata, so this returns the declared node.
  int backing_node(const Region& r) const;

 private:
  struct Arena {
    std::byte* base = nullptr;
    size_t mapped = 0;  // page-rounded mmap length
    size_t capacity = 0;
    size_t cursor = 0;
    size_t high_water = 0;
    int node = 0;
    int parity = -1;  // -1 for weight arenas
    int last_layer = -1;
  };

  int arena_id(int node, ArenaKind kind, int parity) const;
  Region bump(Arena& a, int id, size_t bytes);

  NodeLayout layout_;
  size_t alignment_;
  std::vector<Arena> arenas_;
  std::vector<AllocEvent> log_;
};

}  // namespace arclite
