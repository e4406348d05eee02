#include "arclite/memory.hpp"

#include <string>

#include "arclite/numa.hpp"

#ifdef __linux__
#include <sys/mman.h>
#include <unistd.h>
#endif

namespace arclite {

const char* numa_mode_name(NumaMode m) {
  return m == NumaMode::Real ? "real" : "emulated";
}

NodeLayout NodeLayout::emulated(int nodes) {
  if (nodes < 1 || nodes > 64)
    fail(ErrorCode::InvalidConfig, "node count must be 1..64");
  NodeLayout l;
  l.mode = NumaMode::Emulated;
  l.node_count = nodes;
  return l;
}

NodeLayout NodeLayout::real(int nodes) {
  if (nodes < 1 || nodes > 64)
    fail(ErrorCode::InvalidConfig, "node count must be 1..64");
  int present = numa::detect_node_count();
  if (present < nodes)
    fail(ErrorCode::NumaUnavailable,
         "machine has " + std::to_string(present) + " node(s), need " +
             std::to_string(nodes));
  if (!numa::binding_available())
    fail(ErrorCode::NumaUnavailable, "mbind not usable on this system");
  NodeLayout l;
  l.mode = NumaMode::Real;
  l.node_count = nodes;
  l.node_cores.resize(nodes);
  for (int n = 0; n < nodes; n++) {
    l.node_cores[n] = numa::node_cpus(n);
    if (l.node_cores[n].empty())
      fail(ErrorCode::NumaUnavailable,
           "node " + std::to_string(n) + " has no cpus");
  }
  return l;
}

namespace {

size_t round_up(size_t v, size_t a) { return (v + a - 1) / a * a; }

std::byte* map_slab(size_t bytes) {
#ifdef __linux__
  void* p = mmap(nullptr, bytes, PROT_READ | PROT_WRITE,
                 MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (p == MAP_FAILED) return nullptr;
  return static_cast<std::byte*>(p);
#else
  return static_cast<std::byte*>(::operator new(bytes, std::nothrow));
#endif
}

void unmap_slab(std::byte* p, size_t bytes) {
#ifdef __linux__
  if (p) munmap(p, bytes);
#else
  ::operator delete(p);
  (void)bytes;
#endif
}

size_t page_size() {
#ifdef __linux__
  return static_cast<size_t>(sysconf(_SC_PAGESIZE));
#else
  return 4096;
#endif
}

}  // namespace

MemoryPool::MemoryPool(const NodeLayout& layout, size_t weight_bytes_per_node,
                       size_t activation_bytes_per_node, size_t alignment)
    : layout_(layout), alignment_(alignment) {
  if (alignment_ == 0 || (alignment_ & (alignment_ - 1)))
    fail(ErrorCode::InvalidConfig, "alignment must be a power of two");
  if (weight_bytes_per_node == 0 || activation_bytes_per_node == 0)
    fail(ErrorCode::InvalidConfig, "arena sizes must be positive");

  size_t page = page_size();
  arenas_.resize(static_cast<size_t>(layout_.node_count) * 3);
  for (int n = 0; n < layout_.node_count; n++) {
    for (int k = 0; k < 3; k++) {
      Arena& a = arenas_[static_cast<size_t>(n) * 3 + k];
      a.capacity = k == 0 ? weight_bytes_per_node : activation_bytes_per_node;
      a.mapped = round_up(a.capacity, page);
      a.node = n;
      a.parity = k == 0 ? -1 : k - 1;
      a.base = map_slab(a.mapped);
      if (!a.base) fail(ErrorCode::OutOfMemory, "arena mapping failed");
      if (layout_.mode == NumaMode::Real &&
          !numa::bind_region(a.base, a.mapped, n))
        fail(ErrorCode::NumaUnavailable,
             "mbind to node " + std::to_string(n) + " failed");
    }
  }
}

MemoryPool::~MemoryPool() {
  for (Arena& a : arenas_) unmap_slab(a.base, a.mapped);
}

int MemoryPool::arena_id(int node, ArenaKind kind, int parity) const {
  if (node < 0 || node >= layout_.node_count)
    fail(ErrorCode::InvalidConfig, "node " + std::to_string(node) +
                                       " outside layout of " +
                                       std::to_string(layout_.node_count));
  return node * 3 + (kind == ArenaKind::Weight ? 0 : 1 + parity);
}

Region MemoryPool::bump(Arena& a, int id, size_t bytes) {
  size_t take = round_up(bytes, alignment_);
  if (a.cursor + take > a.capacity)
    fail(ErrorCode::OutOfMemory,
         (a.parity < 0 ? "weight" : "activation") + std::string(" arena on node ") +
             std::to_string(a.node) + " exhausted: " + std::to_string(a.cursor) +
             "+" + std::to_string(take) + " > " + std::to_string(a.capacity) +
             " (arena " + std::to_string(id) + ")");
  Region r;
  r.arena = id;
  r.node = a.node;
  r.offset = a.cursor;
  r.length = bytes;
  a.cursor += take;
  a.high_water = std::max(a.high_water, a.cursor);
  return r;
}

Region MemoryPool::alloc_weight(int node, size_t bytes) {
  if (bytes == 0) fail(ErrorCode::InvalidConfig, "zero-size allocation");
  int id = arena_id(node, ArenaKind::Weight, -1);
  Region r = bump(arenas_[id], id, bytes);
  log_.push_back({ArenaKind::Weight, node, -1, -1,
                  round_up(bytes, alignment_)});
  return r;
}

Region MemoryPool::alloc_activation(int node, int layer, size_t bytes) {
  if (bytes == 0) fail(ErrorCode::InvalidConfig, "zero-size allocation");
  if (layer < 0) fail(ErrorCode::InvalidConfig, "negative layer");
  int parity = layer & 1;
  int id = arena_id(node, ArenaKind::Activation, parity);
  Arena& a = arenas_[id];
  if (a.last_layer != layer) {
    // A new layer claims this parity arena; the layer two back is dead by
    // the execution schedule, so its bytes are reused from offset zero.
    // Going backward would resurrect a layer on top of live bytes.
    if (layer < a.last_layer)
      fail(ErrorCode::InvalidConfig,
           "activation layer went backward on node " + std::to_string(node));
    a.cursor = 0;
    a.last_layer = layer;
  }
  Region r = bump(a, id, bytes);
  log_.push_back({ArenaKind::Activation, node, parity, layer,
                  round_up(bytes, alignment_)});
  return r;
}

std::byte* MemoryPool::data(const Region& r) {
  if (r.arena < 0 || static_cast<size_t>(r.arena) >= arenas_.size())
    fail(ErrorCode::InvalidConfig, "bad arena id");
  return arenas_[r.arena].base + r.offset;
}

const std::byte* MemoryPool::data(const Region& r) const {
  return const_cast<MemoryPool*>(this)->data(r);
}

MemoryPool::ArenaStats MemoryPool::weight_stats(int node) const {
  const Arena& a = arenas_[arena_id(node, ArenaKind::Weight, -1)];
  return {a.capacity, a.cursor, a.high_water, a.last_layer};
}

MemoryPool::ArenaStats MemoryPool::activation_stats(int node,
                                                    int parity) const {
  if (parity != 0 && parity != 1)
    fail(ErrorCode::InvalidConfig, "parity must be 0 or 1");
  const Arena& a = arenas_[arena_id(node, ArenaKind::Activation, parity)];
  return {a.capacity, a.cursor, a.high_water, a.last_layer};
}

int MemoryPool::backing_node(const Region& r) const {
  const std::byte* p = data(r);
  if (layout_.mode == NumaMode::Real) {
    int n = numa::region_node(p);
    if (n >= 0) return n;
  }
  return r.node;
}

}  // namespace arclite
