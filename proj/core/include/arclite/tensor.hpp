#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "arclite/error.hpp"

namespace arclite {

enum class DType : uint8_t { F32 = 0, F16 = 1, Q4B = 2 };

// Q4B: 32 4-bit values per block, each block is a 16-bit scale followed by
// 16 packed bytes. Element i sits in the low nibble of byte i for i < 16 and
// in the high nibble of byte i-16 otherwise.
inline constexpr int64_t kQ4BBlock = 32;
inline constexpr int64_t kQ4BBlockBytes = 18;

const char* dtype_name(DType dt);
size_t dtype_element_size(DType dt);  // Q4B has no per-element size; throws

// Shape stores extents innermost-first: extent[0] is the contiguous axis.
// Factory and printing use the conventional outermost-first order, so
// Shape::make({8, 4}) is 8 rows of 4 contiguous elements.
struct Shape {
  int rank = 0;
  std::array<int64_t, 4> extent{1, 1, 1, 1};

  static Shape make(std::initializer_list<int64_t> outer_to_inner);
  static Shape vec(int64_t n) { return make({n}); }
  static Shape mat(int64_t rows, int64_t cols) { return make({rows, cols}); }

  int64_t count() const;
  int64_t inner() const { return extent[0]; }
  // Extent of the outermost axis (the one make_view slices).
  int64_t outer() const { return rank == 0 ? 1 : extent[rank - 1]; }
  // Matrix accessors; require rank 2.
  int64_t rows() const;
  int64_t cols() const;

  bool operator==(const Shape& o) const;
  std::string str() const;
};

size_t byte_size(const Shape& shape, DType dt);

enum class OpKind : uint8_t {
  None,  // leaf: weight, input, or view
  MatMul,
  RMSNorm,
  RoPE,
  Attention,
  SiLU,
  Mul,
  Add,
  Copy,
  Reshape,
  Softmax,
  Scatter,
  Gather,
  Embed,
};

const char* op_name(OpKind op);

// Data placement handle. arena/node identify the owning pool slab; offset and
// length are the byte range inside it. A resolved base pointer is cached on
// the tensor so kernels never consult the pool on the hot path.
struct Region {
  int32_t arena = -1;
  int32_t node = -1;
  uint64_t offset = 0;
  uint64_t length = 0;
};

// Aux parameter slots, fixed at 8 per tensor. Integer parameters (head
// counts, layer ids) are small and stored exactly as floats.
inline constexpr int kAuxSlots = 8;
inline constexpr int kAuxHeads = 0;     // Attention/RoPE: query heads in this tensor
inline constexpr int kAuxKvHeads = 1;   // Attention: kv heads in this tensor
inline constexpr int kAuxHeadDim = 2;   // Attention/RoPE
inline constexpr int kAuxTheta = 3;     // RoPE base
inline constexpr int kAuxEps = 0;       // RMSNorm epsilon
inline constexpr int kAuxLayer = 4;     // Attention/Copy: decoder layer index
inline constexpr int kAuxLane = 5;      // Attention/Copy: tensor-parallel lane

struct Tensor {
  std::string name;
  Shape shape;
  DType dtype = DType::F32;
  OpKind op = OpKind::None;
  std::array<Tensor*, 2> src{nullptr, nullptr};
  std::array<float, kAuxSlots> aux{};
  Region region;
  std::byte* data = nullptr;
  int node_assignment = -1;  // -1 until placed
  int lane = -1;             // -1 outside parallel regions
  uint32_t uid = 0;          // creation order within one graph
  int32_t entry = -1;        // execution-list index; -1 for leaves

  float* f32() { return reinterpret_cast<float*>(data); }
  const float* f32() const { return reinterpret_cast<const float*>(data); }
  size_t byte_length() const { return byte_size(shape, dtype); }
  int aux_int(int slot) const { return static_cast<int>(aux[slot]); }
};

// A view aliases rows [row_begin, row_end) of src's outermost axis. The view
// shares src's storage; writes through it are visible in src. Rank-1 Q4B
// views must start and end on block boundaries.
Tensor make_view(const Tensor& src, int64_t row_begin, int64_t row_end,
                 std::string name = {});

// Ordered list of per-lane handles for one execution-list entry. Serial
// entries hold exactly one handle; entries inside a parallel region hold one
// handle per lane. Assigning a single Tensor* and reading it back via
// single() round-trips.
class TensorBundle {
 public:
  TensorBundle() = default;
  TensorBundle(Tensor* t) { handles_.push_back(t); }
  TensorBundle& operator=(Tensor* t) {
    handles_.assign(1, t);
    return *this;
  }

  Tensor* single() const;
  size_t size() const { return handles_.size(); }
  bool empty() const { return handles_.empty(); }
  Tensor* operator[](size_t i) const { return handles_[i]; }
  void push_back(Tensor* t) { handles_.push_back(t); }
  auto begin() const { return handles_.begin(); }
  auto end() const { return handles_.end(); }

 private:
  std::vector<Tensor*> handles_;
};

// f32 <-> f16 bit conversion, round to nearest even.
uint16_t f32_to_f16(float v);
float f16_to_f32(uint16_t bits);

// Q4B codec. Input length must be a multiple of 32. The round trip satisfies
// |v - dequant(quant(v))| <= |d|/2 per element against the stored block
// scale d; the scale is widened past the nominal max/-8 when clamping would
// break that bound. Scales are f16, so |v| beyond ~5.2e5 is out of range.
void quantize_q4b(std::span<const float> in, std::span<std::byte> out);
void dequantize_q4b(std::span<const std::byte> in, std::span<float> out);

// Single-block helpers for kernels.
float q4b_block_scale(const std::byte* block);
void q4b_dequant_block(const std::byte* block, float* out32);
// Value at index i (0..31) of one block.
inline float q4b_element(const std::byte* block, int i) {
  float d = q4b_block_scale(block);
  auto packed = reinterpret_cast<const uint8_t*>(block + 2);
  int q = i < 16 ? (packed[i] & 0x0F) : (packed[i - 16] >> 4);
  return d * static_cast<float>(q - 8);
}

}  // namespace arclite
