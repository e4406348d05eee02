#include "arclite/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace arclite {

const char* dtype_name(DType dt) {
  switch (dt) {
    case DType::F32: return "f32";
    case DType::F16: return "f16";
    case DType::Q4B: return "q4b";
  }
  return "?";
}

size_t dtype_element_size(DType dt) {
  switch (dt) {
    case DType::F32: return 4;
    case DType::F16: return 2;
    case DType::Q4B: break;
  }
  fail(ErrorCode::InvalidShape, "q4b has no per-element size");
}

Shape Shape::make(std::initializer_list<int64_t> outer_to_inner) {
  Shape s;
  s.rank = static_cast<int>(outer_to_inner.size());
  if (s.rank < 1 || s.rank > 4)
    fail(ErrorCode::InvalidShape, "rank must be 1..4");
  int i = s.rank;
  for (int64_t e : outer_to_inner) {
    if (e <= 0) fail(ErrorCode::InvalidShape, "extents must be positive");
    s.extent[--i] = e;
  }
  return s;
}

int64_t Shape::count() const {
  int64_t n = 1;
  for (int i = 0; i < rank; i++) n *= extent[i];
  return n;
}

int64_t Shape::rows() const {
  if (rank != 2) fail(ErrorCode::InvalidShape, "rows() needs rank 2");
  return extent[1];
}

int64_t Shape::cols() const {
  if (rank != 2) fail(ErrorCode::InvalidShape, "cols() needs rank 2");
  return extent[0];
}

bool Shape::operator==(const Shape& o) const {
  if (rank != o.rank) return false;
  for (int i = 0; i < rank; i++)
    if (extent[i] != o.extent[i]) return false;
  return true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (int i = rank - 1; i >= 0; i--) {
    os << extent[i];
    if (i) os << ',';
  }
  os << ']';
  return os.str();
}

size_t byte_size(const Shape& shape, DType dt) {
  int64_t n = shape.count();
  switch (dt) {
    case DType::F32: return static_cast<size_t>(n) * 4;
    case DType::F16: return static_cast<size_t>(n) * 2;
    case DType::Q4B:
      if (shape.inner() % kQ4BBlock != 0)
        fail(ErrorCode::InvalidShape,
             "q4b innermost extent must be a multiple of 32, got " +
                 shape.str());
      return static_cast<size_t>(n / kQ4BBlock) * kQ4BBlockBytes;
  }
  fail(ErrorCode::InvalidShape, "unknown dtype");
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::None: return "none";
    case OpKind::MatMul: return "matmul";
    case OpKind::RMSNorm: return "rmsnorm";
    case OpKind::RoPE: return "rope";
    case OpKind::Attention: return "attention";
    case OpKind::SiLU: return "silu";
    case OpKind::Mul: return "mul";
    case OpKind::Add: return "add";
    case OpKind::Copy: return "copy";
    case OpKind::Reshape: return "reshape";
    case OpKind::Softmax: return "softmax";
    case OpKind::Scatter: return "scatter";
    case OpKind::Gather: return "gather";
    case OpKind::Embed: return "embed";
  }
  return "?";
}

Tensor make_view(const Tensor& src, int64_t row_begin, int64_t row_end,
                 std::string name) {
  int64_t outer = src.shape.outer();
  if (row_begin < 0 || row_end > outer || row_begin >= row_end)
    fail(ErrorCode::InvalidView,
         "row range [" + std::to_string(row_begin) + "," +
             std::to_string(row_end) + ") outside outermost extent " +
             std::to_string(outer));
  if (src.dtype == DType::Q4B && src.shape.rank == 1 &&
      (row_begin % kQ4BBlock || row_end % kQ4BBlock))
    fail(ErrorCode::InvalidView, "q4b view must not split a block");

  Tensor v;
  v.name = name.empty() ? src.name + ".view" : std::move(name);
  v.shape = src.shape;
  v.shape.extent[src.shape.rank - 1] = row_end - row_begin;
  v.dtype = src.dtype;
  // Byte offset of the skipped rows via byte_size: exact for q4b too,
  // because row boundaries coincide with block boundaries.
  size_t skip = 0;
  if (row_begin > 0) {
    Shape head = src.shape;
    head.extent[src.shape.rank - 1] = row_begin;
    skip = byte_size(head, src.dtype);
  }
  v.region = src.region;
  v.region.offset += skip;
  v.region.length = byte_size(v.shape, v.dtype);
  v.data = src.data ? src.data + skip : nullptr;
  v.node_assignment = src.node_assignment;
  v.lane = src.lane;
  return v;
}

Tensor* TensorBundle::single() const {
  if (handles_.size() != 1)
    fail(ErrorCode::GraphConstruction,
         "bundle holds " + std::to_string(handles_.size()) +
             " handles, expected 1");
  return handles_[0];
}

uint16_t f32_to_f16(float v) {
  uint32_t x;
  std::memcpy(&x, &v, 4);
  uint32_t sign = (x >> 16) & 0x8000u;
  int32_t exp = static_cast<int32_t>((x >> 23) & 0xFF) - 127 + 15;
  uint32_t mant = x & 0x7FFFFFu;
  if (exp >= 0x1F) {
    // Overflow or inf/nan.
    if (((x >> 23) & 0xFF) == 0xFF && mant)
      return static_cast<uint16_t>(sign | 0x7E00u);  // nan
    return static_cast<uint16_t>(sign | 0x7C00u);    // inf
  }
  if (exp <= 0) {
    // Subnormal half or zero.
    if (exp < -10) return static_cast<uint16_t>(sign);
    mant |= 0x800000u;
    int shift = 14 - exp;
    uint32_t half = mant >> shift;
    uint32_t rem = mant & ((1u << shift) - 1);
    uint32_t mid = 1u << (shift - 1);
    if (rem > mid || (rem == mid && (half & 1))) half++;
    return static_cast<uint16_t>(sign | half);
  }
  uint32_t half = (static_cast<uint32_t>(exp) << 10) | (mant >> 13);
  uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1))) half++;
  return static_cast<uint16_t>(sign | half);
}

float f16_to_f32(uint16_t bits) {
  uint32_t sign = static_cast<uint32_t>(bits & 0x8000u) << 16;
  uint32_t exp = (bits >> 10) & 0x1F;
  uint32_t mant = bits & 0x3FFu;
  uint32_t x;
  if (exp == 0) {
    if (mant == 0) {
      x = sign;
    } else {
      // Normalize the subnormal.
      int shift = 0;
      while (!(mant & 0x400u)) {
        mant <<= 1;
        shift++;
      }
      mant &= 0x3FFu;
      x = sign | ((127 - 15 - shift + 1) << 23) | (mant << 13);
    }
  } else if (exp == 0x1F) {
    x = sign | 0x7F800000u | (mant << 13);
  } else {
    x = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  float v;
  std::memcpy(&v, &x, 4);
  return v;
}

namespace {

// True when every element of the block round-trips within half a step of the
// stored scale. Matches the arithmetic of q4b_dequant_block exactly.
bool scale_covers(uint16_t scale_bits, const float* v) {
  float d = f16_to_f32(scale_bits);
  if (d == 0.0f) {
    for (int i = 0; i < kQ4BBlock; i++)
      if (v[i] != 0.0f) return false;
    return true;
  }
  double bound = 0.5 * std::fabs(static_cast<double>(d));
  for (int i = 0; i < kQ4BBlock; i++) {
    long q = std::lround(v[i] / d) + 8;
    if (q < 0) q = 0;
    if (q > 15) q = 15;
    float dq = d * static_cast<float>(q - 8);
    if (std::fabs(static_cast<double>(v[i]) - static_cast<double>(dq)) >
        bound)
      return false;
  }
  return true;
}

uint16_t choose_scale(const float* v) {
  float ext = 0.0f;  // signed element with the largest magnitude
  float amax = 0.0f;
  for (int i = 0; i < kQ4BBlock; i++) {
    float a = std::fabs(v[i]);
    if (a > amax) {
      amax = a;
      ext = v[i];
    }
  }
  if (amax == 0.0f) return 0;
  float d = ext / -8.0f;
  // ext maps to level -8. Opposite-sign elements close to |ext| would land
  // past level +7 and clamp with error up to |d|; widen so the farthest
  // element sits within the top level's half step.
  float top = 0.0f;
  for (int i = 0; i < kQ4BBlock; i++) top = std::max(top, v[i] / d);
  if (top > 7.5f) d *= top / 7.5f;
  uint16_t bits = f32_to_f16(d);
  // f16 rounding can shave the scale enough to break the bound; nudge the
  // magnitude up until it holds. A handful of steps at most.
  while (!scale_covers(bits, v) && (bits & 0x7FFFu) < 0x7BFFu)
    bits = static_cast<uint16_t>(bits + 1);
  return bits;
}

}  // namespace

void quantize_q4b(std::span<const float> in, std::span<std::byte> out) {
  if (in.size() % kQ4BBlock != 0)
    fail(ErrorCode::InvalidShape, "q4b input length must be a multiple of 32");
  size_t blocks = in.size() / kQ4BBlock;
  if (out.size() != blocks * kQ4BBlockBytes)
    fail(ErrorCode::InvalidShape, "q4b output buffer size mismatch");

  for (size_t b = 0; b < blocks; b++) {
    const float* v = in.data() + b * kQ4BBlock;
    std::byte* blk = out.data() + b * kQ4BBlockBytes;
    uint16_t bits = choose_scale(v);
    std::memcpy(blk, &bits, 2);
    float d = f16_to_f32(bits);
    auto packed = reinterpret_cast<uint8_t*>(blk + 2);
    for (int i = 0; i < 16; i++) {
      auto enc = [&](float x) -> uint8_t {
        if (d == 0.0f) return 8;
        long q = std::lround(x / d) + 8;
        if (q < 0) q = 0;
        if (q > 15) q = 15;
        return static_cast<uint8_t>(q);
      };
      packed[i] =
          static_cast<uint8_t>(enc(v[i]) | (enc(v[i + 16]) << 4));
    }
  }
}

void dequantize_q4b(std::span<const std::byte> in, std::span<float> out) {
  if (in.size() % kQ4BBlockBytes != 0)
    fail(ErrorCode::InvalidShape, "q4b byte length must be a multiple of 18");
  size_t blocks = in.size() / kQ4BBlockBytes;
  if (out.size() != blocks * kQ4BBlock)
    fail(ErrorCode::InvalidShape, "q4b output buffer size mismatch");
  for (size_t b = 0; b < blocks; b++)
    q4b_dequant_block(in.data() + b * kQ4BBlockBytes,
                      out.data() + b * kQ4BBlock);
}

float q4b_block_scale(const std::byte* block) {
  uint16_t bits;
  std::memcpy(&bits, block, 2);
  return f16_to_f32(bits);
}

void q4b_dequant_block(const std::byte* block, float* out32) {
  float d = q4b_block_scale(block);
  auto packed = reinterpret_cast<const uint8_t*>(block + 2);
  for (int i = 0; i < 16; i++) {
    out32[i] = d * static_cast<float>((packed[i] & 0x0F) - 8);
    out32[i + 16] = d * static_cast<float>((packed[i] >> 4) - 8);
  }
}

}  // namespace arclite
