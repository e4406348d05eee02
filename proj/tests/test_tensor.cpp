#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "arclite/tensor.hpp"
#include "support.hpp"

using namespace arclite;
using support::code_of;

namespace {

// Block-enumeration oracle: 18 bytes per whole 32-element block, blocks
// never span rows of the innermost axis.
size_t q4b_bytes_oracle(const Shape& s) {
  int64_t rows = s.count() / s.inner();
  int64_t blocks_per_row = s.inner() / kQ4BBlock;
  size_t total = 0;
  for (int64_t r = 0; r < rows * blocks_per_row; r++)
    total += size_t(kQ4BBlockBytes);
  return total;
}

// Independent decode of one packed block per the pinned layout: 16-bit
// scale first, element i in the low nibble of byte i for i < 16 and the
// high nibble of byte i-16 otherwise.
void decode_block_oracle(const std::byte* block, float* out) {
  uint16_t bits = uint16_t(uint8_t(block[0])) |
                  uint16_t(uint8_t(block[1])) << 8;
  float d = f16_to_f32(bits);
  auto p = reinterpret_cast<const uint8_t*>(block + 2);
  for (int i = 0; i < 32; i++) {
    int q = i < 16 ? (p[i] & 0x0F) : (p[i - 16] >> 4);
    out[i] = d * float(q - 8);
  }
}

Tensor backed_tensor(const Shape& s, DType dt, std::vector<std::byte>& buf) {
  buf.assign(byte_size(s, dt), std::byte{0});
  Tensor t;
  t.name = "t";
  t.shape = s;
  t.dtype = dt;
  t.data = buf.data();
  t.region.length = buf.size();
  return t;
}

}  // namespace

TEST_CASE("byte_size fixed values") {
  CHECK(byte_size(Shape::make({8, 4}), DType::F32) == 128);
  CHECK(byte_size(Shape::make({8, 4}), DType::F16) == 64);
  CHECK(byte_size(Shape::make({32}), DType::Q4B) == 18);

  // 128 elements as 2 rows of 64: four whole blocks, 72 bytes.
  Shape s = Shape::make({2, 64});
  CHECK(q4b_bytes_oracle(s) == 72);
  CHECK(byte_size(s, DType::Q4B) == 72);

  Shape big = Shape::make({3, 5, 96});
  CHECK(byte_size(big, DType::Q4B) == q4b_bytes_oracle(big));
}

TEST_CASE("byte_size rejects q4b with a partial block per row") {
  CHECK(code_of([] { byte_size(Shape::make({8, 4}), DType::Q4B); }) ==
        ErrorCode::InvalidShape);
  CHECK(code_of([] { byte_size(Shape::make({48}), DType::Q4B); }) ==
        ErrorCode::InvalidShape);
}

TEST_CASE("shape accessors use outermost-first factories") {
  Shape s = Shape::make({8, 4});
  CHECK(s.rows() == 8);
  CHECK(s.cols() == 4);
  CHECK(s.inner() == 4);
  CHECK(s.outer() == 8);
  CHECK(s.count() == 32);
  CHECK(s.str() == "[8,4]");
  CHECK(code_of([] { Shape::make({0, 4}); }) == ErrorCode::InvalidShape);
  CHECK(code_of([] { Shape::vec(7).rows(); }) == ErrorCode::InvalidShape);
}

TEST_CASE("dtype element sizes") {
  CHECK(dtype_element_size(DType::F32) == 4);
  CHECK(dtype_element_size(DType::F16) == 2);
  CHECK(code_of([] { dtype_element_size(DType::Q4B); }) ==
        ErrorCode::InvalidShape);
}

TEST_CASE("views slice outermost rows without copying") {
  std::vector<std::byte> buf;
  Tensor t = backed_tensor(Shape::make({8, 16}), DType::F32, buf);

  Tensor head = make_view(t, 0, 4, "head");
  CHECK(head.shape == Shape::make({4, 16}));
  CHECK(head.data == t.data);
  CHECK(head.byte_length() == 256);
  CHECK(head.region.offset == t.region.offset);

  Tensor tail = make_view(t, 4, 8, "tail");
  CHECK(tail.data == t.data + 256);
  CHECK(tail.region.offset == t.region.offset + 256);

  Tensor full = make_view(t, 0, 8, "full");
  CHECK(full.shape == t.shape);
  CHECK(full.data == t.data);

  CHECK(code_of([&] { make_view(t, 4, 9, "over"); }) ==
        ErrorCode::InvalidView);
  CHECK(code_of([&] { make_view(t, 5, 4, "inverted"); }) ==
        ErrorCode::InvalidView);
}

TEST_CASE("view writes alias the parent") {
  std::vector<std::byte> buf;
  Tensor t = backed_tensor(Shape::make({8, 16}), DType::F32, buf);
  Tensor tail = make_view(t, 4, 8, "tail");
  tail.f32()[3] = 42.0f;
  CHECK(t.f32()[4 * 16 + 3] == 42.0f);
}

TEST_CASE("rank-1 q4b views stay on block boundaries") {
  std::vector<std::byte> buf;
  Tensor t = backed_tensor(Shape::vec(64), DType::Q4B, buf);
  Tensor second = make_view(t, 32, 64, "second");
  CHECK(second.data == t.data + kQ4BBlockBytes);
  CHECK(second.byte_length() == size_t(kQ4BBlockBytes));
  CHECK(code_of([&] { make_view(t, 16, 48, "split"); }) ==
        ErrorCode::InvalidView);
}

TEST_CASE("bundle of one is interchangeable with a handle") {
  Tensor t;
  TensorBundle b = &t;
  CHECK(b.size() == 1);
  CHECK(b.single() == &t);
  b.push_back(&t);
  CHECK(code_of([&] { b.single(); }) == ErrorCode::GraphConstruction);
}

TEST_CASE("f16 conversion round-trips exact values") {
  for (float v : {0.0f, 1.0f, -1.0f, 0.5f, 0.375f, 65504.0f, -65504.0f,
                  0x1p-24f, 6.0f}) {
    CHECK(f16_to_f32(f32_to_f16(v)) == v);
  }
}

TEST_CASE("f16 conversion rounds to nearest even") {
  // 1 + 2^-11 is exactly between 1.0 and the next f16; even mantissa wins.
  CHECK(f16_to_f32(f32_to_f16(1.0f + 0x1p-11f)) == 1.0f);
  // 1 + 3*2^-11 ties between mantissas 1 and 2; the even one is larger.
  CHECK(f16_to_f32(f32_to_f16(1.0f + 3 * 0x1p-11f)) == 1.0f + 0x1p-9f);
  // Half the smallest subnormal ties down to zero.
  CHECK(f16_to_f32(f32_to_f16(0x1p-25f)) == 0.0f);
}

TEST_CASE("f16 conversion handles the non-finite range") {
  float inf = std::numeric_limits<float>::infinity();
  CHECK(f16_to_f32(f32_to_f16(inf)) == inf);
  CHECK(f16_to_f32(f32_to_f16(-inf)) == -inf);
  CHECK(f16_to_f32(f32_to_f16(1e6f)) == inf);  // beyond f16 max
  CHECK(std::isnan(f16_to_f32(f32_to_f16(std::nanf("")))));
}

TEST_CASE("q4b zero block stores d=0 and center nibbles") {
  std::vector<float> zeros(32, 0.0f);
  std::vector<std::byte> block(kQ4BBlockBytes);
  quantize_q4b(zeros, block);
  CHECK(uint8_t(block[0]) == 0);
  CHECK(uint8_t(block[1]) == 0);
  for (int i = 2; i < kQ4BBlockBytes; i++)
    CHECK(uint8_t(block[i]) == 0x88);

  std::vector<float> back(32, 1.0f);
  dequantize_q4b(block, back);
  for (float v : back) CHECK(v == 0.0f);
}

TEST_CASE("q4b constant positive block is exact at the extremal nibble") {
  for (float c : {3.0f, 0.5f, 1.0f, 96.0f}) {
    std::vector<float> vals(32, c);
    std::vector<std::byte> block(kQ4BBlockBytes);
    quantize_q4b(vals, block);
    // d = c / -8 is f16-exact for these, so the round trip is exact and
    // every element sits at nibble 0.
    CHECK(q4b_block_scale(block.data()) == c / -8.0f);
    auto p = reinterpret_cast<const uint8_t*>(block.data() + 2);
    for (int i = 0; i < 16; i++) CHECK(p[i] == 0);
    std::vector<float> back(32);
    dequantize_q4b(block, back);
    for (float v : back) CHECK(v == c);
  }
}

TEST_CASE("q4b packing layout matches the independent decoder") {
  std::mt19937 g(99);
  std::vector<float> vals = support::uniform(g, 64, -4.0f, 4.0f);
  std::vector<std::byte> enc(2 * kQ4BBlockBytes);
  quantize_q4b(vals, enc);

  std::vector<float> lib(64), manual(64);
  dequantize_q4b(enc, lib);
  decode_block_oracle(enc.data(), manual.data());
  decode_block_oracle(enc.data() + kQ4BBlockBytes, manual.data() + 32);
  for (int i = 0; i < 64; i++) CHECK(lib[i] == manual[i]);

  // Single-element accessor agrees too.
  for (int i = 0; i < 32; i++)
    CHECK(q4b_element(enc.data(), i) == manual[i]);
}

TEST_CASE("q4b round trip stays within half a step of the stored scale") {
  std::mt19937 g(4242);
  std::vector<float> scales = {1.0f, 0.01f, 100.0f, 3000.0f};
  for (int trial = 0; trial < 1000; trial++) {
    float s = scales[size_t(trial) % scales.size()];
    std::vector<float> vals = support::uniform(g, 32, -s, s);
    if (trial % 7 == 0) vals[size_t(trial) % 32] = 0.0f;
    std::vector<std::byte> block(kQ4BBlockBytes);
    quantize_q4b(vals, block);
    float d = q4b_block_scale(block.data());
    std::vector<float> back(32);
    dequantize_q4b(block, back);
    for (int i = 0; i < 32; i++) {
      CAPTURE(trial);
      CAPTURE(i);
      CHECK(std::abs(vals[size_t(i)] - back[size_t(i)]) <=
            std::abs(d) / 2.0f);
    }
  }
}

TEST_CASE("q4b length preconditions") {
  std::vector<float> vals(48, 1.0f);
  std::vector<std::byte> out(27);
  CHECK(code_of([&] { quantize_q4b(vals, out); }) ==
        ErrorCode::InvalidShape);
}
