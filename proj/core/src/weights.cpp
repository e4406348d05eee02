#include "arclite/weights.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace arclite {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u16(std::vector<std::byte>& out, uint16_t v) {
  out.push_back(std::byte(v & 0xFF));
  out.push_back(std::byte(v >> 8));
}

void put_u32(std::vector<std::byte>& out, uint32_t v) {
  for (int i = 0; i < 4; i++) out.push_back(std::byte((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::byte>& out, uint64_t v) {
  for (int i = 0; i < 8; i++) out.push_back(std::byte((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::byte* p, size_t n) : p_(p), n_(n) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return n_ - pos_; }

  void bytes(void* dst, size_t n) {
    if (pos_ + n > n_)
      fail(ErrorCode::LoaderTruncated,
           "file ends inside a header record");
    std::memcpy(dst, p_ + pos_, n);
    pos_ += n;
  }

  uint16_t u16() {
    uint8_t b[2];
    bytes(b, 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }

  uint32_t u32() {
    uint8_t b[4];
    bytes(b, 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
  }

  uint64_t u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | (hi << 32);
  }

 private:
  const std::byte* p_;
  size_t n_;
  size_t pos_ = 0;
};

size_t align_up(size_t v, size_t a) { return (v + a - 1) / a * a; }

}  // namespace

const RawTensor& WeightFileData::tensor(const std::string& name) const {
  const RawTensor* t = find(name);
  if (!t) fail(ErrorCode::LoaderMissingTensor, name);
  return *t;
}

const RawTensor* WeightFileData::find(const std::string& name) const {
  for (const RawTensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

RawTensor encode_config(const ModelConfig& cfg) {
  RawTensor t;
  t.name = kConfigTensorName;
  t.dtype = DType::F32;
  t.shape = Shape::vec(16);
  t.data.resize(16 * sizeof(float));
  float v[16] = {};
  v[0] = static_cast<float>(cfg.vocab);
  v[1] = static_cast<float>(cfg.hidden);
  v[2] = static_cast<float>(cfg.intermediate);
  v[3] = static_cast<float>(cfg.n_layers);
  v[4] = static_cast<float>(cfg.n_heads);
  v[5] = static_cast<float>(cfg.n_kv_heads);
  v[6] = static_cast<float>(cfg.head_dim);
  v[7] = static_cast<float>(cfg.max_seq);
  v[8] = cfg.rope_theta;
  v[9] = cfg.rms_eps;
  std::memcpy(t.data.data(), v, sizeof(v));
  return t;
}

ModelConfig decode_config(const RawTensor& t) {
  if (t.dtype != DType::F32 || t.shape.count() != 16)
    fail(ErrorCode::LoaderFormat, "__config must be 16 floats");
  float v[16];
  std::memcpy(v, t.data.data(), sizeof(v));
  ModelConfig cfg;
  cfg.vocab = static_cast<int32_t>(v[0]);
  cfg.hidden = static_cast<int32_t>(v[1]);
  cfg.intermediate = static_cast<int32_t>(v[2]);
  cfg.n_layers = static_cast<int32_t>(v[3]);
  cfg.n_heads = static_cast<int32_t>(v[4]);
  cfg.n_kv_heads = static_cast<int32_t>(v[5]);
  cfg.head_dim = static_cast<int32_t>(v[6]);
  cfg.max_seq = static_cast<int32_t>(v[7]);
  cfg.rope_theta = v[8];
  cfg.rms_eps = v[9];
  cfg.validate();
  return cfg;
}

void write_weight_file(const std::string& path, const ModelConfig& cfg,
                       const std::vector<RawTensor>& tensors) {
  cfg.validate();
  std::vector<const RawTensor*> all;
  RawTensor conf = encode_config(cfg);
  all.push_back(&conf);
  for (const RawTensor& t : tensors) {
    if (t.name == kConfigTensorName)
      fail(ErrorCode::LoaderFormat, "__config is reserved");
    if (t.name.empty() || t.name.size() > 0xFFFF)
      fail(ErrorCode::LoaderFormat, "bad tensor name");
    if (t.data.size() != byte_size(t.shape, t.dtype))
      fail(ErrorCode::LoaderShape,
           t.name + ": data length does not match shape");
    all.push_back(&t);
  }

  // Lay out headers first to learn the data section start.
  size_t header = 12;  // magic, version, count
  for (const RawTensor* t : all)
    header += 2 + t->name.size() + 1 + 1 + 4 * t->shape.rank + 16;

  std::vector<uint64_t> offsets(all.size());
  size_t cursor = align_up(header, kWeightDataAlign);
  for (size_t i = 0; i < all.size(); i++) {
    offsets[i] = cursor;
    cursor = align_up(cursor + all[i]->data.size(), kWeightDataAlign);
  }

  std::vector<std::byte> out;
  out.reserve(cursor);
  put_u32(out, kWeightMagic);
  put_u32(out, kWeightVersion);
  put_u32(out, static_cast<uint32_t>(all.size()));
  for (size_t i = 0; i < all.size(); i++) {
    const RawTensor* t = all[i];
    put_u16(out, static_cast<uint16_t>(t->name.size()));
    for (char c : t->name) out.push_back(std::byte(c));
    out.push_back(std::byte(static_cast<uint8_t>(t->dtype)));
    out.push_back(std::byte(static_cast<uint8_t>(t->shape.rank)));
    for (int d = t->shape.rank - 1; d >= 0; d--)
      put_u32(out, static_cast<uint32_t>(t->shape.extent[d]));
    put_u64(out, offsets[i]);
    put_u64(out, t->data.size());
  }
  out.resize(cursor);
  for (size_t i = 0; i < all.size(); i++)
    std::memcpy(out.data() + offsets[i], all[i]->data.data(),
                all[i]->data.size());

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(ErrorCode::LoaderFormat, "cannot open " + path);
  if (std::fwrite(out.data(), 1, out.size(), f.get()) != out.size())
    fail(ErrorCode::LoaderFormat, "short write to " + path);
}

WeightFileData read_weight_file(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(ErrorCode::LoaderFormat, "cannot open " + path);
  std::fseek(f.get(), 0, SEEK_END);
  long size = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  if (size < 12) fail(ErrorCode::LoaderTruncated, "file smaller than header");
  std::vector<std::byte> buf(static_cast<size_t>(size));
  if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
    fail(ErrorCode::LoaderTruncated, "short read from " + path);

  Reader r(buf.data(), buf.size());
  if (r.u32() != kWeightMagic) fail(ErrorCode::LoaderMagic, path);
  uint32_t version = r.u32();
  if (version != kWeightVersion)
    fail(ErrorCode::LoaderVersion, "version " + std::to_string(version));
  uint32_t count = r.u32();
  if (count == 0) fail(ErrorCode::LoaderFormat, "no tensors");

  WeightFileData out;
  out.version = version;
  bool have_config = false;
  for (uint32_t i = 0; i < count; i++) {
    uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    uint8_t dt, rank;
    r.bytes(&dt, 1);
    r.bytes(&rank, 1);
    if (dt > 2) fail(ErrorCode::LoaderFormat, name + ": unknown dtype");
    if (rank < 1 || rank > 4)
      fail(ErrorCode::LoaderFormat, name + ": bad rank");

    RawTensor t;
    t.name = name;
    t.dtype = static_cast<DType>(dt);
    t.shape.rank = rank;
    for (int d = rank - 1; d >= 0; d--) {
      uint32_t e = r.u32();
      if (e == 0) fail(ErrorCode::LoaderFormat, name + ": zero extent");
      t.shape.extent[d] = e;
    }
    uint64_t off = r.u64();
    uint64_t len = r.u64();
    if (off % kWeightDataAlign)
      fail(ErrorCode::LoaderFormat, name + ": unaligned data offset");
    if (off + len > buf.size())
      fail(ErrorCode::LoaderTruncated, name + ": data outside the file");
    if (len != byte_size(t.shape, t.dtype))
      fail(ErrorCode::LoaderShape,
           name + ": length " + std::to_string(len) + " for shape " +
               t.shape.str());
    t.data.assign(buf.begin() + static_cast<long>(off),
                  buf.begin() + static_cast<long>(off + len));

    if (t.name == kConfigTensorName) {
      if (have_config) fail(ErrorCode::LoaderDuplicate, t.name);
      if (i != 0)
        fail(ErrorCode::LoaderFormat, "__config must be the first tensor");
      out.config = decode_config(t);
      have_config = true;
      continue;
    }
    for (const RawTensor& prev : out.tensors)
      if (prev.name == t.name) fail(ErrorCode::LoaderDuplicate, t.name);
    out.tensors.push_back(std::move(t));
  }
  if (!have_config)
    fail(ErrorCode::LoaderMissingTensor, kConfigTensorName);
  return out;
}

}  // namespace arclite
