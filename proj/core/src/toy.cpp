#include "arclite/toy.hpp"

#include <cmath>
#include <cstring>
#include <random>

namespace arclite {

namespace {

class WeightRng {
 public:
  WeightRng(uint64_t seed, bool integer, float scale)
      : rng_(seed), integer_(integer), scale_(scale) {}

  RawTensor tensor(std::string name, Shape shape) {
    RawTensor t;
    t.name = std::move(name);
    t.dtype = DType::F32;
    t.shape = shape;
    int64_t n = shape.count();
    t.data.resize(static_cast<size_t>(n) * 4);
    auto out = reinterpret_cast<float*>(t.data.data());
    for (int64_t i = 0; i < n; i++) out[i] = next();
    return t;
  }

  RawTensor ones(std::string name, int64_t n) {
    RawTensor t;
    t.name = std::move(name);
    t.dtype = DType::F32;
    t.shape = Shape::vec(n);
    t.data.resize(static_cast<size_t>(n) * 4);
    auto out = reinterpret_cast<float*>(t.data.data());
    for (int64_t i = 0; i < n; i++) out[i] = 1.0f;
    return t;
  }

 private:
  float next() {
    if (integer_)
      return static_cast<float>(static_cast<int>(rng_() % 5) - 2);
    // 53-bit mantissa draw, uniform in [-1, 1), stdlib-independent.
    double u = static_cast<double>(rng_() >> 11) * 0x1p-53;
    return static_cast<float>((2.0 * u - 1.0) * scale_);
  }

  std::mt19937_64 rng_;
  bool integer_;
  float scale_;
};

}  // namespace

std::vector<RawTensor> make_toy_weights(const ModelConfig& cfg,
                                        const ToyOptions& opt) {
  cfg.validate();
  float scale = 1.0f / std::sqrt(static_cast<float>(cfg.hidden));
  WeightRng rng(opt.seed, opt.integer_weights, scale);

  std::vector<RawTensor> out;
  out.push_back(rng.tensor("model.embed", Shape::mat(cfg.vocab, cfg.hidden)));
  for (int32_t l = 0; l < cfg.n_layers; l++) {
    std::string p = "layers." + std::to_string(l) + ".";
    out.push_back(rng.ones(p + "attn_norm", cfg.hidden));
    out.push_back(rng.tensor(p + "wq", Shape::mat(cfg.q_dim(), cfg.hidden)));
    out.push_back(rng.tensor(p + "wk", Shape::mat(cfg.kv_dim(), cfg.hidden)));
    out.push_back(rng.tensor(p + "wv", Shape::mat(cfg.kv_dim(), cfg.hidden)));
    out.push_back(rng.tensor(p + "wo", Shape::mat(cfg.hidden, cfg.q_dim())));
    out.push_back(rng.ones(p + "mlp_norm", cfg.hidden));
    out.push_back(
        rng.tensor(p + "w_gate", Shape::mat(cfg.intermediate, cfg.hidden)));
    out.push_back(
        rng.tensor(p + "w_up", Shape::mat(cfg.intermediate, cfg.hidden)));
    out.push_back(
        rng.tensor(p + "w_down", Shape::mat(cfg.hidden, cfg.intermediate)));
  }
  out.push_back(rng.ones("model.norm", cfg.hidden));
  out.push_back(rng.tensor("model.lm_head", Shape::mat(cfg.vocab, cfg.hidden)));
  return out;
}

void write_toy_model(const std::string& path, const ModelConfig& cfg,
                     const ToyOptions& opt) {
  write_weight_file(path, cfg, make_toy_weights(cfg, opt));
}

}  // namespace arclite
