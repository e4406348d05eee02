#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "arclite/kernels.hpp"
#include "arclite/membench.hpp"
#include "arclite/model.hpp"
#include "arclite/scheduler.hpp"
#include "arclite/toy.hpp"

namespace arclite {

namespace {

struct CommonOpts {
  std::string model;
  int threads = 1;
  std::string numa = "emulated";
  int nodes = 1;
  int tp = 1;
  std::string sync = "b";
  std::string bind_cores;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--model", o.model, "weight file")->required();
  cmd->add_option("--threads", o.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--numa", o.numa, "placement mode")
      ->check(CLI::IsMember({"real", "emulated"}));
  cmd->add_option("--nodes", o.nodes, "memory nodes")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tp", o.tp, "tensor-parallel lanes")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--sync-mode", o.sync, "barrier discipline")
      ->check(CLI::IsMember({"a", "b"}));
  cmd->add_option("--bind-cores", o.bind_cores,
                  "comma-separated cpu ids, one per thread");
}

// ARCLITE_NUMA_MODE wins over the flag when set.
void apply_env(CommonOpts& o) {
  const char* env = std::getenv("ARCLITE_NUMA_MODE");
  if (!env) return;
  std::string v(env);
  if (v != "real" && v != "emulated")
    fail(ErrorCode::UsageError,
         "ARCLITE_NUMA_MODE must be real or emulated, got '" + v + "'");
  o.numa = v;
}

NodeLayout layout_of(const CommonOpts& o) {
  return o.numa == "real" ? NodeLayout::real(o.nodes)
                          : NodeLayout::emulated(o.nodes);
}

SyncMode sync_of(const CommonOpts& o) {
  return o.sync == "a" ? SyncMode::A : SyncMode::B;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::string tok;
  std::istringstream is(text);
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (...) {
      fail(ErrorCode::UsageError,
           std::string(what) + ": bad integer '" + tok + "'");
    }
  }
  if (out.empty())
    fail(ErrorCode::UsageError, std::string(what) + ": empty list");
  return out;
}

std::vector<int32_t> parse_prompt(const std::string& spec) {
  std::string text = spec;
  if (!spec.empty() && spec[0] == '@') {
    std::ifstream f(spec.substr(1));
    if (!f) fail(ErrorCode::UsageError, "cannot read " + spec.substr(1));
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  for (char& c : text)
    if (c == ',' || c == '\n' || c == '\t') c = ' ';
  std::vector<int32_t> ids;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    try {
      ids.push_back(std::stoi(tok));
    } catch (...) {
      fail(ErrorCode::UsageError, "prompt: bad token id '" + tok + "'");
    }
  }
  if (ids.empty()) fail(ErrorCode::UsageError, "prompt has no token ids");
  return ids;
}

// Pin list for the pool. Explicit --bind-cores wins; otherwise real mode
// spreads each region group over its lane node's cpus.
std::vector<int> pin_plan(const CommonOpts& o, const NodeLayout& layout,
                          const PartitionPlan& plan) {
  if (!o.bind_cores.empty()) {
    std::vector<int> cpus = parse_int_list(o.bind_cores, "--bind-cores");
    if (static_cast<int>(cpus.size()) != o.threads)
      fail(ErrorCode::UsageError,
           "--bind-cores lists " + std::to_string(cpus.size()) +
               " cpus for " + std::to_string(o.threads) + " threads");
    return cpus;
  }
  if (layout.mode != NumaMode::Real) return {};
  std::vector<int> cpus(o.threads);
  int k = std::min(o.threads, plan.lanes);
  for (int g = 0; g < k; g++) {
    auto ranks = kernels::row_slice(o.threads, k, g);
    auto lanes = kernels::row_slice(plan.lanes, k, g);
    const auto& cores = layout.node_cores[plan.lane_nodes[lanes.begin]];
    int i = 0;
    for (int64_t r = ranks.begin; r < ranks.end; r++, i++)
      cpus[r] = cores[i % cores.size()];
  }
  return cpus;
}

struct StepTimes {
  double prefill_s = 0;
  double decode_s = 0;
  std::vector<int32_t> tokens;
};

StepTimes timed_generate(Model& m, ThreadPool& pool, SyncMode sync,
                         const std::vector<int32_t>& prompt, int n_gen) {
  using clock = std::chrono::steady_clock;
  m.reset();
  StepTimes st;
  std::vector<float> logits;
  int64_t pos = 0;

  auto t0 = clock::now();
  for (int32_t tok : prompt)
    logits = forward_step(*m.graph, pool, sync, tok, pos++);
  auto t1 = clock::now();
  for (int i = 0; i < n_gen; i++) {
    int32_t next = argmax(logits);
    st.tokens.push_back(next);
    if (i + 1 < n_gen)
      logits = forward_step(*m.graph, pool, sync, next, pos++);
  }
  auto t2 = clock::now();
  st.prefill_s = std::chrono::duration<double>(t1 - t0).count();
  st.decode_s = std::chrono::duration<double>(t2 - t1).count();
  return st;
}

int cmd_generate(const CommonOpts& o, const std::string& prompt_spec,
                 int n_gen, std::ostream& out) {
  NodeLayout layout = layout_of(o);
  Model m = load_model(o.model, layout, o.tp);
  ThreadPool pool(o.threads, pin_plan(o, layout, m.plan));
  std::vector<int32_t> prompt = parse_prompt(prompt_spec);
  if (static_cast<int64_t>(prompt.size()) + n_gen - 1 > m.config.max_seq)
    fail(ErrorCode::CacheCapacity,
         "prompt plus generation exceeds max_seq " +
             std::to_string(m.config.max_seq));

  StepTimes st = timed_generate(m, pool, sync_of(o), prompt, n_gen);

  out << "tokens:";
  for (int32_t t : st.tokens) out << ' ' << t;
  out << "\n";
  double tps = st.decode_s > 0 ? (n_gen > 1 ? (n_gen - 1) / st.decode_s : 0)
                               : 0;
  char line[160];
  std::snprintf(line, sizeof(line),
                "decode: %.1f tok/s (%d tokens, prefill %.3fs)\n", tps, n_gen,
                st.prefill_s);
  out << line;
  return 0;
}

int cmd_bench(const CommonOpts& o, const std::string& prompt_spec, int n_gen,
              int runs, std::ostream& out) {
  NodeLayout layout = layout_of(o);
  Model m = load_model(o.model, layout, o.tp);
  ThreadPool pool(o.threads, pin_plan(o, layout, m.plan));
  std::vector<int32_t> prompt = parse_prompt(prompt_spec);
  SyncMode sync = sync_of(o);

  double prefill = 0, decode = 0;
  timed_generate(m, pool, sync, prompt, n_gen);  // warm
  for (int r = 0; r < runs; r++) {
    StepTimes st = timed_generate(m, pool, sync, prompt, n_gen);
    prefill += static_cast<double>(prompt.size()) / st.prefill_s;
    decode += st.decode_s > 0 ? (n_gen - 1) / st.decode_s : 0;
  }
  out << "threads,numa_mode,tp,sync,prefill_tps,decode_tps\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%d,%s,%d,%s,%.2f,%.2f\n", o.threads,
                o.numa.c_str(), o.tp, o.sync.c_str(), prefill / runs,
                decode / runs);
  out << line;
  return 0;
}

int cmd_membench(const std::string& numa, int nodes, int size_mib,
                 int threads, int repeats, std::ostream& out) {
  NodeLayout layout = numa == "real" ? NodeLayout::real(nodes)
                                     : NodeLayout::emulated(nodes);
  BandwidthResult r = measure_bandwidth(
      layout, static_cast<size_t>(size_mib) << 20, threads, repeats);
  out << format_bandwidth(r);
  return 0;
}

int cmd_quantize(const std::string& in, const std::string& dest,
                 std::ostream& out) {
  WeightFileData data = read_weight_file(in);
  int converted = 0;
  for (RawTensor& t : data.tensors) {
    if (t.dtype != DType::F32 || t.shape.inner() % kQ4BBlock) continue;
    std::vector<std::byte> packed(byte_size(t.shape, DType::Q4B));
    quantize_q4b(std::span<const float>(t.f32(), t.shape.count()), packed);
    t.dtype = DType::Q4B;
    t.data = std::move(packed);
    converted++;
  }
  write_weight_file(dest, data.config, data.tensors);
  out << "quantized " << converted << " of " << data.tensors.size()
      << " tensors -> " << dest << "\n";
  return 0;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  WeightFileData data = read_weight_file(path);
  const ModelConfig& c = data.config;
  out << "version " << data.version << "\n";
  char line[256];
  std::snprintf(line, sizeof(line),
                "config: vocab=%d hidden=%d intermediate=%d layers=%d "
                "heads=%d kv_heads=%d head_dim=%d max_seq=%d theta=%g "
                "eps=%g\n",
                c.vocab, c.hidden, c.intermediate, c.n_layers, c.n_heads,
                c.n_kv_heads, c.head_dim, c.max_seq,
                static_cast<double>(c.rope_theta),
                static_cast<double>(c.rms_eps));
  out << line;
  size_t total = 0;
  for (const RawTensor& t : data.tensors) {
    std::snprintf(line, sizeof(line), "%-28s %-4s %-14s %10zu bytes\n",
                  t.name.c_str(), dtype_name(t.dtype), t.shape.str().c_str(),
                  t.data.size());
    out << line;
    total += t.data.size();
  }
  out << data.tensors.size() << " tensors, " << total << " data bytes\n";
  return 0;
}

int cmd_make_toy(const std::string& dest, const ModelConfig& cfg,
                 uint64_t seed, bool integer, std::ostream& out) {
  ToyOptions opt;
  opt.seed = seed;
  opt.integer_weights = integer;
  write_toy_model(dest, cfg, opt);
  out << "wrote " << dest << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"numa-aware decoder runtime"};
  app.require_subcommand(1);

  CommonOpts gen_o, bench_o;
  std::string gen_prompt = "1", bench_prompt = "1,2,3,4";
  int gen_n = 32, bench_n = 32, bench_runs = 3;

  CLI::App* gen = app.add_subcommand("generate", "greedy decode");
  add_common(gen, gen_o);
  gen->add_option("--prompt", gen_prompt, "token ids, or @file");
  gen->add_option("--n-gen", gen_n, "tokens to generate")
      ->check(CLI::NonNegativeNumber);

  CLI::App* bench = app.add_subcommand("bench", "throughput measurement");
  add_common(bench, bench_o);
  bench->add_option("--prompt", bench_prompt, "token ids, or @file");
  bench->add_option("--n-gen", bench_n, "tokens to generate")
      ->check(CLI::PositiveNumber);
  bench->add_option("--runs", bench_runs, "measured repetitions")
      ->check(CLI::PositiveNumber);

  std::string mb_numa = "emulated";
  int mb_nodes = 1, mb_size = 256, mb_threads = 0, mb_repeats = 3;
  CLI::App* mb = app.add_subcommand("membench", "node bandwidth matrix");
  mb->add_option("--numa", mb_numa, "placement mode")
      ->check(CLI::IsMember({"real", "emulated"}));
  mb->add_option("--nodes", mb_nodes, "memory nodes")
      ->check(CLI::PositiveNumber);
  mb->add_option("--size-mib", mb_size, "buffer size per probe")
      ->check(CLI::PositiveNumber);
  mb->add_option("--threads", mb_threads, "readers per probe, 0 = auto");
  mb->add_option("--repeats", mb_repeats, "passes per measurement")
      ->check(CLI::PositiveNumber);

  std::string q_in, q_out;
  CLI::App* quant = app.add_subcommand("quantize", "pack weights to 4-bit");
  quant->add_option("--model", q_in, "input weight file")->required();
  quant->add_option("--out", q_out, "output weight file")->required();

  std::string i_path;
  CLI::App* insp = app.add_subcommand("inspect", "dump weight file header");
  insp->add_option("--model", i_path, "weight file")->required();

  std::string toy_out;
  ModelConfig toy_cfg;
  toy_cfg.vocab = 256;
  toy_cfg.hidden = 64;
  toy_cfg.intermediate = 128;
  toy_cfg.n_layers = 4;
  toy_cfg.n_heads = 8;
  toy_cfg.n_kv_heads = 4;
  toy_cfg.head_dim = 8;
  toy_cfg.max_seq = 256;
  uint64_t toy_seed = 1;
  bool toy_int = false;
  CLI::App* toy = app.add_subcommand("make-toy", "write a small test model");
  toy->add_option("--out", toy_out, "destination file")->required();
  toy->add_option("--vocab", toy_cfg.vocab)->check(CLI::PositiveNumber);
  toy->add_option("--hidden", toy_cfg.hidden)->check(CLI::PositiveNumber);
  toy->add_option("--intermediate", toy_cfg.intermediate)
      ->check(CLI::PositiveNumber);
  toy->add_option("--layers", toy_cfg.n_layers)->check(CLI::PositiveNumber);
  toy->add_option("--heads", toy_cfg.n_heads)->check(CLI::PositiveNumber);
  toy->add_option("--kv-heads", toy_cfg.n_kv_heads)
      ->check(CLI::PositiveNumber);
  toy->add_option("--head-dim", toy_cfg.head_dim)->check(CLI::PositiveNumber);
  toy->add_option("--max-seq", toy_cfg.max_seq)->check(CLI::PositiveNumber);
  toy->add_option("--seed", toy_seed, "weight rng seed");
  toy->add_flag("--integer", toy_int, "integer-valued weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*gen) {
      apply_env(gen_o);
      return cmd_generate(gen_o, gen_prompt, gen_n, out);
    }
    if (*bench) {
      apply_env(bench_o);
      return cmd_bench(bench_o, bench_prompt, bench_n, bench_runs, out);
    }
    if (*mb) {
      const char* env = std::getenv("ARCLITE_NUMA_MODE");
      if (env) {
        std::string v(env);
        if (v != "real" && v != "emulated")
          fail(ErrorCode::UsageError,
               "ARCLITE_NUMA_MODE must be real or emulated");
        mb_numa = v;
      }
      return cmd_membench(mb_numa, mb_nodes, mb_size, mb_threads, mb_repeats,
                          out);
    }
    if (*quant) return cmd_quantize(q_in, q_out, out);
    if (*insp) return cmd_inspect(i_path, out);
    if (*toy) return cmd_make_toy(toy_out, toy_cfg, toy_seed, toy_int, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::UsageError ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace arclite
