#include "arclite/scheduler.hpp"

#include <cmath>

#include "arclite/kernels.hpp"

namespace arclite {

const char* sync_mode_name(SyncMode m) { return m == SyncMode::A ? "a" : "b"; }

namespace {

using kernels::WorkSlice;
using kernels::row_slice;

// Executes one tensor's op over a slice of its output rows. part/parts pick
// the slice; reductions stay whole, so any split gives identical bits.
void exec_tensor(Graph& g, Tensor* t, int part, int parts, int group_rank) {
  switch (t->op) {
    case OpKind::MatMul: {
      Tensor* x = t->src[0];
      Tensor* w = t->src[1];
      kernels::gemm(w->data, w->dtype, w->shape.rows(), w->shape.cols(),
                    x->f32(), 1, t->f32(),
                    row_slice(w->shape.rows(), parts, part));
      return;
    }
    case OpKind::RMSNorm: {
      Tensor* x = t->src[0];
      Tensor* gamma = t->src[1];
      int64_t n = x->shape.count();
      kernels::rmsnorm(x->f32(), gamma ? gamma->data : nullptr,
                       gamma ? gamma->dtype : DType::F32, n,
                       t->aux[kAuxEps], t->f32(), row_slice(n, parts, part));
      return;
    }
    case OpKind::RoPE: {
      int heads = t->aux_int(kAuxHeads);
      kernels::rope(t->src[0]->f32(), t->f32(), heads,
                    t->aux_int(kAuxHeadDim), g.position, t->aux[kAuxTheta],
                    row_slice(heads, parts, part));
      return;
    }
    case OpKind::Attention: {
      KVCache& c = g.cache(t->aux_int(kAuxLayer), t->aux_int(kAuxLane));
      kernels::AttentionDims dims{t->aux_int(kAuxHeads),
                                  t->aux_int(kAuxKvHeads),
                                  t->aux_int(kAuxHeadDim)};
      kernels::attention(t->src[0]->f32(), c.key()->f32(), c.value()->f32(),
                         dims, c.length(), t->f32(),
                         row_slice(dims.heads, parts, part));
      return;
    }
    case OpKind::SiLU: {
      int64_t n = t->shape.count();
      kernels::silu(t->src[0]->f32(), n, t->f32(), row_slice(n, parts, part));
      return;
    }
    case OpKind::Mul: {
      int64_t n = t->shape.count();
      kernels::mul(t->src[0]->f32(), t->src[1]->f32(), n, t->f32(),
                   row_slice(n, parts, part));
      return;
    }
    case OpKind::Add: {
      int64_t n = t->shape.count();
      kernels::add(t->src[0]->f32(), t->src[1]->f32(), n, t->f32(),
                   row_slice(n, parts, part));
      return;
    }
    case OpKind::Softmax: {
      int64_t n = t->shape.count();
      kernels::softmax(t->src[0]->f32(), n, t->f32(),
                       row_slice(n, parts, part));
      return;
    }
    case OpKind::Copy: {
      // Key/value commit: one writer per cache, ordered by position.
      if (group_rank == 0) {
        KVCache& c = g.cache(t->aux_int(kAuxLayer), t->aux_int(kAuxLane));
        Tensor* k = t->src[0];
        Tensor* v = t->src[1];
        c.set(g.position,
              std::span<const float>(k->f32(), k->shape.count()),
              std::span<const float>(v->f32(), v->shape.count()));
        t->f32()[0] = static_cast<float>(g.position);
      }
      return;
    }
    case OpKind::Embed: {
      Tensor* table = t->src[0];
      int64_t dim = t->shape.count();
      kernels::embed(table->data, table->dtype, table->shape.rows(), dim,
                     g.token, t->f32(), row_slice(dim, parts, part));
      return;
    }
    case OpKind::None:
    case OpKind::Reshape:
    case OpKind::Scatter:
    case OpKind::Gather:
      break;
  }
  fail(ErrorCode::SchedulerError,
       std::string("entry op '") + op_name(t->op) + "' has no executor");
}

// Emulated-mode locality assertion: a region tensor and everything it reads
// must sit on the lane's node. Scatter replicas are the sanctioned entry
// point, already node local by construction.
void check_lane_local(const Tensor* t, int lane_node) {
  auto bad = [&](const Tensor* x) {
    fail(ErrorCode::SchedulerError,
         "tensor '" + x->name + "' on node " +
             std::to_string(x->node_assignment) + " used by lane node " +
             std::to_string(lane_node));
  };
  if (t->node_assignment != lane_node) bad(t);
  for (const Tensor* s : t->src) {
    if (s && s->node_assignment != lane_node) bad(s);
  }
}

}  // namespace

void execute_step(Graph& g, ThreadPool& pool, SyncMode mode,
                  ExecTrace* trace) {
  if (pool.group_count() != 1)
    fail(ErrorCode::SchedulerError, "pool must enter in single-group mode");
  const ExecList& ex = g.exec();
  if (ex.size() == 0) fail(ErrorCode::SchedulerError, "empty graph");

  int threads = pool.size();
  int lanes = g.lanes();
  int region_group_count = std::min(threads, lanes);
  std::vector<int> region_groups(region_group_count);
  for (int i = 0; i < region_group_count; i++)
    region_groups[i] =
        static_cast<int>(row_slice(threads, region_group_count, i).size());
  std::vector<int> single{threads};

  if (trace) trace->per_worker.assign(threads, {});
  bool emulated = g.pool().mode() == NumaMode::Emulated;

  pool.run([&](WorkerContext& ctx) {
    int rank = ctx.rank();
    for (int32_t i = 0; i != -1; i = ex[i].successor) {
      const ExecList::Entry& e = ex[i];
      if (trace) trace->per_worker[rank].push_back(i);

      switch (e.mode) {
        case AppendMode::Serial: {
          exec_tensor(g, e.bundle.single(), rank, threads, rank);
          ctx.global_barrier();
          break;
        }
        case AppendMode::Scatter: {
          // Replicate the serial input onto every lane node, whole pool
          // cooperating, then split into region groups. The reconfigure's
          // leading barrier orders the copies before any lane reads them.
          for (size_t l = 0; l < e.bundle.size(); l++) {
            Tensor* rep = e.bundle[l];
            int64_t n = rep->shape.count();
            kernels::copy(rep->src[0]->f32(), n, rep->f32(),
                          row_slice(n, threads, rank));
          }
          ctx.reconfigure_groups(region_groups);
          break;
        }
        case AppendMode::Parallel: {
          int group = ctx.group();
          auto owned = row_slice(lanes, ctx.group_count(), group);
          for (int64_t l = owned.begin; l < owned.end; l++) {
            Tensor* t = e.bundle[l];
            if (emulated) check_lane_local(t, g.lane_nodes()[l]);
            exec_tensor(g, t, ctx.group_rank(), ctx.group_size(),
                        ctx.group_rank());
          }
          if (mode == SyncMode::A)
            ctx.global_barrier();
          else
            ctx.local_barrier();
          break;
        }
        case AppendMode::Gather: {
          // Region close: everyone meets inside the reconfigure, then the
          // whole pool sums lane partials in fixed lane order.
          ctx.reconfigure_groups(single);
          Tensor* out = e.bundle.single();
          const TensorBundle& parts = ex[i - 1].bundle;
          int64_t n = out->shape.count();
          auto s = row_slice(n, threads, rank);
          float* dst = out->f32();
          for (int64_t r = s.begin; r < s.end; r++) {
            float acc = parts[0]->f32()[r];
            for (size_t l = 1; l < parts.size(); l++)
              acc += parts[l]->f32()[r];
            dst[r] = acc;
          }
          ctx.global_barrier();
          break;
        }
      }
    }
  });
}

std::vector<float> forward_step(Graph& g, ThreadPool& pool, SyncMode mode,
                                int32_t token, int64_t position) {
  if (position < 0 || position >= g.config().max_seq)
    fail(ErrorCode::CacheCapacity,
         "position " + std::to_string(position) + " outside max_seq " +
             std::to_string(g.config().max_seq));
  g.token = token;
  g.position = position;
  execute_step(g, pool, mode);
  Tensor* logits = g.logits();
  return std::vector<float>(logits->f32(),
                            logits->f32() + logits->shape.count());
}

int32_t argmax(std::span<const float> logits) {
  if (logits.empty()) fail(ErrorCode::InvalidShape, "empty logits");
  int32_t best = 0;
  for (size_t i = 1; i < logits.size(); i++)
    if (logits[i] > logits[best]) best = static_cast<int32_t>(i);
  return best;
}

std::vector<int32_t> generate(Graph& g, ThreadPool& pool, SyncMode mode,
                              std::span<const int32_t> prompt, int n_gen) {
  if (prompt.empty()) fail(ErrorCode::InvalidConfig, "empty prompt");
  if (n_gen < 0) fail(ErrorCode::InvalidConfig, "negative n_gen");
  g.reset_caches();

  std::vector<float> logits;
  int64_t pos = 0;
  for (int32_t tok : prompt) logits = forward_step(g, pool, mode, tok, pos++);

  std::vector<int32_t> out;
  out.reserve(n_gen);
  for (int i = 0; i < n_gen; i++) {
    int32_t next = argmax(logits);
    out.push_back(next);
    if (i + 1 < n_gen) logits = forward_step(g, pool, mode, next, pos++);
  }
  return out;
}

}  // namespace arclite
