#include "arclite/threading.hpp"

#include <cstdio>
#include <string>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

namespace arclite {

namespace {

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#else
  std::this_thread::yield();
#endif
}

}  // namespace

int WorkerContext::pool_size() const { return pool_->size(); }
int WorkerContext::group() const { return pool_->group_of_[rank_]; }
int WorkerContext::group_rank() const { return pool_->group_rank_of_[rank_]; }
int WorkerContext::group_size() const {
  return pool_->group_sizes_[pool_->group_of_[rank_]];
}
int WorkerContext::group_count() const { return pool_->group_count(); }

void WorkerContext::local_barrier() {
  pool_->barrier_wait(*pool_->local_[pool_->group_of_[rank_]]);
}

void WorkerContext::global_barrier() { pool_->barrier_wait(pool_->global_); }

void WorkerContext::reconfigure_groups(std::span<const int> sizes) {
  pool_->reconfigure_collective(rank_, sizes);
}

ThreadPool::ThreadPool(int threads, std::vector<int> pin_cpus)
    : size_(threads) {
  if (threads < 1) fail(ErrorCode::InvalidConfig, "pool needs >= 1 thread");
  if (!pin_cpus.empty() && pin_cpus.size() != static_cast<size_t>(threads))
    fail(ErrorCode::InvalidConfig, "pin list size must match thread count");

  global_.participants = static_cast<uint32_t>(threads);
  std::vector<int> all(1, threads);
  apply_groups(all);

  workers_.reserve(threads);
  for (int r = 0; r < threads; r++)
    workers_.emplace_back([this, r] { worker_main(r); });

  if (!pin_cpus.empty()) {
    pinned_ = true;
#ifdef __linux__
    for (int r = 0; r < threads; r++) {
      cpu_set_t set;
      CPU_ZERO(&set);
      CPU_SET(pin_cpus[r], &set);
      if (pthread_setaffinity_np(workers_[r].native_handle(), sizeof(set),
                                 &set) != 0) {
        pinned_ = false;
      }
    }
#else
    pinned_ = false;
#endif
    if (!pinned_)
      std::fprintf(stderr,
                   "warning: core pinning unavailable, running unpinned\n");
  }
}

ThreadPool::~ThreadPool() {
  stop_.store(true, std::memory_order_release);
  epoch_.fetch_add(1, std::memory_order_release);
  epoch_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::worker_main(int rank) {
  uint64_t seen = 0;
  for (;;) {
    uint64_t e;
    while ((e = epoch_.load(std::memory_order_acquire)) == seen)
      epoch_.wait(seen);
    seen = e;
    if (stop_.load(std::memory_order_acquire)) return;

    WorkerContext ctx(this, rank);
    try {
      program_(ctx);
    } catch (...) {
      poison(std::current_exception());
    }
    if (active_.fetch_sub(1, std::memory_order_acq_rel) == 1)
      active_.notify_all();
  }
}

void ThreadPool::poison(std::exception_ptr e) {
  {
    std::lock_guard<std::mutex> lk(error_mu_);
    if (!first_error_) first_error_ = e;
  }
  poisoned_.store(true, std::memory_order_release);
  // Release every parked waiter. The generation bump is a lie, but each
  // woken worker checks the poison flag and unwinds instead of continuing.
  auto wake = [](Barrier& b) {
    b.generation.fetch_add(1, std::memory_order_release);
    b.generation.notify_all();
  };
  wake(global_);
  for (auto& b : local_) wake(*b);
}

void ThreadPool::barrier_wait(Barrier& b) {
  uint32_t gen = b.generation.load(std::memory_order_acquire);
  if (b.arrivals.fetch_add(1, std::memory_order_acq_rel) + 1 ==
      b.participants) {
    b.arrivals.store(0, std::memory_order_relaxed);
    b.generation.fetch_add(1, std::memory_order_release);
    b.generation.notify_all();
  } else {
    int spins = 0;
    while (b.generation.load(std::memory_order_acquire) == gen) {
      if (poisoned_.load(std::memory_order_acquire))
        fail(ErrorCode::PoolPoisoned, "barrier abandoned");
      if (++spins > 64) b.generation.wait(gen);
    }
  }
  if (poisoned_.load(std::memory_order_acquire))
    fail(ErrorCode::PoolPoisoned, "pool failed during rendezvous");
}

void ThreadPool::apply_groups(std::span<const int> sizes) {
  if (sizes.empty()) fail(ErrorCode::InvalidConfig, "no groups");
  int total = 0;
  for (int s : sizes) {
    if (s < 1) fail(ErrorCode::InvalidConfig, "group sizes must be >= 1");
    total += s;
  }
  if (total != size_)
    fail(ErrorCode::InvalidConfig,
         "group sizes sum to " + std::to_string(total) + ", pool has " +
             std::to_string(size_));

  group_sizes_.assign(sizes.begin(), sizes.end());
  group_of_.assign(size_, 0);
  group_rank_of_.assign(size_, 0);
  local_.clear();
  int rank = 0;
  for (size_t g = 0; g < group_sizes_.size(); g++) {
    auto b = std::make_unique<Barrier>();
    b->participants = static_cast<uint32_t>(group_sizes_[g]);
    local_.push_back(std::move(b));
    for (int i = 0; i < group_sizes_[g]; i++, rank++) {
      group_of_[rank] = static_cast<int>(g);
      group_rank_of_[rank] = i;
    }
  }
}

void ThreadPool::reconfigure(std::span<const int> sizes) {
  if (active_.load(std::memory_order_acquire) != 0)
    fail(ErrorCode::PoolBusy, "reconfigure while a program is running");
  if (poisoned()) fail(ErrorCode::PoolPoisoned, "pool previously failed");
  apply_groups(sizes);
}

void ThreadPool::reconfigure_collective(int rank,
                                        std::span<const int> sizes) {
  // Workers parked at the second barrier never read group tables, so the
  // swap by rank 0 is ordered against every reader.
  barrier_wait(global_);
  if (rank == 0) apply_groups(sizes);
  barrier_wait(global_);
}

void ThreadPool::run(PoolProgram program) {
  if (poisoned()) fail(ErrorCode::PoolPoisoned, "pool previously failed");
  if (active_.load(std::memory_order_acquire) != 0)
    fail(ErrorCode::PoolBusy, "program already running");

  program_ = std::move(program);
  active_.store(static_cast<uint32_t>(size_), std::memory_order_release);
  epoch_.fetch_add(1, std::memory_order_release);
  epoch_.notify_all();

  for (uint32_t a; (a = active_.load(std::memory_order_acquire)) != 0;)
    active_.wait(a);

  if (poisoned()) {
    std::exception_ptr e;
    {
      std::lock_guard<std::mutex> lk(error_mu_);
      e = first_error_;
    }
    if (e) std::rethrow_exception(e);
    fail(ErrorCode::PoolPoisoned, "pool failed");
  }
}

void ThreadPool::run_on_groups(std::vector<GroupTask> tasks) {
  if (tasks.size() != group_sizes_.size())
    fail(ErrorCode::InvalidConfig,
         "got " + std::to_string(tasks.size()) + " tasks for " +
             std::to_string(group_sizes_.size()) + " groups");
  auto shared = std::make_shared<std::vector<GroupTask>>(std::move(tasks));
  run([shared](WorkerContext& ctx) { (*shared)[ctx.group()](ctx); });
}

}  // namespace arclite
