#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "arclite/error.hpp"

namespace arclite {

class ThreadPool;

// Per-worker handle passed to submitted programs. Group views are read
// through the pool's current tables, so a reconfigure between (or inside)
// programs changes what these return.
class WorkerContext {
 public:
  int rank() const { return rank_; }
  int pool_size() const;
  int group() const;
  int group_rank() const;
  int group_size() const;
  int group_count() const;

  // Rendezvous of this worker's group.
  void local_barrier();
  // Rendezvous of the whole pool.
  void global_barrier();
  // Collective: every worker must call with identical sizes. Internally
  // global barrier, table swap by rank 0, global barrier; local barriers
  // are rebuilt, so no worker may be between local rendezvous.
  void reconfigure_groups(std::span<const int> sizes);

 private:
  friend class ThreadPool;
  WorkerContext(ThreadPool* pool, int rank) : pool_(pool), rank_(rank) {}
  ThreadPool* pool_;
  int rank_;
};

using PoolProgram = std::function<void(WorkerContext&)>;
using GroupTask = std::function<void(WorkerContext&)>;

// Fixed set of workers partitioned into logical groups by contiguous rank
// ranges. Workers park on a futex between programs; barriers spin briefly
// then park, which keeps oversubscribed pools (more workers than cores)
// cheap. A throwing worker poisons the pool: all barriers are released, every
// other worker unwinds, and the submitting thread gets the first exception.
// A poisoned pool rejects further submissions.
class ThreadPool {
 public:
  // pin_cpus, when non-empty, must hold one CPU id per worker. Pinning
  // failure is not fatal: the pool warns once and runs unpinned.
  explicit ThreadPool(int threads, std::vector<int> pin_cpus = {});
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return size_; }
  bool pinned() const { return pinned_; }
  bool poisoned() const {
    return poisoned_.load(std::memory_order_acquire);
  }
  int group_count() const { return static_cast<int>(group_sizes_.size()); }
  const std::vector<int>& group_sizes() const { return group_sizes_; }

  // Replace the group partition. Only legal while no program is running.
  // Sizes must be positive and sum to size().
  void reconfigure(std::span<const int> sizes);

  // Run one SPMD program on every worker; returns when all finish. Rethrows
  // the first worker exception after the pool drains.
  void run(PoolProgram program);

  // Run one task per group; tasks.size() must equal group_count(). Each
  // worker executes the task of its group; returns when all groups finish.
  void run_on_groups(std::vector<GroupTask> tasks);

 private:
  friend class WorkerContext;

  struct Barrier {
    std::atomic<uint32_t> arrivals{0};
    std::atomic<uint32_t> generation{0};
    uint32_t participants = 0;
  };

  void worker_main(int rank);
  void barrier_wait(Barrier& b);
  void poison(std::exception_ptr e);
  void apply_groups(std::span<const int> sizes);
  void reconfigure_collective(int rank, std::span<const int> sizes);

  int size_;
  bool pinned_ = false;
  std::vector<std::thread> workers_;

  // Program dispatch. epoch_ bumps per submission; workers park on it.
  std::atomic<uint64_t> epoch_{0};
  std::atomic<uint32_t> active_{0};
  std::atomic<bool> stop_{false};
  PoolProgram program_;

  Barrier global_;
  std::vector<std::unique_ptr<Barrier>> local_;
  std::vector<int> group_sizes_;
  std::vector<int> group_of_;
  std::vector<int> group_rank_of_;

  std::atomic<bool> poisoned_{false};
  std::mutex error_mu_;
  std::exception_ptr first_error_;
};

}  // namespace arclite
