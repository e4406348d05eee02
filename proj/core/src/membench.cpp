#include "arclite/membench.hpp"

#include <chrono>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <thread>

#include "arclite/kernels.hpp"
#include "arclite/numa.hpp"

#ifdef __linux__
#include <sys/mman.h>
#endif

namespace arclite {

namespace {

// Sums a stripe as u64 lanes, eight at a time. The checksum is returned so
// the reads cannot be optimized away.
uint64_t read_stripe(const uint64_t* p, size_t words) {
  uint64_t a = 0, b = 0, c = 0, d = 0;
  size_t i = 0;
  for (; i + 8 <= words; i += 8) {
    a += p[i] + p[i + 4];
    b += p[i + 1] + p[i + 5];
    c += p[i + 2] + p[i + 6];
    d += p[i + 3] + p[i + 7];
  }
  for (; i < words; i++) a += p[i];
  return a + b + c + d;
}

struct Probe {
  double seconds = 0;
  uint64_t checksum = 0;
};

Probe run_probe(const uint64_t* buf, size_t words, int threads, int repeats,
                const std::vector<int>& cpus) {
  std::vector<std::thread> crew;
  std::vector<uint64_t> sums(threads, 0);
  auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < threads; t++) {
    crew.emplace_back([&, t] {
      if (!cpus.empty()) numa::pin_current_thread(cpus[t % cpus.size()]);
      auto s = kernels::row_slice(static_cast<int64_t>(words), threads, t);
      uint64_t sum = 0;
      for (int r = 0; r < repeats; r++)
        sum += read_stripe(buf + s.begin, static_cast<size_t>(s.size()));
      sums[t] = sum;
    });
  }
  for (auto& th : crew) th.join();
  auto end = std::chrono::steady_clock::now();
  Probe p;
  p.seconds = std::chrono::duration<double>(end - start).count();
  for (uint64_t s : sums) p.checksum += s;
  return p;
}

}  // namespace

BandwidthResult measure_bandwidth(const NodeLayout& layout,
                                  size_t buffer_bytes, int threads,
                                  int repeats) {
  if (buffer_bytes < (1u << 20))
    fail(ErrorCode::InvalidConfig, "buffer must be at least 1 MiB");
  if (repeats < 1) fail(ErrorCode::InvalidConfig, "repeats must be >= 1");

  BandwidthResult out;
  out.mode = layout.mode;
  out.nodes =
      layout.mode == NumaMode::Real && layout.node_count > 1
          ? layout.node_count
          : 1;
  out.gbps.assign(static_cast<size_t>(out.nodes) * out.nodes, 0.0);

#ifdef __linux__
  for (int mem = 0; mem < out.nodes; mem++) {
    void* raw = mmap(nullptr, buffer_bytes, PROT_READ | PROT_WRITE,
                     MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if (raw == MAP_FAILED) fail(ErrorCode::OutOfMemory, "buffer mapping");
    if (out.mode == NumaMode::Real &&
        !numa::bind_region(raw, buffer_bytes, mem)) {
      munmap(raw, buffer_bytes);
      fail(ErrorCode::NumaUnavailable,
           "mbind to node " + std::to_string(mem) + " failed");
    }
    std::memset(raw, 0x5A, buffer_bytes);  // first touch after binding

    auto buf = static_cast<const uint64_t*>(raw);
    size_t words = buffer_bytes / 8;
    for (int core = 0; core < out.nodes; core++) {
      std::vector<int> cpus;
      if (out.mode == NumaMode::Real) cpus = layout.node_cores[core];
      int n = threads > 0 ? threads
              : cpus.empty() ? 1
                             : static_cast<int>(cpus.size());
      // Warm pass, then the measured pass.
      run_probe(buf, words, n, 1, cpus);
      Probe p = run_probe(buf, words, n, repeats, cpus);
      double bytes = static_cast<double>(buffer_bytes) * repeats;
      out.gbps[static_cast<size_t>(core) * out.nodes + mem] =
          bytes / p.seconds / 1e9;
    }
    munmap(raw, buffer_bytes);
  }
#else
  fail(ErrorCode::NumaUnavailable, "bandwidth probe requires linux");
#endif
  return out;
}

std::string format_bandwidth(const BandwidthResult& r) {
  std::ostringstream os;
  os << "sequential read bandwidth, GB/s ("
     << numa_mode_name(r.mode) << " mode)\n";
  os << "cores\\mem   ";
  for (int m = 0; m < r.nodes; m++) {
    os << "  node " << m;
    if (m + 1 < r.nodes) os << "  ";
  }
  os << "\n";
  for (int c = 0; c < r.nodes; c++) {
    char row[32];
    std::snprintf(row, sizeof(row), "node %-6d", c);
    os << row;
    for (int m = 0; m < r.nodes; m++) {
      char cell[32];
      std::snprintf(cell, sizeof(cell), "%9.2f", r.at(c, m));
      os << cell;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace arclite
