#include "arclite/numa.hpp"

#include <cstring>
#include <fstream>
#include <string>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#include <sys/mman.h>
#include <sys/syscall.h>
#include <unistd.h>

// From linux/mempolicy.h; libnuma headers are not a build dependency.
#ifndef MPOL_BIND
#define MPOL_BIND 2
#endif
#ifndef MPOL_F_NODE
#define MPOL_F_NODE (1 << 0)
#endif
#ifndef MPOL_F_ADDR
#define MPOL_F_ADDR (1 << 1)
#endif
#endif  // __linux__

namespace arclite::numa {

namespace {

#ifdef __linux__
long sys_mbind(void* addr, unsigned long len, int mode,
               const unsigned long* nodemask, unsigned long maxnode,
               unsigned flags) {
  return syscall(SYS_mbind, addr, len, mode, nodemask, maxnode, flags);
}

long sys_get_mempolicy(int* mode, unsigned long* nodemask,
                       unsigned long maxnode, void* addr,
                       unsigned long flags) {
  return syscall(SYS_get_mempolicy, mode, nodemask, maxnode, addr, flags);
}
#endif

// Parse a sysfs cpulist such as "0-3,8,10-11".
std::vector<int> parse_cpulist(const std::string& text) {
  std::vector<int> cpus;
  size_t i = 0;
  while (i < text.size()) {
    if (!isdigit(static_cast<unsigned char>(text[i]))) {
      i++;
      continue;
    }
    size_t end;
    int lo = std::stoi(text.substr(i), &end);
    i += end;
    int hi = lo;
    if (i < text.size() && text[i] == '-') {
      i++;
      hi = std::stoi(text.substr(i), &end);
      i += end;
    }
    for (int c = lo; c <= hi; c++) cpus.push_back(c);
  }
  return cpus;
}

}  // namespace

int detect_node_count() {
  int count = 0;
  for (int n = 0;; n++) {
    std::ifstream f("/sys/devices/system/node/node" + std::to_string(n) +
                    "/cpulist");
    if (!f.good()) break;
    count++;
  }
  return count > 0 ? count : 1;
}

std::vector<int> node_cpus(int node) {
  std::ifstream f("/sys/devices/system/node/node" + std::to_string(node) +
                  "/cpulist");
  if (!f.good()) return {};
  std::string line;
  std::getline(f, line);
  return parse_cpulist(line);
}

bool binding_available() {
#ifdef __linux__
  long page = sysconf(_SC_PAGESIZE);
  void* p = mmap(nullptr, page, PROT_READ | PROT_WRITE,
                 MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (p == MAP_FAILED) return false;
  bool ok = bind_region(p, page, 0);
  munmap(p, page);
  return ok;
#else
  return false;
#endif
}

bool bind_region(void* p, size_t len, int node) {
#ifdef __linux__
  if (node < 0 || node >= 64) return false;
  unsigned long mask = 1ul << node;
  return sys_mbind(p, len, MPOL_BIND, &mask, 64, 0) == 0;
#else
  (void)p;
  (void)len;
  (void)node;
  return false;
#endif
}

int region_node(const void* p) {
#ifdef __linux__
  int node = -1;
  if (sys_get_mempolicy(&node, nullptr, 0, const_cast<void*>(p),
                        MPOL_F_NODE | MPOL_F_ADDR) != 0)
    return -1;
  return node;
#else
  (void)p;
  return -1;
#endif
}

bool pin_current_thread(int cpu) {
#ifdef __linux__
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
#else
  (void)cpu;
  return false;
#endif
}

}  // namespace arclite::numa
