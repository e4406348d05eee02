#pragma once

#include <cstddef>
#include <vector>

namespace arclite::numa {

// Platform probes and placement syscalls (mbind / get_mempolicy via
// syscall(2), sysfs topology). Everything degrades: on non-Linux or when the
// kernel refuses, probes report a single node and binding returns false.

// Nodes visible under /sys/devices/system/node; 1 when the probe fails.
int detect_node_count();

// CPUs of one node from its sysfs cpulist; empty when unknown.
std::vector<int> node_cpus(int node);

// True when mbind on a scratch page succeeds, i.e. placement syscalls work.
bool binding_available();

// Bind [p, p+len) to a single node with MPOL_BIND. p and len should be page
// aligned. Returns false on failure.
bool bind_region(void* p, size_t len, int node);

// Node that currently backs the page at p (page must be touched first).
// Returns -1 when the query fails.
int region_node(const void* p);

// Pin the calling thread to one CPU. Returns false on failure.
bool pin_current_thread(int cpu);

}  // namespace arclite::numa
