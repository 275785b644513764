#include "jsdm/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>

namespace jsdm {
namespace {

std::atomic<int> g_override{0};

int environment_cap() {
  if (const char* cap = std::getenv("JSDM_ODDS_THREADS")) {
    try {
      const int c = std::stoi(cap);
      if (c > 0) return c;
    } catch (const std::exception&) {
      // unparsable cap: ignore
    }
  }
  return 0;
}

}  // namespace

int worker_count() {
  const int o = g_override.load();
  int n = o > 0 ? o : omp_get_max_threads();
  if (const int cap = environment_cap(); cap > 0) n = std::min(n, cap);
  return std::max(n, 1);
}

void set_worker_count(int n) { g_override.store(std::max(n, 0)); }

}  // namespace jsdm
