#include "conicscan/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef CONICSCAN_HAVE_OPENMP
#include <omp.h>
#endif

namespace conicscan {
namespace {

std::atomic<int> forced{0};

int env_cap() {
  const char* v = std::getenv("CONIC_SCAN_THREADS");
  if (!v) return 0;
  try {
    const int n = std::stoi(v);
    return n > 0 ? n : 0;
  } catch (...) {
    return 0;
  }
}

}  // namespace

int worker_count() {
#ifdef CONICSCAN_HAVE_OPENMP
  if (int f = forced.load(); f > 0) return f;
  int n = omp_get_max_threads();
  if (int cap = env_cap(); cap > 0 && cap < n) n = cap;
  return n < 1 ? 1 : n;
#else
  return 1;
#endif
}

void set_worker_count(int n) { forced.store(n > 0 ? n : 0); }

bool openmp_enabled() {
#ifdef CONICSCAN_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace conicscan
