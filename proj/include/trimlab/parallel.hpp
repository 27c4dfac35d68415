#pragma once
#include <cstdlib>
#ifdef _OPENMP
#include <omp.h>
#endif

namespace trimlab {

// Worker count resolution: explicit request, then TRIMLAB_WORKERS, then the
// OpenMP default. Results never depend on the value, only wall time does.
inline int effective_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TRIMLAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace trimlab
