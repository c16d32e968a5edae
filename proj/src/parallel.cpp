#include "gne/parallel.hpp"

#include "gne/log.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace gne {

int configure_threads() {
  if (const char* env = std::getenv("GNE_ESC_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0)
      omp_set_num_threads(static_cast<int>(n));
    else
      log_warning(std::string("ignoring GNE_ESC_THREADS='") + env + "' (expected a positive integer)");
  }
  return thread_count();
}

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace gne
