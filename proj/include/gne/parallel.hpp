#pragma once

namespace gne {

// Applies GNE_ESC_THREADS (a positive integer) as the OpenMP thread cap and
// returns the number of threads parallel regions will use.
int configure_threads();
int thread_count();
void set_thread_count(int n);

}  // namespace gne
