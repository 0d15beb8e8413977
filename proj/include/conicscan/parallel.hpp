#pragma once

namespace conicscan {

/// Worker threads the parallel kernels use: the OpenMP default, capped by the
/// CONIC_SCAN_THREADS environment variable when it holds a positive integer.
/// Always 1 without OpenMP.
int worker_count();

/// Override worker_count() for the rest of the process (0 restores the default).
void set_worker_count(int n);

bool openmp_enabled();

}  // namespace conicscan
