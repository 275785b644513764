#pragma once

namespace jsdm {

/// Worker count for OpenMP regions: omp_get_max_threads() (or the override) capped by JSDM_ODDS_THREADS.
int worker_count();

/// Overrides the OpenMP default (0 restores it). JSDM_ODDS_THREADS still caps the result.
void set_worker_count(int n);

}  // namespace jsdm
