"""Network econometrics toolkit."""

import numba

# prefer OpenMP or the built-in queue; an old TBB library otherwise warns at first use
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"
