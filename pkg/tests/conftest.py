import os

# Single-threaded BLAS keeps small-matrix timings stable and results
# independent of the host's core count. Must happen before numpy loads.
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

from hypothesis import settings

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")
