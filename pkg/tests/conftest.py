import os

# tiny dense matrices everywhere; BLAS threading only adds contention,
# especially under the parallel benchmark criteria (set before numpy loads)
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
