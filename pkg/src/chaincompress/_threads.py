"""Honor the thread-count override before numpy loads its BLAS."""

import os

_VAR = "CHAINCOMPRESS_THREADS"


def apply_thread_env():
    value = os.environ.get(_VAR)
    if not value:
        return
    for knob in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(knob, value)


apply_thread_env()
