"""Backend selection for the hot numeric kernels.

Every hot kernel has two implementations: numba ``@njit`` loops
(`_impl_numba`) and vectorized numpy (`_impl_numpy`). The numba path is
used when numba imports cleanly and ``NFSCAT_DISABLE_NUMBA`` is unset
(or set to 0/false). ``benchmarks/bench_kernels.py`` times both paths.
"""

import os


def _numba_requested() -> bool:
    flag = os.environ.get("NFSCAT_DISABLE_NUMBA", "0").strip().lower()
    return flag in ("", "0", "false", "no")


NUMBA_AVAILABLE = False
if _numba_requested():
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
