"""Dispatch layer for the hot numeric kernels.

Imports the numba backend when available (see ``_accel``), the numpy
backend otherwise. Both expose the same functions:

    bessel01(x)                     -> (J0, Y0, J1, Y1)
    hankel01(x)                     -> (H0, H1) complex
    outgoing_kernel_2d(pa, pb, k)   -> -(i/4) H0(k |a-b|) matrix
    outgoing_kernel_3d(pa, pb, k)   -> -exp(ik|a-b|)/(4 pi |a-b|) matrix
    phase_mode_sum(points, xi, c)   -> sum_m c_m exp(i x . xi_m)
    cauchy_sum(targets, src, w)     -> sum_s w_s / (t - s)   (2D complex)
"""

from . import _accel
from ._accel import backend_name  # noqa: F401

if _accel.USE_NUMBA:
    from ._impl_numba import (  # noqa: F401
        bessel01,
        cauchy_sum,
        hankel01,
        outgoing_kernel_2d,
        outgoing_kernel_3d,
        phase_mode_sum,
    )
else:
    from ._impl_numpy import (  # noqa: F401
        bessel01,
        cauchy_sum,
        hankel01,
        outgoing_kernel_2d,
        outgoing_kernel_3d,
        phase_mode_sum,
    )
