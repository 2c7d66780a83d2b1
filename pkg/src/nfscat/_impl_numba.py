"""Numba ``@njit`` implementations of the hot kernels.

Same algorithms as ``_impl_numpy`` (ascending series / Hankel expansion
split at x = 12, fused kernel assembly); scalar inner loops with
``prange`` over the outer dimension. The two backends are held to
1e-13 agreement by tests/test_kernels.py.
"""

import numpy as np
from numba import njit, prange

EULER_GAMMA = 0.5772156649015328606
X_SPLIT = 12.0


@njit(cache=True)
def _bessel01_scalar(x):
    if x <= X_SPLIT:
        q = 0.25 * x * x
        j0t = 1.0
        j0s = 1.0
        j1t = 1.0
        j1s = 1.0
        s0t = 1.0
        s0 = 0.0
        s1t = 1.0
        s1 = 1.0
        hk = 0.0
        for k in range(1, 61):
            j0t *= -q / (k * k)
            j0s += j0t
            j1t *= -q / (k * (k + 1))
            j1s += j1t
            hk += 1.0 / k
            s0t *= -q / (k * k)
            s0 -= s0t * hk
            s1t *= -q / (k * (k + 1))
            s1 += s1t * (2.0 * hk + 1.0 / (k + 1))
            if abs(j0t) < 1e-19 and abs(s1t) < 1e-19:
                break
        j0 = j0s
        j1 = 0.5 * x * j1s
        lg = np.log(0.5 * x) + EULER_GAMMA
        y0 = (2.0 / np.pi) * (lg * j0 + s0)
        y1 = (2.0 / np.pi) * (lg * j1 - 1.0 / x - 0.25 * x * s1)
        return j0, y0, j1, y1
    h0 = _hankel_asym_scalar(0.0, x)
    h1 = _hankel_asym_scalar(1.0, x)
    return h0.real, h0.imag, h1.real, h1.imag


@njit(cache=True)
def _hankel_asym_scalar(mu, x):
    pref = np.sqrt(2.0 / (np.pi * x)) * np.exp(1j * (x - mu * np.pi / 2 - np.pi / 4))
    fourmu2 = 4.0 * mu * mu
    total = 1.0 + 0j
    a = 1.0
    prev = 1.0
    ik = 1.0 + 0j
    for k in range(1, 41):
        a *= (fourmu2 - (2 * k - 1) ** 2) / (8.0 * k * x)
        ik *= 1j
        mag = abs(a)
        if mag >= prev:
            break
        total += ik * a
        prev = mag
        if mag < 1e-18:
            break
    return pref * total


@njit(cache=True, parallel=True)
def _bessel01_array(x, j0, y0, j1, y1):
    for i in prange(x.shape[0]):
        a, b, c, d = _bessel01_scalar(x[i])
        j0[i] = a
        y0[i] = b
        j1[i] = c
        y1[i] = d


def bessel01(x):
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape
    flat = np.atleast_1d(x).ravel()
    j0 = np.empty_like(flat)
    y0 = np.empty_like(flat)
    j1 = np.empty_like(flat)
    y1 = np.empty_like(flat)
    _bessel01_array(flat, j0, y0, j1, y1)
    return j0.reshape(shape), y0.reshape(shape), j1.reshape(shape), y1.reshape(shape)


def hankel01(x):
    j0, y0, j1, y1 = bessel01(x)
    return j0 + 1j * y0, j1 + 1j * y1


@njit(cache=True, parallel=True)
def _outgoing_2d(pa, pb, sqrt_e, out):
    for i in prange(pa.shape[0]):
        for j in range(pb.shape[0]):
            dx = pa[i, 0] - pb[j, 0]
            dy = pa[i, 1] - pb[j, 1]
            r = np.sqrt(dx * dx + dy * dy)
            if r > 0.0:
                j0, y0, _, _ = _bessel01_scalar(sqrt_e * r)
                out[i, j] = -0.25j * (j0 + 1j * y0)
            else:
                out[i, j] = 0.0


@njit(cache=True, parallel=True)
def _outgoing_2d_sym(pts, sqrt_e, out):
    n = pts.shape[0]
    for i in prange(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            r = np.sqrt(dx * dx + dy * dy)
            if r > 0.0:
                j0, y0, _, _ = _bessel01_scalar(sqrt_e * r)
                val = -0.25j * (j0 + 1j * y0)
            else:
                val = 0.0 + 0.0j
            out[i, j] = val
            out[j, i] = val


def outgoing_kernel_2d(pa, pb, sqrt_e):
    pa = np.ascontiguousarray(pa, dtype=np.float64)
    pb = np.ascontiguousarray(pb, dtype=np.float64)
    out = np.empty((pa.shape[0], pb.shape[0]), dtype=np.complex128)
    if pa is pb or (pa.shape == pb.shape and np.shares_memory(pa, pb)):
        _outgoing_2d_sym(pa, float(sqrt_e), out)
    else:
        _outgoing_2d(pa, pb, float(sqrt_e), out)
    return out


@njit(cache=True, parallel=True)
def _outgoing_3d(pa, pb, sqrt_e, out):
    for i in prange(pa.shape[0]):
        for j in range(pb.shape[0]):
            dx = pa[i, 0] - pb[j, 0]
            dy = pa[i, 1] - pb[j, 1]
            dz = pa[i, 2] - pb[j, 2]
            r = np.sqrt(dx * dx + dy * dy + dz * dz)
            if r > 0.0:
                out[i, j] = -np.exp(1j * sqrt_e * r) / (4.0 * np.pi * r)
            else:
                out[i, j] = 0.0


def outgoing_kernel_3d(pa, pb, sqrt_e):
    out = np.empty((pa.shape[0], pb.shape[0]), dtype=np.complex128)
    _outgoing_3d(
        np.ascontiguousarray(pa, dtype=np.float64),
        np.ascontiguousarray(pb, dtype=np.float64),
        float(sqrt_e),
        out,
    )
    return out


@njit(cache=True, parallel=True)
def _phase_mode_sum(points, freqs, coeffs, out):
    for i in prange(points.shape[0]):
        acc = 0.0 + 0.0j
        for m in range(freqs.shape[0]):
            ph = 0.0
            for d in range(points.shape[1]):
                ph += points[i, d] * freqs[m, d]
            acc += coeffs[m] * np.exp(1j * ph)
        out[i] = acc


def phase_mode_sum(points, freqs, coeffs, chunk=512):
    points = np.ascontiguousarray(points, dtype=np.float64)
    out = np.empty(points.shape[0], dtype=np.complex128)
    _phase_mode_sum(
        points,
        np.ascontiguousarray(freqs, dtype=np.float64),
        np.ascontiguousarray(coeffs, dtype=np.complex128),
        out,
    )
    return out


@njit(cache=True, parallel=True)
def _cauchy_sum(targets, sources, weighted, out):
    for i in prange(targets.shape[0]):
        acc = 0.0 + 0.0j
        t = targets[i]
        for s in range(sources.shape[0]):
            d = t - sources[s]
            if d != 0.0:
                acc += weighted[s] / d
        out[i] = acc


def cauchy_sum(targets, sources, weighted, chunk=256):
    targets = np.ascontiguousarray(np.ravel(targets), dtype=np.complex128)
    out = np.empty(targets.shape[0], dtype=np.complex128)
    _cauchy_sum(
        targets,
        np.ascontiguousarray(np.ravel(sources), dtype=np.complex128),
        np.ascontiguousarray(np.ravel(weighted), dtype=np.complex128),
        out,
    )
    return out
