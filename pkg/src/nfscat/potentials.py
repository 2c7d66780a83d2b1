"""Potential families used by the experiments.

Three families, all real, compactly supported in the ball of radius r1:

* ``gaussian_bump`` -- Gaussian profile times a smooth cutoff that
  vanishes with all derivatives at |x| = r1 (infinitely smooth family).
* ``poly_bump`` -- amplitude * (1 - (|x-c|/rho)^2)^q, flatness order q
  at the support edge; q tunes the effective smoothness (the Fourier
  tail decays like |p|^{-(q + (d+1)/2)}).
* ``two_bump`` -- two offset poly bumps (breaks radial symmetry).

The declared norm bound is a measured proxy: max|v| plus first/second
finite-difference sups.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .forward import GridPotential


def _grid(d: int, r1: float, n: int):
    c = -r1 + (np.arange(n) + 0.5) * (2.0 * r1 / n)
    return np.meshgrid(*([c] * d), indexing="ij")


def norm_proxy(values: np.ndarray, h: float) -> float:
    """max|v| + sup of first and second finite differences (crude W-norm)."""
    total = float(np.max(np.abs(values), initial=0.0))
    g1 = 0.0
    g2 = 0.0
    for ax in range(values.ndim):
        d1 = np.diff(values, axis=ax) / h
        g1 = max(g1, float(np.max(np.abs(d1), initial=0.0)))
        d2 = np.diff(values, n=2, axis=ax) / (h * h)
        g2 = max(g2, float(np.max(np.abs(d2), initial=0.0)))
    return total + g1 + g2


def _finish(d, r1, r, values, m) -> GridPotential:
    h = 2.0 * r1 / values.shape[0]
    return GridPotential(d, r1, r, values, m, norm_proxy(values, h) + 1e-12)


def smooth_cutoff(t: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - t^2)) on [0, 1), 0 beyond; all derivatives vanish at 1."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def gaussian_bump(
    d: int,
    r1: float,
    r: float,
    n: int,
    amplitude: float,
    width: float | None = None,
    center=None,
    m: float = 8.0,
) -> GridPotential:
    """Smooth bump: Gaussian core times the compact smooth cutoff."""
    if width is None:
        width = 0.35 * r1
    grids = _grid(d, r1, n)
    if center is None:
        center = np.zeros(d)
    center = np.asarray(center, dtype=np.float64)
    if np.linalg.norm(center) >= r1:
        raise DomainError("bump center must lie inside the support ball")
    rho2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    radius = np.sqrt(sum(g * g for g in grids))
    values = amplitude * np.exp(-rho2 / (2.0 * width**2)) * smooth_cutoff(radius / r1)
    return _finish(d, r1, r, values, m)


def effective_m(q: float, d: int) -> float:
    """Smoothness order matching the Fourier tail of the poly family."""
    return q + (d + 1) / 2.0


def poly_bump(
    d: int,
    r1: float,
    r: float,
    n: int,
    amplitude: float,
    q: float = 4.0,
    center=None,
    rho: float | None = None,
) -> GridPotential:
    """(1 - (|x-c|/rho)^2)^q bump, flat to order q at its edge."""
    if q < 1:
        raise DomainError(f"flatness order must be >= 1, got {q}")
    grids = _grid(d, r1, n)
    if center is None:
        center = np.zeros(d)
    center = np.asarray(center, dtype=np.float64)
    if rho is None:
        rho = r1 - float(np.linalg.norm(center))
    if np.linalg.norm(center) + rho > r1 + 1e-12:
        raise DomainError("bump support must stay inside the support ball")
    r2 = sum((g - c) ** 2 for g, c in zip(grids, center)) / (rho * rho)
    values = amplitude * np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** q, 0.0)
    return _finish(d, r1, r, values, effective_m(q, d))


def two_bump(
    d: int,
    r1: float,
    r: float,
    n: int,
    amplitude: float,
    q: float = 4.0,
    separation: float = 0.5,
) -> GridPotential:
    """Two offset poly bumps of opposite-ish weights."""
    off = separation * r1 / 2.0
    c1 = np.zeros(d)
    c1[0] = off
    c2 = np.zeros(d)
    c2[0] = -off
    rho = (r1 - off) * 0.95
    grids = _grid(d, r1, n)
    vals = np.zeros_like(grids[0])
    for cc, amp in ((c1, amplitude), (c2, 0.6 * amplitude)):
        r2 = sum((g - c) ** 2 for g, c in zip(grids, cc)) / (rho * rho)
        vals += amp * np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** q, 0.0)
    return _finish(d, r1, r, vals, effective_m(q, d))


def make_family(descriptor: dict, d: int, r1: float, r: float, n: int) -> GridPotential:
    """Build a potential from a JSON-style descriptor (CLI entry point)."""
    kind = descriptor.get("family", "gaussian")
    amp = float(descriptor.get("amplitude", 1.0))
    if kind == "gaussian":
        return gaussian_bump(
            d, r1, r, n, amp,
            width=descriptor.get("width"),
            center=descriptor.get("center"),
        )
    if kind == "poly":
        return poly_bump(
            d, r1, r, n, amp,
            q=float(descriptor.get("q", 4.0)),
            center=descriptor.get("center"),
            rho=descriptor.get("rho"),
        )
    if kind == "two-bump":
        return two_bump(
            d, r1, r, n, amp,
            q=float(descriptor.get("q", 4.0)),
            separation=float(descriptor.get("separation", 0.5)),
        )
    if kind == "zero":
        return GridPotential(d, r1, r, np.zeros((n,) * d), 8.0, 1e-12)
    raise DomainError(f"unknown potential family {kind!r}")
