"""Special functions: Hankel functions of the first kind, real spherical
harmonics on the circle and sphere, and the radiating point-source kernel.

Hankel functions are evaluated from an order-0/1 (integer) or order
1/2, 3/2 (half-integer) seed by upward recurrence

    H_{mu+1}(x) = (2 mu / x) H_mu(x) - H_{mu-1}(x),

which tracks the dominant solution and is accurate to ~1e-12 relative
for the orders used here (mu <= ~60 at desk energies). The seeds come
from the series/asymptotic engine in :mod:`nfscat.kernels`; half-integer
seeds are closed forms.

Real harmonics: on the circle {1/sqrt(2 pi)} and {cos j t, sin j t} /
sqrt(pi); on the sphere, fully normalized associated Legendre recurrence
with {sqrt(2) cos m phi, 1, sqrt(2) sin m phi} azimuthal factors. Both
families are orthonormal on the unit sphere S^{d-1}; the multiplicity of
degree j is ``harmonic_dim(d, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, SingularityError

EULER_GAMMA = 0.5772156649015328606


# ---------------------------------------------------------------------------
# Hankel functions
# ---------------------------------------------------------------------------
def _check_arg(arg: float) -> float:
    arg = float(arg)
    if not arg > 0.0:
        raise DomainError(f"argument must be positive, got {arg}")
    return arg


def _order_steps(order: float) -> tuple[int, bool]:
    """Map an admissible order to (#recurrence steps, half-integer flag)."""
    order = float(order)
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    twice = 2.0 * order
    if abs(twice - round(twice)) > 1e-12:
        raise DomainError(f"order must be integer or half-integer, got {order}")
    twice = int(round(twice))
    if twice % 2 == 0:
        return twice // 2, False
    return (twice - 1) // 2, True


def hankel1_ladder(nsteps: int, arg: float, half: bool) -> np.ndarray:
    """H^(1) at orders mu = j (+ 1/2 if ``half``) for j = 0..nsteps."""
    x = _check_arg(arg)
    out = np.empty(nsteps + 1, dtype=np.complex128)
    if not half:
        h0, h1 = kernels.hankel01(np.array([x]))
        prev, cur = complex(h0[0]), complex(h1[0])
        if nsteps == 0:
            return np.array([prev])
        out[0], out[1] = prev, cur
        for n in range(1, nsteps):
            prev, cur = cur, (2.0 * n / x) * cur - prev
            out[n + 1] = cur
        return out
    pref = np.sqrt(2.0 / (np.pi * x))
    h_minus = pref * np.exp(1j * x)  # order -1/2
    h_half = -1j * h_minus  # order 1/2
    out[0] = h_half
    if nsteps == 0:
        return out
    out[1] = (1.0 / x) * h_half - h_minus  # order 3/2
    prev, cur = h_half, out[1]
    for n in range(1, nsteps):
        mu = n + 0.5
        prev, cur = cur, (2.0 * mu / x) * cur - prev
        out[n + 1] = cur
    return out


def hankel1(order: float, arg: float) -> complex:
    """Hankel function of the first kind H^(1)_order(arg), arg > 0."""
    steps, half = _order_steps(order)
    return complex(hankel1_ladder(steps, arg, half)[steps])


def hankel1_deriv(order: float, arg: float) -> complex:
    """d/dx H^(1)_order(x); order 0 returns -H^(1)_1(x) exactly."""
    x = _check_arg(arg)
    steps, half = _order_steps(order)
    if not half and steps == 0:
        return -hankel1(1.0, x)
    ladder = hankel1_ladder(steps, x, half)
    mu = steps + (0.5 if half else 0.0)
    if steps >= 1:
        h_lower = ladder[steps - 1]
    else:
        # order 1/2: lower neighbour is the closed-form order -1/2
        h_lower = np.sqrt(2.0 / (np.pi * x)) * np.exp(1j * x)
    return complex(h_lower - (mu / x) * ladder[steps])


# ---------------------------------------------------------------------------
# Spherical harmonics
# ---------------------------------------------------------------------------
def _binom_desc(n: int, k: int) -> int:
    """n(n-1)...(n-k+1)/k! for n >= 0, and 0 for n < 0."""
    if n < 0:
        return 0
    num = 1
    for i in range(k):
        num *= n - i
    den = 1
    for i in range(1, k + 1):
        den *= i
    return num // den if num % den == 0 else num // den


def harmonic_dim(d: int, j: int) -> int:
    """Multiplicity of degree-j harmonics on S^{d-1}."""
    if d not in (2, 3):
        raise DomainError(f"dimension must be 2 or 3, got {d}")
    if j < 0:
        raise DomainError(f"degree must be >= 0, got {j}")
    return _binom_desc(j + d - 1, d - 1) - _binom_desc(j + d - 3, d - 1)


def _legendre_block(jmax: int, t: np.ndarray) -> np.ndarray:
    """Fully normalized associated Legendre P-bar[j, m] at t = cos(theta).

    Returns array of shape (jmax+1, jmax+1, len(t)); entries with m > j
    are zero. Normalization: int_{S^2} (Pbar_jm * azimuth factor)^2 = 1.
    """
    t = np.asarray(t, dtype=np.float64)
    s = np.sqrt(np.maximum(0.0, 1.0 - t * t))
    p = np.zeros((jmax + 1, jmax + 1, t.shape[0]))
    p[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, jmax + 1):
        p[m, m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * p[m - 1, m - 1]
    for m in range(0, jmax):
        p[m + 1, m] = np.sqrt(2.0 * m + 3.0) * t * p[m, m]
    for m in range(0, jmax + 1):
        for j in range(m + 2, jmax + 1):
            a = np.sqrt((4.0 * j * j - 1.0) / (j * j - m * m))
            b = np.sqrt(((j - 1.0) ** 2 - m * m) / (4.0 * (j - 1.0) ** 2 - 1.0))
            p[j, m] = a * (t * p[j - 1, m] - b * p[j - 2, m])
    return p


def eval_harmonic_block(d: int, jmax: int, dirs: np.ndarray) -> np.ndarray:
    """All basis values f_jp at unit directions.

    Returns shape (n_dirs, n_modes) with modes ordered by degree j, then
    index p = 1..harmonic_dim(d, j). Orthonormal on the unit sphere.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    n = dirs.shape[0]
    cols = []
    if d == 2:
        theta = np.arctan2(dirs[:, 1], dirs[:, 0])
        cols.append(np.full(n, 1.0 / np.sqrt(2.0 * np.pi)))
        for j in range(1, jmax + 1):
            cols.append(np.cos(j * theta) / np.sqrt(np.pi))
            cols.append(np.sin(j * theta) / np.sqrt(np.pi))
        return np.column_stack(cols)
    if d == 3:
        t = np.clip(dirs[:, 2], -1.0, 1.0)
        phi = np.arctan2(dirs[:, 1], dirs[:, 0])
        p = _legendre_block(jmax, t)
        for j in range(jmax + 1):
            cols.append(p[j, 0].copy())
            for m in range(1, j + 1):
                cols.append(np.sqrt(2.0) * p[j, m] * np.cos(m * phi))
                cols.append(np.sqrt(2.0) * p[j, m] * np.sin(m * phi))
        return np.column_stack(cols)
    raise DomainError(f"dimension must be 2 or 3, got {d}")


def eval_harmonic(d: int, j: int, p: int, direction) -> float:
    """Basis function f_jp at a unit direction."""
    pj = harmonic_dim(d, j)
    if not 1 <= p <= pj:
        raise DomainError(f"index p={p} out of range 1..{pj} for degree {j}")
    direction = np.asarray(direction, dtype=np.float64)
    nrm = np.linalg.norm(direction)
    if not np.isclose(nrm, 1.0, atol=1e-8):
        raise DomainError(f"direction must be a unit vector, |dir| = {nrm}")
    block = eval_harmonic_block(d, j, direction / nrm)
    offset = sum(harmonic_dim(d, jj) for jj in range(j))
    return float(block[0, offset + p - 1])


def mode_degrees(d: int, jmax: int) -> np.ndarray:
    """Degree j of each column of :func:`eval_harmonic_block`."""
    return np.concatenate(
        [np.full(harmonic_dim(d, j), j, dtype=np.int64) for j in range(jmax + 1)]
    )


@dataclass(frozen=True)
class HarmonicBasisSpec:
    """Descriptor of the truncated harmonic basis used by a computation."""

    d: int
    max_degree: int
    multiplicities: tuple[int, ...] = field(default=())

    def __post_init__(self):
        mults = tuple(harmonic_dim(self.d, j) for j in range(self.max_degree + 1))
        object.__setattr__(self, "multiplicities", mults)

    @property
    def n_modes(self) -> int:
        return int(sum(self.multiplicities))


# ---------------------------------------------------------------------------
# Radiating point-source kernel
# ---------------------------------------------------------------------------
def free_green(d: int, energy: float, x, y) -> complex:
    """Outgoing point-source kernel between x and y at the given energy.

    d=2: -(i/4) H0(sqrt(E) |x-y|);  d=3: -exp(i sqrt(E) s)/(4 pi s).
    """
    if d not in (2, 3):
        raise DomainError(f"dimension must be 2 or 3, got {d}")
    if not energy > 0:
        raise DomainError(f"energy must be positive, got {energy}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    s = float(np.linalg.norm(x - y))
    if s == 0.0:
        raise SingularityError("free_green evaluated at coincident points")
    ke = np.sqrt(energy)
    if d == 2:
        return complex(-0.25j * hankel1(0.0, ke * s))
    return complex(-np.exp(1j * ke * s) / (4.0 * np.pi * s))
