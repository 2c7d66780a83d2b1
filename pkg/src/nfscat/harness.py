"""Connective machinery: global solutions with normal-derivative jumps,
the interior/boundary bilinear identity, data-side amplitude estimation,
band-limited Born inversion, parameter selection, and stability sweeps.

A *global solution* is an interior solution of (-lap + v) phi = E phi
glued to the radiating exterior extension of its boundary trace. The
trace is continuous; the normal derivative jumps. For two potentials
with data matrices S1, S2 the identity

    int_{B_r} (v2 - v1) phi1 phi2
        = int jump1 . [(S2hat - S1hat) jump2]

holds (jump = exterior minus interior normal derivative; the free parts
of the data operators cancel). With exponentially growing probes the
right side estimates amplitude differences from data alone; restricted
to a frequency ball and synthesized back it yields a band-limited
approximation of v2 - v1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import buckhgeim, exterior, faddeev, forward
from .errors import (
    ConstraintError,
    DomainError,
    MeshMismatchError,
    RejectedInteriorError,
)
from .forward import BoundaryMesh, GridPotential, NearFieldMatrix, data_norm_diff

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Interior fields
# ---------------------------------------------------------------------------
class AnalyticInterior:
    """Interior field given by a closed-form evaluator (Born probes)."""

    def __init__(self, pot: GridPotential, func, label: str):
        self._func = func
        self.label = label
        centers = pot.cell_centers()
        self.values = func(centers).reshape((pot.n,) * pot.d)

    def evaluate(self, points):
        return self._func(np.atleast_2d(np.asarray(points, dtype=np.float64)))


def plane_wave_probe(pot: GridPotential, k_dir) -> AnalyticInterior:
    """Free plane wave exp(i sqrt(E) dir . x) packaged as an interior."""

    def make(kvec):
        def func(pts):
            return np.exp(1j * Pts_dot(pts, kvec))

        return func

    kvec = np.asarray(k_dir, dtype=np.complex128)
    return AnalyticInterior(pot, make(kvec), "plane-wave probe")


def Pts_dot(pts: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return pts @ vec


def exp_probe(pot: GridPotential, kvec) -> AnalyticInterior:
    """exp(i k . x) for a (possibly complex) momentum vector."""
    kvec = np.asarray(kvec, dtype=np.complex128)

    def func(pts):
        return np.exp(1j * (pts @ kvec))

    return AnalyticInterior(pot, func, "complex-exponential probe")


class GrowingInterior:
    """Interior from a solved 3D growing field, continued off-lattice."""

    def __init__(self, fld: faddeev.FaddeevField):
        self.label = f"growing probe (mode {fld.mode})"
        pot = fld.pot
        centers = pot.cell_centers()
        phase = np.exp(1j * centers @ fld.k.vec)
        self.values = (phase * fld.mu.ravel()).reshape((pot.n,) * pot.d)
        self._eval = faddeev.growing_field_evaluator(fld)

    def evaluate(self, points):
        return self._eval(points)


class BuckhgeimInterior:
    """Interior from a solved 2D probe field."""

    def __init__(self, fld: buckhgeim.BuckhgeimField, pot: GridPotential):
        self.label = f"2d probe (mode {fld.mode}, variant {fld.variant})"
        self.values = fld.psi_on_potential_block()
        if self.values.shape != (pot.n,) * 2:
            raise DomainError("probe grid does not match the potential grid")
        self._fld = fld

    def evaluate(self, points):
        return self._fld.evaluate(points)


# ---------------------------------------------------------------------------
# Global solutions
# ---------------------------------------------------------------------------
@dataclass
class GlobalSolution:
    """Interior solution + radiating exterior extension of its trace."""

    energy: float
    mesh: BoundaryMesh
    interior_values: np.ndarray
    trace: np.ndarray
    expansion: exterior.HarmonicExpansion
    dn_plus: np.ndarray
    dn_minus: np.ndarray
    label: str = ""

    @property
    def jump(self) -> np.ndarray:
        return self.dn_plus - self.dn_minus

    def jump_norm(self) -> float:
        return float(np.sqrt(np.sum(self.mesh.weights * np.abs(self.jump) ** 2)))


def interior_residual_map(
    pot: GridPotential, values: np.ndarray, energy: float
) -> np.ndarray:
    """Relative residual of (-lap + v - E) phi by 4th-order differences.

    Returned on the interior nodes where the 5-point-per-axis stencil
    fits; the relative scale is |lap phi| + (1 + |E|)|phi|.
    """
    h = pot.h
    lap = np.zeros_like(values, dtype=np.complex128)
    core = (slice(2, -2),) * pot.d
    for ax in range(pot.d):
        def sh(off):
            sl = [slice(2, -2)] * pot.d
            sl[ax] = slice(2 + off, values.shape[ax] - 2 + off or None)
            return values[tuple(sl)]

        lap[core] += (
            -sh(-2) + 16 * sh(-1) - 30 * sh(0) + 16 * sh(1) - sh(2)
        ) / (12 * h * h)
    resid = -lap[core] + (pot.values[core] - energy) * values[core]
    scale = np.abs(lap[core]) + (1.0 + abs(energy)) * np.abs(values[core])
    return np.abs(resid) / np.maximum(scale, 1e-300)


def build_phi(
    pot: GridPotential,
    interior,
    energy: float,
    mesh: BoundaryMesh,
    max_degree: int | None = None,
    residual_tol: float | None = 1e-4,
    fd_depth: float | None = None,
) -> GlobalSolution:
    """Glue an interior solution to its radiating exterior extension.

    ``interior`` provides grid ``values`` and ``evaluate(points)``. The
    interior PDE residual gate (4th-order differences) can be disabled
    with residual_tol=None (approximate Born probes). The interior
    normal derivative uses one-sided differences at three stencil
    depths, Richardson-combined to third order.
    """
    if residual_tol is not None:
        rmap = interior_residual_map(pot, interior.values, energy)
        worst = float(rmap.max()) if rmap.size else 0.0
        if not worst <= residual_tol:
            raise RejectedInteriorError(
                f"interior residual {worst:.2e} exceeds {residual_tol:.1e}",
                residual_map=rmap,
            )
    if max_degree is None:
        max_degree = min(32, exterior.max_expansion_degree(mesh)) if mesh.d == 2 \
            else min(14, exterior.max_expansion_degree(mesh))
    trace = np.asarray(interior.evaluate(mesh.nodes))
    expansion = exterior.expand_trace(trace, mesh, max_degree, energy)
    dn_plus = exterior.exterior_normal_derivative(expansion, mesh)
    if fd_depth is None:
        # scale with the grid so the one-sided stencil's truncation
        # refines along with everything else; clamp inside the shell
        fd_depth = min(0.45 * (mesh.r - pot.r1), 3.0 * pot.h)
    dirs = mesh.directions()

    def radial(delta):
        return np.asarray(interior.evaluate(mesh.nodes - delta * dirs))

    d1 = (trace - radial(fd_depth)) / fd_depth
    d2 = (trace - radial(fd_depth / 2)) / (fd_depth / 2)
    d3 = (trace - radial(fd_depth / 4)) / (fd_depth / 4)
    r1 = 2 * d2 - d1
    r2 = 2 * d3 - d2
    dn_minus = (4 * r2 - r1) / 3
    return GlobalSolution(
        energy, mesh, np.asarray(interior.values), trace, expansion,
        dn_plus, dn_minus, getattr(interior, "label", ""),
    )


def growing_probe_pair(
    pot1: GridPotential,
    pot2: GridPotential,
    pair: faddeev.MomentumPair,
    mesh: BoundaryMesh,
    mode: str = "series",
    margin: float = 0.2,
):
    """Paired 3D growing probes on a kernel lattice wide enough for
    boundary-trace continuation (no periodic wrap up to the mesh)."""
    h = pot1.h
    depth = mesh.r + pot1.r1 + margin
    ng = max(2 * int(np.ceil(depth / h)), 2 * pot1.n)
    gg = faddeev.faddeev_green_grid(pair.k, ng * h, ng)
    fld2 = faddeev.solve_mu(pot2, pair.k, mode, green=gg)
    fld1 = faddeev.solve_mu(
        pot1, faddeev.ComplexMomentum(-pair.l.vec), mode,
        green=gg.reflected(pair.p),
    )
    return GrowingInterior(fld1), GrowingInterior(fld2), gg


def paired_probe_fields(
    pot1: GridPotential,
    pot2: GridPotential,
    probe: buckhgeim.BuckhgeimProbe,
    mode: str = "neumann",
    r: float | None = None,
    grid=None,
    rim_pad: float = 0.12,
):
    """Paired 2D probes (conjugate companion at -lam for the first).

    The probe equation is solved on a slightly larger disk than the
    data sphere: the shifted potential continues as -E there, so the
    probe satisfies the working-energy free equation across the data
    sphere and its trace/normal derivative are sampled away from the
    curvature kink at the solve rim.
    """
    if grid is None:
        if r is None:
            r = pot1.r
        grid = buckhgeim.disk_grid(pot1, r + rim_pad)
    f1 = buckhgeim.solve_probe(
        pot1, probe.flipped(), "psi_tilde", mode=mode, grid=grid
    )
    f2 = buckhgeim.solve_probe(pot2, probe, "psi", mode=mode, grid=grid)
    return BuckhgeimInterior(f1, pot1), BuckhgeimInterior(f2, pot2)


# ---------------------------------------------------------------------------
# Identity and data-side estimation
# ---------------------------------------------------------------------------
@dataclass
class IdentityCheck:
    lhs: complex
    rhs: complex
    rel_err: float


def _data_pairing(
    s1: NearFieldMatrix, s2: NearFieldMatrix,
    phi1: GlobalSolution, phi2: GlobalSolution,
) -> complex:
    if not s1.mesh.same_geometry(s2.mesh):
        raise MeshMismatchError("data matrices on different meshes")
    if not phi1.mesh.same_geometry(s1.mesh) or not phi2.mesh.same_geometry(s1.mesh):
        raise MeshMismatchError("solutions and data live on different meshes")
    w = s1.mesh.weights
    return complex(
        (w * phi1.jump) @ ((s2.values - s1.values) @ (w * phi2.jump))
    )


def alessandrini_check(
    pot1: GridPotential, pot2: GridPotential,
    phi1: GlobalSolution, phi2: GlobalSolution,
    s1: NearFieldMatrix, s2: NearFieldMatrix,
) -> IdentityCheck:
    """Interior pairing vs boundary bilinear form in the data difference."""
    forward._check_shared_grid(pot1, pot2)
    vdiff = pot2.values - pot1.values
    lhs = complex(
        pot1.h**pot1.d * np.sum(vdiff * phi1.interior_values * phi2.interior_values)
    )
    rhs = _data_pairing(s1, s2, phi1, phi2)
    rel = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return IdentityCheck(lhs, rhs, rel)


def estimate_hdiff_from_data(
    s1: NearFieldMatrix, s2: NearFieldMatrix,
    phi1: GlobalSolution, phi2: GlobalSolution,
) -> complex:
    """Amplitude-difference estimate from data matrices and probes only.

    Normalization follows the probe family: the 3D growing-probe
    amplitude carries (2 pi)^-3; the 2D paired-probe functional carries
    no prefactor.
    """
    rhs = _data_pairing(s1, s2, phi1, phi2)
    if s1.mesh.d == 3:
        return complex(rhs * (2.0 * np.pi) ** -3)
    return complex(rhs)


# ---------------------------------------------------------------------------
# Parameter selection
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ParamChoice:
    beta: float
    rho: float  # |lam| in 2D
    kappa: float


def choose_parameters(
    delta: float, energy: float, tau: float, r: float, d: int, eps: float = 0.5
) -> ParamChoice:
    """Regularization weights from the data-error level.

    beta = (1-tau)/(2(r+1)) for d >= 3, (1-tau)/(8r^2+8r) for d = 2;
    rho (or |lam|) = beta ln(3 + 1/delta); kappa = eps (E + rho^2)^{1/2d}
    clamped to the admissible band 2 sqrt(E + rho^2).
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    if not delta > 0:
        raise DomainError("delta must be positive")
    if d == 2:
        beta = (1.0 - tau) / (8.0 * r * r + 8.0 * r)
    else:
        beta = (1.0 - tau) / (2.0 * (r + 1.0))
    rho = beta * np.log(3.0 + 1.0 / delta)
    kappa = eps * (energy + rho * rho) ** (1.0 / (2.0 * d))
    kappa = min(kappa, 2.0 * np.sqrt(energy + rho * rho) * (1.0 - 1e-12))
    return ParamChoice(float(beta), float(rho), float(kappa))


# ---------------------------------------------------------------------------
# Band-limited Born inversion (3D) and pointwise 2D analog
# ---------------------------------------------------------------------------
def _frequency_lattice(pot: GridPotential, pad: int) -> tuple[np.ndarray, float]:
    n_f = pad * pot.n
    m = np.arange(n_f, dtype=np.int64)
    m[m >= n_f // 2] -= n_f
    dp = 2.0 * np.pi / (n_f * pot.h)
    return m * dp, dp


@dataclass
class BornInversion:
    estimate: np.ndarray  # real grid estimate of v2 - v1
    p_points: np.ndarray
    hat_estimates: np.ndarray
    delta: float
    below_noise: bool
    kappa: float


def born_invert_difference(
    s1: NearFieldMatrix,
    s2: NearFieldMatrix,
    energy: float,
    rho: float,
    kappa: float,
    pot_template: GridPotential,
    pad: int = 4,
    max_degree: int | None = None,
    delta_floor: float = 1e-12,
) -> BornInversion:
    """Band-limited estimate of v2 - v1 from two data matrices (d = 3).

    For each frequency-lattice point p with |p| <= kappa, a pair of
    free complex-exponential probes estimates the Fourier coefficient of
    the difference from the data; the inverse transform restricted to
    the ball synthesizes the estimate (real part; conjugate symmetry is
    enforced by construction).
    """
    if pot_template.d != 3:
        raise DomainError("the band-limited pathway is 3-dimensional")
    if kappa * kappa > 4.0 * (energy + rho * rho):
        raise ConstraintError(
            f"kappa^2 = {kappa**2:.4g} exceeds 4(E + rho^2) = "
            f"{4 * (energy + rho**2):.4g}"
        )
    delta = data_norm_diff(s1, s2)
    freqs, dp = _frequency_lattice(pot_template, pad)
    half = []
    for a in freqs:
        for b in freqs:
            for c in freqs:
                if a * a + b * b + c * c > kappa * kappa:
                    continue
                if (c > 0) or (c == 0 and b > 0) or (c == 0 and b == 0 and a >= 0):
                    half.append((a, b, c))
    half = np.array(half)
    hats = np.empty(half.shape[0], dtype=np.complex128)
    for i, p in enumerate(half):
        pair = faddeev.momentum_pair(energy, p, rho)
        phi2 = build_phi(
            pot_template, exp_probe(pot_template, pair.k.vec), energy,
            s1.mesh, max_degree, residual_tol=None,
        )
        phi1 = build_phi(
            pot_template, exp_probe(pot_template, -pair.l.vec), energy,
            s1.mesh, max_degree, residual_tol=None,
        )
        hats[i] = estimate_hdiff_from_data(s1, s2, phi1, phi2)
    centers = pot_template.cell_centers()
    accum = np.zeros(centers.shape[0], dtype=np.complex128)
    for p, hat in zip(half, hats):
        phase = np.exp(-1j * centers @ p)
        accum += hat * phase * dp**3
        if np.any(p != 0):
            accum += np.conj(hat) * np.conj(phase) * dp**3
    est = accum.real.reshape((pot_template.n,) * 3)
    return BornInversion(
        est, half, hats, delta, bool(delta < delta_floor), kappa
    )


def lowpass_truth(vdiff: GridPotential, kappa: float, pad: int = 4) -> np.ndarray:
    """Oracle: the true difference restricted to the same frequency ball."""
    freqs, dp = _frequency_lattice(vdiff, pad)
    centers = vdiff.cell_centers()
    accum = np.zeros(centers.shape[0], dtype=np.complex128)
    for a in freqs:
        for b in freqs:
            for c in freqs:
                if a * a + b * b + c * c > kappa * kappa:
                    continue
                p = np.array([a, b, c])
                hat = faddeev.potential_fourier(vdiff, p)
                accum += hat * np.exp(-1j * centers @ p) * dp**3
    return accum.real.reshape((vdiff.n,) * vdiff.d)


def pointwise_invert_2d(
    s1: NearFieldMatrix,
    s2: NearFieldMatrix,
    centers,
    lam_abs: float,
    energy: float,
    pot_template: GridPotential,
    max_degree: int | None = None,
    mode: str = "gmres",
) -> np.ndarray:
    """2D data-driven pointwise estimate of v2 - v1 at probe centers.

    Probes are zero-potential solutions of the shifted equation (they
    solve the free equation at the working energy, so they are
    admissible regardless of the unknown potentials).
    """
    if pot_template.d != 2:
        raise DomainError("the pointwise pathway is 2-dimensional")
    zero = GridPotential(
        2, pot_template.r1, pot_template.r,
        np.zeros_like(pot_template.values), pot_template.m, 1e-12,
    )
    centers = np.asarray(centers, dtype=np.complex128).ravel()
    grid = buckhgeim.disk_grid(zero, s1.mesh.r)
    out = np.empty(centers.shape[0])
    for i, z0 in enumerate(centers):
        probe = buckhgeim.BuckhgeimProbe(complex(z0), lam_abs, energy)
        f1 = buckhgeim.solve_probe(
            zero, probe.flipped(), "psi_tilde", mode=mode, grid=grid
        )
        f2 = buckhgeim.solve_probe(zero, probe, "psi", mode=mode, grid=grid)
        phi1 = build_phi(
            zero, BuckhgeimInterior(f1, zero), energy, s1.mesh, max_degree,
            residual_tol=None,
        )
        phi2 = build_phi(
            zero, BuckhgeimInterior(f2, zero), energy, s1.mesh, max_degree,
            residual_tol=None,
        )
        dh = estimate_hdiff_from_data(s1, s2, phi1, phi2)
        out[i] = (2.0 / np.pi) * lam_abs * dh.real
    return out


# ---------------------------------------------------------------------------
# Fourier tail
# ---------------------------------------------------------------------------
def potential_hat_lattice(pot: GridPotential, pad: int = 8):
    """Fourier coefficients of the potential on the padded lattice."""
    n_f = pad * pot.n
    shape = (n_f,) * pot.d
    padded = np.zeros(shape)
    padded[(slice(0, pot.n),) * pot.d] = pot.values
    spec = np.fft.ifftn(padded) * n_f**pot.d
    m = np.arange(n_f, dtype=np.int64)
    m[m >= n_f // 2] -= n_f
    dp = 2.0 * np.pi / (n_f * pot.h)
    x0 = -pot.r1 + 0.5 * pot.h
    ph1 = np.exp(1j * m * dp * x0)
    for ax in range(pot.d):
        shape_ax = [1] * pot.d
        shape_ax[ax] = n_f
        spec = spec * ph1.reshape(shape_ax)
    hat = spec * pot.h**pot.d * (2.0 * np.pi) ** (-pot.d)
    pgrid = m * dp
    return hat, pgrid, dp


def tail_bound_check(
    pot1: GridPotential, pot2: GridPotential, kappas, pad: int = 8
) -> dict:
    """Excluded-ball L1 tails of the difference transform, with a
    log-log decay fit over the kappa list."""
    forward._check_shared_grid(pot1, pot2)
    diff = GridPotential(
        pot1.d, pot1.r1, pot1.r, pot2.values - pot1.values,
        max(pot1.m, pot2.m), pot1.bound + pot2.bound,
    )
    hat, pgrid, dp = potential_hat_lattice(diff, pad)
    grids = np.meshgrid(*([pgrid] * diff.d), indexing="ij")
    pnorm = np.sqrt(sum(g * g for g in grids))
    mags = np.abs(hat)
    kappas = np.asarray(sorted(kappas), dtype=np.float64)
    tails = np.array(
        [float(np.sum(mags[pnorm >= kap]) * dp**diff.d) for kap in kappas]
    )
    good = tails > 0
    if good.sum() >= 2:
        slope = float(
            np.polyfit(np.log(kappas[good]), np.log(tails[good]), 1)[0]
        )
    else:
        slope = float("nan")
    return {"kappas": kappas, "tails": tails, "exponent": slope}


# ---------------------------------------------------------------------------
# Stability sweep
# ---------------------------------------------------------------------------
@dataclass
class StabilityRecord:
    case: str
    d: int
    energy: float
    m: float
    bound: float
    amplitude: float
    delta: float
    sup_diff: float
    tau: float
    beta: float
    rho: float
    kappa: float
    holder_term: float
    log_term: float
    envelope_rhs: float
    envelope_ok: bool
    status: str = "ok"
    note: str = ""

    FIELDS = (
        "case", "d", "energy", "m", "bound", "amplitude", "delta", "sup_diff",
        "tau", "beta", "rho", "kappa", "holder_term", "log_term",
        "envelope_rhs", "envelope_ok", "status", "note",
    )

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]


def log_form_2d(delta: float) -> float:
    """(ln(3 + 1/delta))^{-3/4} (ln(3 ln(3 + 1/delta)))^2."""
    ell = np.log(3.0 + 1.0 / delta)
    return float(ell ** -0.75 * np.log(3.0 * ell) ** 2)


def holder_log_form(delta: float, energy: float, tau: float, s: float, s_star: float):
    """The two terms of the high-dimensional envelope."""
    holder = (1.0 + energy) ** 2.5 * delta**tau
    logt = (1.0 + energy) ** ((s - s_star) / 2.0) * np.log(3.0 + 1.0 / delta) ** -s
    return float(holder), float(logt)


@dataclass
class SweepConfig:
    d: int = 2
    r1: float = 0.7
    r: float = 1.0
    grid_n: int = 48
    mesh_params: tuple = (128,)
    energies: tuple = (2.0,)
    base: dict = field(default_factory=lambda: {"family": "gaussian", "amplitude": 1.0})
    perturbation: dict = field(
        default_factory=lambda: {"family": "poly", "amplitude": 1.0, "q": 3.0}
    )
    amplitudes: tuple = (0.02, 0.05, 0.1, 0.2)
    tau: float = 0.5
    s_fraction: float = 0.5  # s = s_fraction * s_star
    eps: float = 0.5


def _mesh_for(cfg: SweepConfig) -> BoundaryMesh:
    if cfg.d == 2:
        return forward.circle_mesh(cfg.r, *cfg.mesh_params)
    return forward.sphere_mesh(cfg.r, *cfg.mesh_params)


def stability_sweep(cfg: SweepConfig) -> dict:
    """Data-side envelope verification over an amplitude ladder.

    For each energy: base and perturbed data matrices, delta, sup-norm
    difference, parameter choices, and the envelope with one
    multiplicative constant fitted at the largest delta.
    """
    from . import potentials as pf

    mesh = _mesh_for(cfg)
    base = pf.make_family(cfg.base, cfg.d, cfg.r1, cfg.r, cfg.grid_n)
    pert = pf.make_family(cfg.perturbation, cfg.d, cfg.r1, cfg.r, cfg.grid_n)
    records: list[StabilityRecord] = []
    fits: dict = {}
    for energy in cfg.energies:
        s_base = forward.near_field_data(base, energy, mesh)
        rows = []
        for amp in cfg.amplitudes:
            case = f"E{energy:g}-a{amp:g}"
            try:
                v2 = GridPotential(
                    cfg.d, cfg.r1, cfg.r,
                    base.values + amp * pert.values,
                    max(base.m, pert.m),
                    base.bound + abs(amp) * pert.bound,
                )
                s2 = forward.near_field_data(v2, energy, mesh)
                delta = data_norm_diff(s_base, s2)
                supdiff = forward.sup_diff(base, v2)
                pars = choose_parameters(
                    max(delta, 1e-300), energy, cfg.tau, cfg.r, cfg.d, cfg.eps
                )
                m_eff = min(base.m, pert.m)
                s_star = max((m_eff - cfg.d) / cfg.d, 1e-6)
                s_exp = cfg.s_fraction * s_star
                if cfg.d == 2:
                    holder, logt = 0.0, log_form_2d(delta)
                else:
                    holder, logt = holder_log_form(
                        delta, energy, cfg.tau, s_exp, s_star
                    )
                rows.append(
                    StabilityRecord(
                        case, cfg.d, energy, m_eff, base.bound, amp, delta,
                        supdiff, cfg.tau, pars.beta, pars.rho, pars.kappa,
                        holder, logt, 0.0, False,
                    )
                )
            except Exception as exc:  # noqa: BLE001 - sweep must survive
                logger.warning("case %s failed: %s", case, exc)
                records.append(
                    StabilityRecord(
                        case, cfg.d, energy, 0, 0, amp, 0, 0, cfg.tau, 0, 0,
                        0, 0, 0, 0, False, status="error", note=str(exc)[:120],
                    )
                )
        if not rows:
            continue
        # fit one multiplicative constant at the largest delta
        top = max(rows, key=lambda rec: rec.delta)
        shape_top = top.holder_term + top.log_term
        c_fit = top.sup_diff / shape_top if shape_top > 0 else 0.0
        fits[f"E{energy:g}"] = {"constant": c_fit, "fitted_at_delta": top.delta}
        for rec in rows:
            rec.envelope_rhs = c_fit * (rec.holder_term + rec.log_term)
            rec.envelope_ok = bool(
                rec.sup_diff <= rec.envelope_rhs * (1.0 + 1e-9)
            )
            records.append(rec)
    return {"records": records, "fits": fits}


def energy_trend(
    energies,
    pot1: GridPotential,
    pot2: GridPotential,
    rho: float,
    eps: float,
    mesh_params: tuple = (16, 32),
    s_fraction: float = 0.5,
    pad: int = 4,
) -> dict:
    """Fitted log-term coefficient of the band-limited inversion error
    at s = s_fraction * s_star along an energy ladder (d = 3)."""
    mesh = forward.sphere_mesh(pot1.r, *mesh_params)
    m_eff = min(pot1.m, pot2.m)
    s_star = (m_eff - 3.0) / 3.0
    s_exp = s_fraction * s_star
    vdiff = pot2.values - pot1.values
    rows = []
    for energy in energies:
        s1 = forward.near_field_data(pot1, energy, mesh)
        s2 = forward.near_field_data(pot2, energy, mesh)
        delta = data_norm_diff(s1, s2)
        kappa = min(
            eps * (energy + rho * rho) ** (1.0 / 6.0),
            2.0 * np.sqrt(energy + rho * rho) * (1 - 1e-12),
        )
        inv = born_invert_difference(
            s1, s2, energy, rho, kappa, pot1, pad=pad
        )
        err = float(np.max(np.abs(inv.estimate - vdiff)))
        log_term = np.log(3.0 + 1.0 / delta) ** (-s_exp)
        rows.append(
            {
                "energy": energy,
                "delta": delta,
                "kappa": kappa,
                "recon_error": err,
                "log_coefficient": err / log_term,
            }
        )
    return {"rows": rows, "s": s_exp, "s_star": s_star}
