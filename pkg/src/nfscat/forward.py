"""Forward solver: near-field data of a compactly supported potential.

The scattered part u(., y) of the point-source field solves the
second-kind volume integral equation

    u(x) = int R0(x,z) v(z) [R0(z,y) + u(z)] dz,

discretized by Nystrom midpoint on the uniform cell-center grid of the
potential, with the singular diagonal cell integrated analytically
(log-singular in 2D, 1/|x| in 3D). One dense LU factorization per
(v, E) serves every source / incident field. Data matrices on the
boundary mesh follow from the same representation evaluated at the
mesh nodes:

    S(x_i, y_j) = sum_z R0(x_i,z) h^d v(z) [R0(z,y_j) + u_j(z)].

The assembled S is exactly symmetric (reciprocity) up to LU roundoff.

File formats (shared external interface): a short ASCII header followed
by raw little-endian float64 payload; complex matrices are stored as
interleaved re/im pairs. See ``save_potential`` / ``save_near_field``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.legendre import leggauss

from . import kernels
from .errors import DomainError, MeshMismatchError, SolverError

logger = logging.getLogger(__name__)

# Singular-cell constants: integral of ln|z| over the unit square and of
# 1/|z| over the unit cube, both centered at the origin.
LOG_CELL_CONST = np.pi / 4.0 - 1.5 - 0.5 * np.log(2.0)  # = -1.0611754268825
INV_CELL_CONST = 2.3800773639795536

EULER_GAMMA = 0.5772156649015328606


# ---------------------------------------------------------------------------
# Grid potential
# ---------------------------------------------------------------------------
@dataclass
class GridPotential:
    """Real potential sampled at cell centers of [-r1, r1]^d.

    ``m``/``bound`` are regularity metadata: declared smoothness order
    and a norm bound N with max|v| <= N.
    """

    d: int
    r1: float
    r: float
    values: np.ndarray
    m: float
    bound: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.d not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.d}")
        if self.values.ndim != self.d:
            raise DomainError("values must be a d-dimensional array")
        n = self.values.shape[0]
        if any(s != n for s in self.values.shape):
            raise DomainError("values must be a cube: equal length per axis")
        if not 0 < self.r1 < self.r:
            raise DomainError(f"need 0 < r1 < r, got r1={self.r1}, r={self.r}")
        if np.iscomplexobj(self.values):
            raise DomainError("potential values must be real")
        outside = self.values[~self.support_mask()]
        if outside.size and np.max(np.abs(outside)) > 0:
            raise DomainError("potential must vanish at cells outside the support ball")
        if np.max(np.abs(self.values), initial=0.0) > self.bound * (1 + 1e-12):
            raise DomainError("max|v| exceeds the declared norm bound")
        if self.d >= 3 and not self.m > self.d:
            raise DomainError(f"smoothness order m={self.m} must exceed d={self.d}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 2.0 * self.r1 / self.n

    def axis_coords(self) -> np.ndarray:
        return -self.r1 + (np.arange(self.n) + 0.5) * self.h

    def cell_centers(self) -> np.ndarray:
        """(n^d, d) array of cell centers, C-order flattening."""
        c = self.axis_coords()
        grids = np.meshgrid(*([c] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def support_mask(self) -> np.ndarray:
        c = self.axis_coords()
        grids = np.meshgrid(*([c] * self.d), indexing="ij")
        rho2 = sum(g * g for g in grids)
        return rho2 < self.r1 * self.r1

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))


def sup_diff(v1: GridPotential, v2: GridPotential) -> float:
    """max over grid nodes of |v1 - v2| (shared grid required)."""
    _check_shared_grid(v1, v2)
    return float(np.max(np.abs(v1.values - v2.values)))


def _check_shared_grid(v1: GridPotential, v2: GridPotential):
    if (
        v1.d != v2.d
        or v1.n != v2.n
        or abs(v1.r1 - v2.r1) > 1e-12
        or abs(v1.r - v2.r) > 1e-12
    ):
        raise MeshMismatchError("potentials do not share a grid")


# ---------------------------------------------------------------------------
# Boundary mesh
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BoundaryMesh:
    """Quadrature nodes and positive weights on the sphere of radius r."""

    d: int
    r: float
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    params: tuple

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def directions(self) -> np.ndarray:
        return self.nodes / self.r

    def same_geometry(self, other: "BoundaryMesh") -> bool:
        return (
            self.d == other.d
            and self.kind == other.kind
            and self.params == other.params
            and abs(self.r - other.r) < 1e-12
        )


def circle_mesh(r: float, n: int = 128) -> BoundaryMesh:
    """Uniform (trapezoid) mesh on the circle of radius r."""
    theta = 2.0 * np.pi * np.arange(n) / n
    nodes = r * np.column_stack([np.cos(theta), np.sin(theta)])
    weights = np.full(n, 2.0 * np.pi * r / n)
    return BoundaryMesh(2, r, nodes, weights, "circle", (n,))


def sphere_mesh(r: float, n_polar: int = 16, n_az: int = 32) -> BoundaryMesh:
    """Gauss-Legendre (polar) x uniform (azimuth) product mesh."""
    t, wt = leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(n_az) / n_az
    st = np.sqrt(1.0 - t * t)
    nodes = np.empty((n_polar * n_az, 3))
    weights = np.empty(n_polar * n_az)
    idx = 0
    for k in range(n_polar):
        for l in range(n_az):
            nodes[idx] = r * np.array(
                [st[k] * np.cos(phi[l]), st[k] * np.sin(phi[l]), t[k]]
            )
            weights[idx] = r * r * wt[k] * (2.0 * np.pi / n_az)
            idx += 1
    return BoundaryMesh(3, r, nodes, weights, "sphere", (n_polar, n_az))


def default_mesh(d: int, r: float) -> BoundaryMesh:
    return circle_mesh(r) if d == 2 else sphere_mesh(r)


# ---------------------------------------------------------------------------
# Near-field matrix
# ---------------------------------------------------------------------------
@dataclass
class NearFieldMatrix:
    """Data matrix S[i, j] ~ scattered field at node i from source j."""

    energy: float
    mesh: BoundaryMesh
    values: np.ndarray
    r1: float = 0.0
    m: float = 0.0
    bound: float = 0.0

    def hs_norm(self) -> float:
        w = self.mesh.weights
        return float(np.sqrt(np.einsum("i,j,ij->", w, w, np.abs(self.values) ** 2)))

    def reciprocity_defect(self) -> float:
        s = np.max(np.abs(self.values), initial=0.0)
        if s == 0.0:
            return 0.0
        return float(np.max(np.abs(self.values - self.values.T)) / s)


def data_norm_diff(s1: NearFieldMatrix, s2: NearFieldMatrix) -> float:
    """Quadrature-weighted L2(boundary x boundary) norm of S1 - S2."""
    if not s1.mesh.same_geometry(s2.mesh):
        raise MeshMismatchError("data matrices live on different meshes")
    if abs(s1.energy - s2.energy) > 1e-12:
        raise MeshMismatchError("data matrices have different energies")
    w = s1.mesh.weights
    diff2 = np.abs(s1.values - s2.values) ** 2
    return float(np.sqrt(np.einsum("i,j,ij->", w, w, diff2)))


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------
def _singular_cell(d: int, energy: float, h: float) -> complex:
    """Integral of R0(x, .) over the grid cell containing x."""
    ke = np.sqrt(energy)
    if d == 2:
        re = (h * h / (2.0 * np.pi)) * (
            np.log(ke * h / 2.0) + EULER_GAMMA + LOG_CELL_CONST
        )
        return complex(re, -h * h / 4.0)
    return complex(
        -INV_CELL_CONST * h * h / (4.0 * np.pi), -ke * h**3 / (4.0 * np.pi)
    )


def _kernel_matrix(d: int, pa: np.ndarray, pb: np.ndarray, energy: float) -> np.ndarray:
    ke = float(np.sqrt(energy))
    if d == 2:
        return kernels.outgoing_kernel_2d(pa, pb, ke)
    return kernels.outgoing_kernel_3d(pa, pb, ke)


class ForwardSolver:
    """Factored volume-integral solver for one (potential, energy) pair.

    Assembles A[i,j] = R0(z_i, z_j) h^d on the cells where v != 0 (with
    the integrated singular diagonal), factors M = I - A diag(v), and
    serves point sources, incident plane waves, and near-field matrices
    from the single factorization.
    """

    def __init__(self, pot: GridPotential, energy: float):
        if not energy > 0:
            raise DomainError(f"energy must be positive, got {energy}")
        self.pot = pot
        self.energy = float(energy)
        mask = pot.support_mask() & (pot.values != 0.0)
        self._mask_flat = mask.ravel()
        centers = pot.cell_centers()
        self.supp_points = centers[self._mask_flat]
        self.v_supp = pot.values.ravel()[self._mask_flat]
        self.w = pot.h**pot.d
        self.trivial = self.supp_points.shape[0] == 0
        self._lu = None
        self._a = None
        if self.trivial:
            return
        a = _kernel_matrix(pot.d, self.supp_points, self.supp_points, self.energy)
        a *= self.w
        np.fill_diagonal(a, _singular_cell(pot.d, self.energy, pot.h))
        self._a = a

    def _factor(self):
        if self._lu is None:
            m = -self._a * self.v_supp[None, :]
            np.fill_diagonal(m, 1.0 + np.diag(m))
            try:
                self._lu = sla.lu_factor(m, overwrite_a=True, check_finite=False)
            except sla.LinAlgError as exc:  # pragma: no cover - defensive
                raise SolverError(
                    f"singular system at E={self.energy} (interior resonance "
                    "of the discretization?)"
                ) from exc
        return self._lu

    def _solve(self, rhs: np.ndarray, label: str) -> np.ndarray:
        lu = self._factor()
        sol = sla.lu_solve(lu, rhs, check_finite=False)
        # residual gate; subsample columns of wide right-hand sides
        if sol.ndim == 2 and sol.shape[1] > 16:
            cols = np.linspace(0, sol.shape[1] - 1, 16).astype(int)
            s_chk, r_chk = sol[:, cols], rhs[:, cols]
        else:
            s_chk, r_chk = sol, rhs
        vcol = self.v_supp[:, None] if s_chk.ndim == 2 else self.v_supp
        m_apply = s_chk - self._a @ (vcol * s_chk)
        resid = np.linalg.norm(m_apply - r_chk) / max(np.linalg.norm(r_chk), 1e-300)
        if not resid <= 1e-10:
            raise SolverError(
                f"dense solve residual {resid:.2e} exceeds 1e-10 for {label} "
                f"at E={self.energy}"
            )
        return sol

    # -- point sources ------------------------------------------------------
    def scattered_on_support(self, source: np.ndarray) -> np.ndarray:
        """u = S(., y) restricted to the support cells."""
        if self.trivial:
            return np.zeros(0, dtype=np.complex128)
        r0 = _kernel_matrix(
            self.pot.d, self.supp_points, source[None, :], self.energy
        )[:, 0]
        rhs = self._a @ (self.v_supp * r0)
        return self._solve(rhs, "point source")

    def _representation(self, density: np.ndarray):
        """Chunked evaluator of sum_z R0(., z) h^d density(z)."""

        def evaluate(points, chunk=2048):
            points = np.atleast_2d(np.asarray(points, dtype=np.float64))
            out = np.empty(points.shape[0], dtype=np.complex128)
            for start in range(0, points.shape[0], chunk):
                sl = slice(start, min(start + chunk, points.shape[0]))
                b = _kernel_matrix(
                    self.pot.d, points[sl], self.supp_points, self.energy
                )
                out[sl] = (b * self.w) @ density
            return out

        return evaluate

    def _grid_values(self, density: np.ndarray, evaluate) -> np.ndarray:
        """Representation at every grid node; the kernel vanishes at
        coincident points, so supp nodes get the integrated singular
        cell added back (this reproduces the dense solve exactly)."""
        full = evaluate(self.pot.cell_centers())
        full[self._mask_flat] += (
            _singular_cell(self.pot.d, self.energy, self.pot.h) * density
        )
        return full.reshape((self.pot.n,) * self.pot.d)

    def scattered_field(self, source: np.ndarray):
        """Scattered field on the full grid plus an off-grid evaluator."""
        source = np.asarray(source, dtype=np.float64)
        n = self.pot.n
        shape = (n,) * self.pot.d
        if self.trivial:
            return np.zeros(shape, dtype=np.complex128), lambda pts: np.zeros(
                np.atleast_2d(pts).shape[0], dtype=np.complex128
            )
        u = self.scattered_on_support(source)
        r0 = _kernel_matrix(
            self.pot.d, self.supp_points, source[None, :], self.energy
        )[:, 0]
        density = self.v_supp * (r0 + u)
        evaluate = self._representation(density)
        return self._grid_values(density, evaluate), evaluate

    # -- plane waves --------------------------------------------------------
    def total_plane_wave(self, direction: np.ndarray):
        """Total field for an incident unit plane wave along ``direction``.

        Returns an object with ``values`` on the grid and
        ``evaluate(points)`` for arbitrary points.
        """
        direction = np.asarray(direction, dtype=np.float64)
        direction = direction / np.linalg.norm(direction)
        kvec = np.sqrt(self.energy) * direction
        centers = self.pot.cell_centers()
        if self.trivial:
            values = np.exp(1j * centers @ kvec).reshape((self.pot.n,) * self.pot.d)
            return _PlaneWaveField(values, lambda pts: np.exp(
                1j * np.atleast_2d(np.asarray(pts, dtype=np.float64)) @ kvec
            ), kvec)
        inc_supp = np.exp(1j * self.supp_points @ kvec)
        u_t = self._solve(inc_supp, "plane wave")
        density = self.v_supp * u_t
        rep = self._representation(density)

        def evaluate(points):
            points = np.atleast_2d(np.asarray(points, dtype=np.float64))
            return np.exp(1j * points @ kvec) + rep(points)

        scat = self._grid_values(density, rep).ravel()
        values = (np.exp(1j * centers @ kvec) + scat).reshape(
            (self.pot.n,) * self.pot.d
        )
        return _PlaneWaveField(values, evaluate, kvec)

    # -- near-field matrix --------------------------------------------------
    def near_field(self, mesh: BoundaryMesh) -> NearFieldMatrix:
        if mesh.d != self.pot.d:
            raise MeshMismatchError("mesh dimension does not match the potential")
        if not mesh.r > self.pot.r1:
            raise DomainError("mesh radius must exceed the support radius")
        nn = mesh.n_nodes
        if self.trivial:
            return NearFieldMatrix(
                self.energy,
                mesh,
                np.zeros((nn, nn), dtype=np.complex128),
                self.pot.r1,
                self.pot.m,
                self.pot.bound,
            )
        b = _kernel_matrix(self.pot.d, mesh.nodes, self.supp_points, self.energy)
        r0 = b.T.copy()  # R0(z, y_j) by symmetry of the kernel
        rhs = self._a @ (self.v_supp[:, None] * r0)
        u = self._solve(rhs, "near-field sources")
        s = (b * (self.w * self.v_supp)[None, :]) @ (r0 + u)
        return NearFieldMatrix(
            self.energy, mesh, s, self.pot.r1, self.pot.m, self.pot.bound
        )


class _PlaneWaveField:
    """Total plane-wave field: grid values + off-grid evaluator."""

    def __init__(self, values, evaluate, kvec):
        self.values = values
        self.evaluate = evaluate
        self.kvec = kvec
        self.label = "plane-wave total field"


def scattered_field(pot: GridPotential, energy: float, source) -> np.ndarray:
    """Scattered field on the potential grid for one boundary source."""
    solver = ForwardSolver(pot, energy)
    values, _ = solver.scattered_field(np.asarray(source, dtype=np.float64))
    return values


def near_field_data(
    pot: GridPotential, energy: float, mesh: BoundaryMesh
) -> NearFieldMatrix:
    """Near-field data matrix on ``mesh`` (one solve per source)."""
    return ForwardSolver(pot, energy).near_field(mesh)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------
_POT_MAGIC = "NFSCAT-POTENTIAL v1"
_NF_MAGIC = "NFSCAT-NEARFIELD v1"


def _header_dict(line: str) -> dict:
    out = {}
    for tok in line.split():
        key, val = tok.split("=", 1)
        out[key] = val
    return out


def save_potential(path, pot: GridPotential) -> None:
    header = (
        f"{_POT_MAGIC}\n"
        f"d={pot.d} r1={pot.r1!r} r={pot.r!r} n={pot.n} E=0.0 "
        f"m={pot.m!r} N={pot.bound!r}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(pot.values, dtype="<f8").tobytes())


def load_potential(path) -> GridPotential:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii").strip()
        if magic != _POT_MAGIC:
            raise DomainError(f"not a potential file: {magic!r}")
        meta = _header_dict(fh.readline().decode("ascii").strip())
        d, n = int(meta["d"]), int(meta["n"])
        values = np.frombuffer(fh.read(8 * n**d), dtype="<f8").reshape((n,) * d)
    return GridPotential(
        d, float(meta["r1"]), float(meta["r"]), values.copy(),
        float(meta["m"]), float(meta["N"]),
    )


def save_near_field(path, nf: NearFieldMatrix) -> None:
    mesh = nf.mesh
    params = ",".join(str(p) for p in mesh.params)
    header = (
        f"{_NF_MAGIC}\n"
        f"d={mesh.d} r1={nf.r1!r} r={mesh.r!r} n={mesh.n_nodes} "
        f"E={nf.energy!r} m={nf.m!r} N={nf.bound!r}\n"
        f"mesh={mesh.kind} params={params}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(nf.values, dtype="<c16").tobytes())


def load_near_field(path) -> NearFieldMatrix:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii").strip()
        if magic != _NF_MAGIC:
            raise DomainError(f"not a near-field file: {magic!r}")
        meta = _header_dict(fh.readline().decode("ascii").strip())
        mline = _header_dict(fh.readline().decode("ascii").strip())
        nn = int(meta["n"])
        values = np.frombuffer(fh.read(16 * nn * nn), dtype="<c16").reshape(nn, nn)
    params = tuple(int(p) for p in mline["params"].split(","))
    r = float(meta["r"])
    if mline["mesh"] == "circle":
        mesh = circle_mesh(r, *params)
    elif mline["mesh"] == "sphere":
        mesh = sphere_mesh(r, *params)
    else:
        raise DomainError(f"unknown mesh kind {mline['mesh']!r}")
    return NearFieldMatrix(
        float(meta["E"]), mesh, values.copy(),
        float(meta["r1"]), float(meta["m"]), float(meta["N"]),
    )
