"""Global solutions, the boundary-data identity, data-side estimation,
band-limited inversion, parameter selection, tails, and sweeps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import special

from nfscat import buckhgeim, exterior, faddeev, forward, harness, potentials
from nfscat.errors import ConstraintError, DomainError, RejectedInteriorError


@pytest.fixture(scope="module")
def data2d(pair2d, circle128):
    v1, v2 = pair2d
    s1 = forward.near_field_data(v1, 2.0, circle128)
    s2 = forward.near_field_data(v2, 2.0, circle128)
    return v1, v2, s1, s2


# ---------------------------------------------------------------------------
# build_phi
# ---------------------------------------------------------------------------
def test_zero_interior_zero_jump(circle128):
    vz = potentials.make_family({"family": "zero"}, 2, 0.7, 1.0, 32)

    class Zero:
        values = np.zeros((32, 32), dtype=complex)
        label = "zero"

        @staticmethod
        def evaluate(pts):
            return np.zeros(np.atleast_2d(pts).shape[0], dtype=complex)

    phi = harness.build_phi(vz, Zero(), 2.0, circle128)
    assert np.max(np.abs(phi.jump)) == 0


def test_plane_wave_jump_jacobi_anger_oracle(circle128):
    # v = 0, interior plane wave: per-mode jump = c_j (dtn_j - sqrt(E) J'_j/J_j)
    energy = 2.0
    ke = np.sqrt(energy)
    vz = potentials.make_family({"family": "zero"}, 2, 0.7, 1.0, 32)
    probe = harness.plane_wave_probe(vz, ke * np.array([1.0, 0.0]))
    phi = harness.build_phi(vz, probe, energy, circle128, max_degree=20,
                            fd_depth=0.08)
    jump_exp = exterior.expand_trace(phi.jump, circle128, 20, energy)
    trace_exp = phi.expansion
    mult = exterior.dtn_multipliers(2, energy, 1.0, 20)
    degrees = trace_exp.degree_of_mode()
    for mode in range(trace_exp.coeffs.size):
        j = int(degrees[mode])
        c = trace_exp.coeffs[mode]
        if abs(c) < 1e-8:
            continue
        interior_ratio = ke * special.jvp(j, ke) / special.jv(j, ke)
        expect = c * (mult[j] - interior_ratio)
        assert abs(jump_exp.coeffs[mode] - expect) <= 2e-5 * max(abs(expect), 1.0)


def test_interior_residual_gate():
    v = potentials.gaussian_bump(2, 0.7, 1.0, 32, amplitude=0.8)
    mesh = forward.circle_mesh(1.0, 64)
    # a plane wave does not solve the equation with v != 0
    bad = harness.plane_wave_probe(v, np.sqrt(2.0) * np.array([1.0, 0.0]))
    with pytest.raises(RejectedInteriorError) as err:
        harness.build_phi(v, bad, 2.0, mesh, residual_tol=1e-4)
    assert err.value.residual_map is not None
    # the same probe is a genuine solution for the zero potential
    vz = potentials.make_family({"family": "zero"}, 2, 0.7, 1.0, 32)
    harness.build_phi(vz, harness.plane_wave_probe(
        vz, np.sqrt(2.0) * np.array([1.0, 0.0])), 2.0, mesh, residual_tol=1e-4)


def test_jump_growth_envelope_3d(pair3d, sphere_mesh):
    # ||jump|| <= fitted c (1+E) exp(rho (r+1)) along a rho ladder
    v1, _ = pair3d
    energy = 1.0
    norms, shapes = [], []
    for rho in (1.0, 2.0, 3.0):
        pair = faddeev.momentum_pair(energy, [0.5, 0, 0], rho)
        int1, _, _ = harness.growing_probe_pair(v1, v1, pair, sphere_mesh)
        phi = harness.build_phi(v1, int1, energy, sphere_mesh, residual_tol=None)
        norms.append(phi.jump_norm())
        shapes.append((1 + energy) * np.exp(rho * (1.0 + 1.0)))
    c_fit = norms[0] / shapes[0]
    assert all(n <= 2.0 * c_fit * s for n, s in zip(norms, shapes))


# ---------------------------------------------------------------------------
# Identity and data-side estimate
# ---------------------------------------------------------------------------
def test_identity_trivial_same_potential(data2d, circle128):
    v1, _, s1, _ = data2d
    sol = forward.ForwardSolver(v1, 2.0)
    phi = harness.build_phi(
        v1, sol.total_plane_wave([1.0, 0.0]), 2.0, circle128, residual_tol=None
    )
    res = harness.alessandrini_check(v1, v1, phi, phi, s1, s1)
    assert res.lhs == 0 and res.rhs == 0


def test_identity_plane_wave_probes(data2d, circle128):
    v1, v2, s1, s2 = data2d
    sol1 = forward.ForwardSolver(v1, 2.0)
    sol2 = forward.ForwardSolver(v2, 2.0)
    phi1 = harness.build_phi(
        v1, sol1.total_plane_wave([1.0, 0.0]), 2.0, circle128, residual_tol=None
    )
    phi2 = harness.build_phi(
        v2, sol2.total_plane_wave([0.5, np.sqrt(0.75)]), 2.0, circle128,
        residual_tol=None,
    )
    res = harness.alessandrini_check(v1, v2, phi1, phi2, s1, s2)
    assert res.rel_err <= 2e-2
    # bound chain: |pairing| <= delta ||jump1|| ||jump2||
    delta = forward.data_norm_diff(s1, s2)
    assert abs(res.rhs) <= delta * phi1.jump_norm() * phi2.jump_norm() * (1 + 1e-9)


def test_operator_norm_dominated_by_hs(data2d):
    # power iteration on the weighted kernel vs the quadrature HS norm
    _, _, s1, s2 = data2d
    w = s1.mesh.weights
    t = np.sqrt(w)[:, None] * (s2.values - s1.values) * np.sqrt(w)[None, :]
    x = np.ones(t.shape[0], dtype=complex)
    for _ in range(60):
        x = t.conj().T @ (t @ x)
        x /= np.linalg.norm(x)
    op = np.linalg.norm(t @ x)
    assert op <= forward.data_norm_diff(s1, s2) * (1 + 1e-9)


def test_estimate_matches_volume_functional_2d(data2d, circle128):
    v1, v2, s1, s2 = data2d
    probe = buckhgeim.BuckhgeimProbe(0.1 + 0.05j, 2.0, 2.0)
    grid = buckhgeim.disk_grid(v1, 1.12)
    int1, int2 = harness.paired_probe_fields(v1, v2, probe, mode="gmres", grid=grid)
    phi1 = harness.build_phi(v1, int1, 2.0, circle128, residual_tol=None)
    phi2 = harness.build_phi(v2, int2, 2.0, circle128, residual_tol=None)
    est = harness.estimate_hdiff_from_data(s1, s2, phi1, phi2)
    direct = buckhgeim.probe_functional(v1, v2, probe, mode="gmres", grid=grid)
    assert abs(est - direct) / abs(direct) <= 2e-2


def test_estimate_matches_amplitude_difference_3d(pair3d, sphere_mesh):
    v1, v2 = pair3d
    energy = 1.0
    s1 = forward.near_field_data(v1, energy, sphere_mesh)
    s2 = forward.near_field_data(v2, energy, sphere_mesh)
    pair = faddeev.momentum_pair(energy, [0.8, 0.3, 0.0], 1.5)
    int1, int2, gg = harness.growing_probe_pair(v1, v2, pair, sphere_mesh)
    phi1 = harness.build_phi(v1, int1, energy, sphere_mesh, residual_tol=None)
    phi2 = harness.build_phi(v2, int2, energy, sphere_mesh, residual_tol=None)
    est = harness.estimate_hdiff_from_data(s1, s2, phi1, phi2)
    direct = faddeev.amplitude_difference(v1, v2, pair, mode="series", green=gg)
    assert abs(est - direct) / abs(direct) <= 1e-2
    # bound chain with the dimensional normalization
    delta = forward.data_norm_diff(s1, s2)
    bound = (2 * np.pi) ** -3 * delta * phi1.jump_norm() * phi2.jump_norm()
    assert abs(est) <= bound * (1 + 1e-9)
    # zero-data trivial case
    est0 = harness.estimate_hdiff_from_data(s1, s1, phi1, phi2)
    assert est0 == 0


# ---------------------------------------------------------------------------
# Parameter selection
# ---------------------------------------------------------------------------
def test_choose_parameters_arithmetic():
    pars = harness.choose_parameters(np.exp(-10.0), 1.0, 0.5, 1.0, 3)
    assert_allclose(pars.beta, 0.125, rtol=1e-14)
    assert_allclose(pars.rho, 0.125 * np.log(3.0 + np.exp(10.0)), rtol=1e-14)
    assert_allclose(
        pars.kappa, 0.5 * (1.0 + pars.rho**2) ** (1.0 / 6.0), rtol=1e-14
    )
    pars2 = harness.choose_parameters(1e-3, 1.0, 0.5, 1.0, 2)
    assert_allclose(pars2.beta, 0.5 / 16.0, rtol=1e-14)


def test_choose_parameters_domain():
    with pytest.raises(DomainError):
        harness.choose_parameters(1e-3, 1.0, 1.5, 1.0, 2)
    with pytest.raises(DomainError):
        harness.choose_parameters(0.0, 1.0, 0.5, 1.0, 2)


@given(
    d1=st.floats(1e-8, 0.5),
    d2=st.floats(1e-8, 0.5),
    tau=st.floats(0.05, 0.95),
    energy=st.floats(0.1, 50.0),
)
@settings(max_examples=40, deadline=None)
def test_choose_parameters_monotone(d1, d2, tau, energy):
    lo, hi = min(d1, d2), max(d1, d2)
    p_lo = harness.choose_parameters(lo, energy, tau, 1.0, 3)
    p_hi = harness.choose_parameters(hi, energy, tau, 1.0, 3)
    assert p_lo.rho >= p_hi.rho  # smaller delta -> larger rho
    assert p_lo.kappa**2 <= 4 * (energy + p_lo.rho**2) * (1 + 1e-9)


# ---------------------------------------------------------------------------
# Fourier tails
# ---------------------------------------------------------------------------
def test_hat_lattice_matches_direct(rng):
    v = potentials.poly_bump(2, 0.7, 1.0, 24, amplitude=1.0, q=3)
    hat, pgrid, _ = harness.potential_hat_lattice(v, pad=4)
    for _ in range(4):
        i, j = rng.integers(0, pgrid.size, size=2)
        p = np.array([pgrid[i], pgrid[j]])
        centers = v.cell_centers()
        expect = (
            (2 * np.pi) ** -2
            * v.h**2
            * np.sum(np.exp(1j * centers @ p) * v.values.ravel())
        )
        assert abs(hat[i, j] - expect) < 1e-12


def test_tail_monotone_and_vanishing(pair2d):
    v1, v2 = pair2d
    res = harness.tail_bound_check(v1, v2, kappas=[2.0, 4.0, 8.0, 16.0, 40.0])
    tails = res["tails"]
    assert np.all(np.diff(tails) <= 1e-15)
    hat, pgrid, _ = harness.potential_hat_lattice(
        forward.GridPotential(2, 0.7, 1.0, v2.values - v1.values, 8.0,
                              v1.bound + v2.bound), pad=8
    )
    p_max = np.abs(pgrid).max() * np.sqrt(2)
    res2 = harness.tail_bound_check(v1, v2, kappas=[0.98 * p_max])
    assert res2["tails"][0] <= 1e-5 * tails[0]


def test_tail_exponent_flatness_family():
    for m_eff in (4.0, 6.0):
        q = m_eff - 1.5  # d = 2: effective order q + 3/2
        va = potentials.make_family({"family": "zero"}, 2, 0.7, 1.0, 64)
        vb = potentials.poly_bump(2, 0.7, 1.0, 64, amplitude=1.0, q=q)
        res = harness.tail_bound_check(va, vb, kappas=[6.0, 9.0, 13.5, 20.0, 30.0])
        assert res["exponent"] <= -(m_eff - 2.0) + 0.5


# ---------------------------------------------------------------------------
# Band-limited inversion
# ---------------------------------------------------------------------------
def test_born_invert_zero_data(sphere_mesh, bump3d):
    s = forward.near_field_data(bump3d, 1.0, sphere_mesh)
    inv = harness.born_invert_difference(s, s, 1.0, 2.0, 3.0, bump3d, pad=2)
    assert np.max(np.abs(inv.estimate)) < 1e-14
    assert inv.below_noise


def test_born_invert_band_limited(sphere_mesh, pair3d):
    # with the synthesis lattice equal to the grid's own DFT lattice the
    # output's spectrum is exactly supported in the ball
    v1, v2 = pair3d
    s1 = forward.near_field_data(v1, 1.0, sphere_mesh)
    s2 = forward.near_field_data(v2, 1.0, sphere_mesh)
    kappa = 5.0
    inv = harness.born_invert_difference(s1, s2, 1.0, 3.0, kappa, v1, pad=1)
    spec = np.fft.fftn(inv.estimate)
    n = v1.n
    m = np.arange(n)
    m[m >= n // 2] -= n
    dp = 2 * np.pi / (n * v1.h)
    px, py, pz = np.meshgrid(m * dp, m * dp, m * dp, indexing="ij")
    outside = px**2 + py**2 + pz**2 > kappa**2
    total = np.sum(np.abs(spec))
    assert np.sum(np.abs(spec[outside])) <= 1e-10 * total


def test_born_invert_kappa_constraint(sphere_mesh, bump3d):
    s = forward.near_field_data(bump3d, 1.0, sphere_mesh)
    with pytest.raises(ConstraintError):
        harness.born_invert_difference(s, s, 1.0, 1.0, 10.0, bump3d)


@pytest.mark.slow
def test_born_invert_lowpass_oracle(sphere_mesh):
    v1 = potentials.make_family({"family": "zero"}, 3, 0.7, 1.0, 12)
    v2 = potentials.gaussian_bump(3, 0.7, 1.0, 12, amplitude=0.05)
    s1 = forward.near_field_data(v1, 25.0, sphere_mesh)
    s2 = forward.near_field_data(v2, 25.0, sphere_mesh)
    kappa = 6.0
    inv = harness.born_invert_difference(s1, s2, 25.0, 2.0, kappa, v1, pad=4)
    truth = harness.lowpass_truth(
        forward.GridPotential(3, 0.7, 1.0, v2.values - v1.values, 8.0, v2.bound),
        kappa, pad=4,
    )
    err = np.max(np.abs(inv.estimate - truth))
    assert err <= 0.3 * np.max(np.abs(truth))


def test_pointwise_invert_2d_runs(pair2d, circle128):
    v1, v2 = pair2d
    s1 = forward.near_field_data(v1, 2.0, circle128)
    s2 = forward.near_field_data(v2, 2.0, circle128)
    est = harness.pointwise_invert_2d(
        s1, s2, [0.15 + 0.05j], 4.0, 2.0, v1
    )
    truth = (v2.values - v1.values)[
        np.argmin(np.abs(v1.axis_coords() - 0.15)),
        np.argmin(np.abs(v1.axis_coords() - 0.05)),
    ]
    # exponential data-error amplification bounds what is checkable here:
    # same sign and magnitude within a factor of two at small |lam|
    assert est[0] == pytest.approx(truth, rel=1.0)
    assert est[0] * truth > 0


# ---------------------------------------------------------------------------
# Stability sweep
# ---------------------------------------------------------------------------
def test_stability_sweep_2d_envelope():
    cfg = harness.SweepConfig(
        d=2, grid_n=24, mesh_params=(64,), energies=(2.0,),
        amplitudes=(0.0, 0.05, 0.2),
    )
    out = harness.stability_sweep(cfg)
    recs = out["records"]
    assert len(recs) == 3
    by_amp = {rec.amplitude: rec for rec in recs}
    assert by_amp[0.0].delta == 0.0 and by_amp[0.0].sup_diff == 0.0
    assert all(rec.envelope_ok for rec in recs if rec.status == "ok")
    assert "E2" in out["fits"]


def test_stability_record_roundtrip():
    rec = harness.StabilityRecord(
        "c", 2, 2.0, 6.0, 1.0, 0.1, 1e-3, 0.2, 0.5, 0.03, 0.2, 1.0,
        0.0, 0.5, 0.6, True,
    )
    row = rec.row()
    assert len(row) == len(harness.StabilityRecord.FIELDS)
    assert row[0] == "c" and row[-2] == "ok"
