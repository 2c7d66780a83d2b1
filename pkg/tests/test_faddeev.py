"""Complex-momentum machinery: pair algebra, kernel lattice, solves,
amplitudes, and the bilinear identity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nfscat import faddeev, forward, potentials
from nfscat.errors import ConstraintError, DomainError, NonConvergenceError


@pytest.fixture(scope="module")
def vsmall():
    return potentials.gaussian_bump(3, 0.7, 1.0, 12, amplitude=1.0)


# ---------------------------------------------------------------------------
# Momentum pairs
# ---------------------------------------------------------------------------
def test_pair_p_zero():
    pair = faddeev.momentum_pair(1.0, [0, 0, 0], 1.0)
    assert np.allclose(pair.k.vec, pair.l.vec)
    assert abs(np.sum(pair.k.re**2) - 2.0) < 1e-14
    assert abs(np.dot(pair.k.vec, pair.k.vec) - 1.0) < 1e-14


def test_pair_example_arithmetic():
    pair = faddeev.momentum_pair(4.0, [1, 0, 0], 2.0, frame=([0, 1, 0], [0, 0, 1]))
    s = np.sqrt(4.0 + 4.0 - 0.25)
    assert_allclose(pair.k.vec, [0.5, s, 2j], atol=1e-14)
    assert abs(np.dot(pair.k.vec, pair.k.vec) - 4.0) < 1e-12
    assert abs(np.dot(pair.l.vec, pair.l.vec) - 4.0) < 1e-12
    assert_allclose(pair.p, [1, 0, 0], atol=1e-14)


def test_pair_constraint_violation():
    p2 = 4 * (1.0 + 1.0) + 0.1
    with pytest.raises(ConstraintError):
        faddeev.momentum_pair(1.0, [np.sqrt(p2), 0, 0], 1.0)


def test_default_frame_deterministic():
    t1, e1 = faddeev.default_frame(np.array([1.0, 0, 0]))
    assert_allclose(t1, [0, 1, 0], atol=1e-15)
    assert_allclose(e1, [0, 0, 1], atol=1e-15)
    t2, e2 = faddeev.default_frame(np.array([0.0, 0, 0]))
    assert_allclose(t2, [1, 0, 0], atol=1e-15)
    assert_allclose(e2, [0, 1, 0], atol=1e-15)


def test_degenerate_frame_rejected():
    with pytest.raises(DomainError):
        faddeev.momentum_pair(
            1.0, [1, 0, 0], 1.0, frame=([0, 1, 0], [0, 0.99, 0.1])
        )


@given(
    energy=st.floats(0.1, 50.0),
    rho=st.floats(0.0, 20.0),
    px=st.floats(-2.0, 2.0),
    py=st.floats(-2.0, 2.0),
    pz=st.floats(-2.0, 2.0),
)
@settings(max_examples=60, deadline=None)
def test_pair_algebra_property(energy, rho, px, py, pz):
    p = np.array([px, py, pz])
    if p @ p > 4 * (energy + rho * rho):
        with pytest.raises(ConstraintError):
            faddeev.momentum_pair(energy, p, rho)
        return
    pair = faddeev.momentum_pair(energy, p, rho)
    defs = pair.defects()
    scale = max(1.0, energy, rho * rho)
    assert all(v <= 1e-10 * scale for v in defs.values())
    assert_allclose(pair.p, p, atol=1e-10 * max(1.0, np.linalg.norm(p)))


# ---------------------------------------------------------------------------
# Kernel lattice
# ---------------------------------------------------------------------------
def test_green_requires_complex_momentum():
    with pytest.raises(DomainError):
        faddeev.faddeev_green_grid(
            faddeev.ComplexMomentum(np.array([1.0, 0, 0])), 2.8, 8
        )


def test_green_offset_resampling():
    # the zero set passes through xi = (1, 0, 0.5) for the first trial
    # offset (half-step along the Im k axis); the constructor must
    # detect it and resample with a different offset
    k = faddeev.ComplexMomentum(
        np.array([-0.625, 0, 0]) + 1j * np.array([0, 0, 1e-10])
    )
    gg = faddeev.faddeev_green_grid(k, 2 * np.pi, 8)
    assert not np.allclose(gg.offset, [0, 0, 0.5])
    assert gg.min_symbol_distance > 1e-8


def test_green_symbol_roundtrip(vsmall):
    k = faddeev.momentum_pair(1.0, [0.5, 0, 0], 2.0).k
    gg = faddeev.green_for_potential(k, vsmall)
    rep = gg.residual_report()
    assert rep["pass"]
    assert rep["relative_residual"] < 1e-10


def test_green_eval_matches_grid(vsmall):
    k = faddeev.momentum_pair(1.0, [0.5, 0, 0], 2.0).k
    gg = faddeev.green_for_potential(k, vsmall)
    c = gg.axis_coords()
    pts = np.array([[c[3], c[7], c[12]], [c[20], c[5], c[9]]])
    expect = np.array([gg.values[3, 7, 12], gg.values[20, 5, 9]])
    assert np.max(np.abs(gg.eval_at(pts) - expect)) < 1e-12


@pytest.mark.slow
def test_green_refinement(vsmall):
    for rho in (2.0, 4.0):
        k = faddeev.momentum_pair(1.0, [0.5, 0, 0], rho).k
        g1 = faddeev.faddeev_green_grid(k, 2.8, 32)
        g2 = faddeev.faddeev_green_grid(k, 2.8, 64)
        pts = np.array([[0.21, -0.33, 0.11], [0.4, 0.1, -0.2]])
        a, b = g1.eval_at(pts), g2.eval_at(pts)
        assert np.max(np.abs(a - b) / np.abs(b)) < 0.05


# ---------------------------------------------------------------------------
# Growing-solution solves
# ---------------------------------------------------------------------------
def test_mu_zero_potential_all_modes():
    vz = potentials.make_family({"family": "zero"}, 3, 0.7, 1.0, 8)
    k = faddeev.momentum_pair(1.0, [0, 0, 0], 2.0).k
    for mode in ("born", "series", "direct"):
        fld = faddeev.solve_mu(vz, k, mode)
        assert np.all(fld.mu == 1.0)


def test_mu_series_vs_direct(vsmall):
    k = faddeev.momentum_pair(1.0, [0.5, 0, 0], 3.0).k
    gg = faddeev.green_for_potential(k, vsmall)
    f1 = faddeev.solve_mu(vsmall, k, "series", green=gg)
    f2 = faddeev.solve_mu(vsmall, k, "direct", green=gg)
    assert f1.contraction < 0.5
    assert np.max(np.abs(f1.mu - f2.mu)) < 1e-6


def test_mu_to_one_monotone(vsmall):
    sups = []
    for rho in (5.0, 10.0, 20.0, 40.0):
        k = faddeev.momentum_pair(1.0, [0.5, 0, 0], rho).k
        fld = faddeev.solve_mu(vsmall, k, "series")
        sups.append(np.max(np.abs(fld.mu - 1.0)))
    assert all(a > b for a, b in zip(sups, sups[1:]))


def test_mu_bound_stats_logged(vsmall):
    # sup|mu| + sup|grad mu| <= 2 above an empirical |k| threshold
    k = faddeev.momentum_pair(1.0, [0.5, 0, 0], 8.0).k
    fld = faddeev.solve_mu(vsmall, k, "series")
    stats = fld.mu_stats()
    assert stats["bound_sum"] <= 2.0
    print(f"bound_sum at |k|={k.norm:.1f}: {stats['bound_sum']:.3f}")


def test_series_divergence_detected():
    v = potentials.gaussian_bump(3, 0.7, 1.0, 10, amplitude=120.0)
    k = faddeev.momentum_pair(1.0, [0, 0, 0], 1.0).k
    with pytest.raises(NonConvergenceError) as err:
        faddeev.solve_mu(v, k, "series", maxiter=30)
    assert err.value.contraction is None or err.value.contraction > 0


# ---------------------------------------------------------------------------
# Fourier coefficients and amplitudes
# ---------------------------------------------------------------------------
def test_potential_fourier_dc(vsmall):
    got = faddeev.potential_fourier(vsmall, [0, 0, 0])
    expect = (2 * np.pi) ** -3 * vsmall.h**3 * np.sum(vsmall.values)
    assert abs(got - expect) < 1e-15


def test_potential_fourier_reality(vsmall, rng):
    p = rng.normal(size=3)
    a = faddeev.potential_fourier(vsmall, p)
    b = faddeev.potential_fourier(vsmall, -p)
    assert abs(a - np.conj(b)) < 1e-14


def test_potential_fourier_separable_oracle():
    # cosine bump: refined-quadrature oracle on a 3x finer grid
    def build(n):
        c = -0.7 + (np.arange(n) + 0.5) * (1.4 / n)
        x, y, z = np.meshgrid(c, c, c, indexing="ij")
        v = (
            np.cos(np.pi * x / 1.4)
            * np.cos(np.pi * y / 1.4)
            * np.cos(np.pi * z / 1.4)
        ) ** 2
        r2 = x * x + y * y + z * z
        v = np.where(r2 < 0.49, v, 0.0)
        return forward.GridPotential(3, 0.7, 1.0, v, 8.0, 10.0)

    p = np.array([1.3, -0.4, 0.8])
    coarse = faddeev.potential_fourier(build(12), p)
    fine = faddeev.potential_fourier(build(36), p)
    assert abs(coarse - fine) < 1e-3 * max(abs(fine), 1e-6) + 1e-6


def test_amplitude_born_mode_equals_fourier(vsmall):
    pair = faddeev.momentum_pair(1.0, [0.8, 0.3, 0], 2.0)
    h_born = faddeev.scattering_amplitude(vsmall, pair, mode="born")
    hat = faddeev.potential_fourier(vsmall, pair.p)
    assert abs(h_born - hat) < 1e-15


def test_amplitude_zero_potential():
    vz = potentials.make_family({"family": "zero"}, 3, 0.7, 1.0, 8)
    pair = faddeev.momentum_pair(1.0, [0.5, 0, 0], 2.0)
    assert faddeev.scattering_amplitude(vz, pair, mode="series") == 0


def test_born_limit_and_sqrt_envelope(vsmall):
    # gap -> 0 and gap <= c / sqrt(E + rho^2) with c fitted at the first rung
    pvec = [0.5, 0, 0]
    hat = faddeev.potential_fourier(vsmall, np.asarray(pvec, float))
    xs, gaps = [], []
    for rho in (4.0, 8.0, 16.0, 32.0):
        pair = faddeev.momentum_pair(1.0, pvec, rho)
        h = faddeev.scattering_amplitude(vsmall, pair, mode="series")
        xs.append(np.sqrt(1.0 + rho * rho))
        gaps.append(abs(hat - h))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    c_fit = gaps[0] * xs[0]
    assert all(g <= c_fit / x * (1 + 1e-9) for x, g in zip(xs, gaps))


def test_bilinear_identity_exact(pair3d):
    v1, v2 = pair3d
    pair = faddeev.momentum_pair(2.0, [0.8, 0.3, 0.0], 3.0)
    gg = faddeev.green_for_potential(pair.k, v1)
    dh = faddeev.amplitude_difference(v1, v2, pair, mode="direct", green=gg)
    h1 = faddeev.scattering_amplitude(v1, pair, mode="direct", green=gg)
    h2 = faddeev.scattering_amplitude(v2, pair, mode="direct", green=gg)
    assert abs(dh - (h2 - h1)) <= 1e-10 * max(abs(h2 - h1), 1e-12)


def test_amplitude_difference_same_potential(vsmall):
    pair = faddeev.momentum_pair(1.0, [0.5, 0, 0], 2.0)
    assert faddeev.amplitude_difference(vsmall, vsmall, pair, mode="series") == 0


def test_difference_born_regime(pair3d):
    # Born-mode difference equals the Fourier-coefficient difference
    v1, v2 = pair3d
    pair = faddeev.momentum_pair(9.0, [0.7, 0, 0], 6.0)
    dh = faddeev.amplitude_difference(v1, v2, pair, mode="born")
    expect = faddeev.potential_fourier(v2, pair.p) - faddeev.potential_fourier(
        v1, pair.p
    )
    assert abs(dh - expect) < 1e-15
    # series mode approaches it as the momentum grows
    d_series = faddeev.amplitude_difference(v1, v2, pair, mode="series")
    assert abs(d_series - expect) < 0.05 * abs(expect)


def test_growing_field_evaluator_consistency(vsmall):
    k = faddeev.momentum_pair(1.0, [0.5, 0, 0], 2.0).k
    fld = faddeev.solve_mu(vsmall, k, "series")
    ev = faddeev.growing_field_evaluator(fld)
    cc = vsmall.axis_coords()
    pts = np.array([[cc[3], cc[5], cc[7]], [cc[0], cc[11], cc[6]]])
    expect = np.exp(1j * pts @ k.vec) * np.array(
        [fld.mu[3, 5, 7], fld.mu[0, 11, 6]]
    )
    assert np.max(np.abs(ev(pts) - expect)) < 1e-10
