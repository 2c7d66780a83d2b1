import numpy as np
import pytest

from nfscat import forward, potentials


@pytest.fixture(scope="session")
def bump2d():
    return potentials.gaussian_bump(2, 0.7, 1.0, 32, amplitude=0.8)


@pytest.fixture(scope="session")
def pair2d():
    v1 = potentials.gaussian_bump(2, 0.7, 1.0, 32, amplitude=0.8)
    extra = potentials.poly_bump(
        2, 0.7, 1.0, 32, amplitude=0.5, q=3, center=[0.15, 0.05], rho=0.4
    )
    v2 = forward.GridPotential(
        2, 0.7, 1.0, v1.values + extra.values, 8.0, v1.bound + extra.bound
    )
    return v1, v2


@pytest.fixture(scope="session")
def bump3d():
    return potentials.gaussian_bump(3, 0.7, 1.0, 12, amplitude=0.6)


@pytest.fixture(scope="session")
def pair3d(bump3d):
    extra = potentials.poly_bump(
        3, 0.7, 1.0, 12, amplitude=0.4, q=3, center=[0.1, 0.05, 0.0], rho=0.45
    )
    v2 = forward.GridPotential(
        3, 0.7, 1.0, bump3d.values + extra.values, 8.0, bump3d.bound + extra.bound
    )
    return bump3d, v2


@pytest.fixture(scope="session")
def circle128():
    return forward.circle_mesh(1.0, 128)


@pytest.fixture(scope="session")
def sphere_mesh():
    return forward.sphere_mesh(1.0, 16, 32)


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
