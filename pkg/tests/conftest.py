import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from layerlab.allencahn2d import ScalarField2D, solve_newton
from layerlab.liouville_toda import q2_gap_closed_form
from layerlab.potential import make_quartic
from layerlab.profile1d import solve_profile, truncate

settings.register_profile(
    "layerlab",
    derandomize=True,
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("layerlab")


@pytest.fixture(scope="session")
def quartic():
    return make_quartic()


@pytest.fixture(scope="session")
def profile(quartic):
    return solve_profile(quartic)


@pytest.fixture(scope="session")
def long_profile(quartic):
    return solve_profile(quartic, t_max=60.0, n_points=48001)


@pytest.fixture(scope="session")
def trunc_em2(long_profile):
    return truncate(long_profile, 1e-2)


@pytest.fixture(scope="session")
def flat2d(quartic):
    """Single flat layer on [-4,4] x [-12,12], Dirichlet tanh data."""
    h = 0.05
    nx, ny = int(round(8.0 / h)) + 1, int(round(24.0 / h)) + 1
    f0 = ScalarField2D.from_function(lambda x, y: np.tanh(y / 2.0),
                                     -4.0, -12.0, h, h, nx, ny)
    return solve_newton(f0, quartic, tol=1e-11)


def make_two_layer(quartic, d, length, margin, h, c=12.0):
    closed = q2_gap_closed_form(d, length, c)
    nx = int(round(length / h)) + 1
    ny = int(round((d + 2.0 * margin) / h)) + 1

    def init(x, y):
        gap = closed.rho0 + 2.0 * np.log(np.cosh(closed.beta * x))
        return (np.tanh((y + gap / 2.0) / 2.0)
                - np.tanh((y - gap / 2.0) / 2.0) - 1.0)

    f0 = ScalarField2D.from_function(init, -length / 2.0,
                                     -(d / 2.0 + margin), h, h, nx, ny)
    return solve_newton(f0, quartic, tol=1e-11)


@pytest.fixture(scope="session")
def two_layer(quartic):
    """Curvature-balanced pair of layers, mean gap 10, on a 30-wide strip."""
    return make_two_layer(quartic, 10.0, 30.0, 12.0, 0.06)
