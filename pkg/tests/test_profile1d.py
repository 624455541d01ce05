import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerlab.errors import ConfigInvalid, EpsTooLarge, ProfileRangeTooShort
from layerlab.profile1d import (
    bump,
    bump_derivatives,
    constants,
    second_eigenvalue,
    solve_profile,
    truncate,
)

SIGMA0 = 2.0 / 3.0


def test_surface_tension(profile):
    assert abs(profile.sigma0 - SIGMA0) <= 1e-10
    assert profile.sigma0_err <= 1e-10


def test_tail_amplitudes(profile):
    assert abs(profile.a_plus - 2.0) <= 1e-7
    assert abs(profile.a_minus - 2.0) <= 1e-7


def test_profile_matches_tanh(profile):
    t = np.linspace(-20.0, 20.0, 4001)
    assert np.max(np.abs(profile.eval_g(t) - np.tanh(t / 2.0))) <= 1e-8
    assert abs(profile.eval_g(1.0) - math.tanh(0.5)) <= 1e-10


def test_first_integral(profile):
    t = np.linspace(-profile.t_max, profile.t_max, 3001)
    g = profile.eval_g(t)
    g1 = profile.eval_g1(t)
    w = profile.potential.w(g)
    assert np.max(np.abs(g1 ** 2 - 2.0 * w)) <= 1e-8


def test_monotone_and_odd(profile):
    t = np.linspace(0.0, 15.0, 1501)
    assert np.max(np.abs(profile.eval_g(-t) + profile.eval_g(t))) <= 1e-8
    g = profile.eval_g(t)
    assert np.all(np.diff(g) > 0.0)


def test_constants_dict(profile):
    c = constants(profile)
    assert set(c) == {"sigma0", "sigma0_err", "a_plus", "a_minus"}
    assert c["sigma0"] == profile.sigma0


def test_range_too_short(quartic):
    with pytest.raises(ProfileRangeTooShort):
        solve_profile(quartic, t_max=8.0)


def test_bad_resolution(quartic):
    with pytest.raises(ConfigInvalid):
        solve_profile(quartic, n_points=128)


@given(t=st.floats(min_value=-12.0, max_value=12.0))
def test_derivative_consistency(profile, t):
    h = 1e-4
    fd = (profile.eval_g(t + h) - profile.eval_g(t - h)) / (2.0 * h)
    assert abs(fd - profile.eval_g1(t)) <= 1e-6


@given(t=st.floats(min_value=-30.0, max_value=30.0))
def test_second_derivative_is_w1(profile, t):
    # The equation itself: g'' = W'(g).
    h = 1e-3
    fd = (profile.eval_g(t + h) - 2.0 * profile.eval_g(t)
          + profile.eval_g(t - h)) / h ** 2
    assert abs(fd - profile.eval_g2(t)) <= 1e-5


# ----------------------------------------------------------------------
# Spectral gap of the linearized operator.

def test_spectral_gap(profile):
    mu = second_eigenvalue(profile)
    assert abs(mu - 0.75) <= 1e-5


def test_ground_state(profile):
    mu, details = second_eigenvalue(profile, return_details=True)
    assert abs(details["ground_eigenvalue"]) <= 1e-6
    assert details["ground_overlap_with_g1"] >= 0.999


# ----------------------------------------------------------------------
# Cutoff bump and truncation.

def test_bump_plateau_and_support():
    s = np.linspace(-3.0, 3.0, 1201)
    z = bump(s)
    assert np.all(z[np.abs(s) <= 1.0] == 1.0)
    assert np.all(z[np.abs(s) >= 2.0] == 0.0)
    assert np.all((z >= 0.0) & (z <= 1.0))


def test_bump_derivative_budget():
    s = np.linspace(-2.5, 2.5, 20001)
    z = bump_derivatives(s)
    assert np.max(np.abs(z[1])) + np.max(np.abs(z[2])) <= 16.0


def test_bump_c2_continuity():
    h = 1e-6
    for edge in (-2.0, -1.0, 1.0, 2.0):
        lo = bump_derivatives(np.array([edge - h]))[2]
        hi = bump_derivatives(np.array([edge + h]))[2]
        assert abs(float(hi[0]) - float(lo[0])) <= 1e-3


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_truncation_defect_cubic(long_profile, eps):
    trunc = truncate(long_profile, eps)
    assert trunc.sup_defect <= 0.01 * eps ** 3
    assert abs(trunc.gradient_mass - SIGMA0) <= eps ** 3


def test_truncation_support(long_profile):
    trunc = truncate(long_profile, 1e-2)
    li, lo = trunc.cut_inner, trunc.cut_outer
    inner = np.linspace(-0.99 * li, 0.99 * li, 501)
    outer = np.concatenate([np.linspace(lo * 1.01, lo * 1.5, 101),
                            -np.linspace(lo * 1.01, lo * 1.5, 101)])
    assert np.all(trunc.xi(inner) == 0.0)
    assert np.all(trunc.xi(outer) == 0.0)
    ramp = np.linspace(li * 1.05, lo * 0.95, 301)
    assert np.max(np.abs(trunc.xi(ramp))) > 0.0


def test_truncation_saturates(long_profile):
    trunc = truncate(long_profile, 1e-2)
    t = np.linspace(trunc.cut_outer, trunc.cut_outer + 5.0, 64)
    assert np.all(trunc.gbar(t) == 1.0)
    assert np.all(trunc.gbar(-t) == -1.0)


def test_truncation_eps_guard(profile, long_profile):
    with pytest.raises(EpsTooLarge):
        truncate(profile, 0.12)
    with pytest.raises(EpsTooLarge):
        truncate(profile, 1e-3)  # needs samples beyond t_max=25
    with pytest.raises(ConfigInvalid):
        truncate(long_profile, 0.5)
