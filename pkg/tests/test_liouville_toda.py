import functools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerlab.errors import (
    ConfigInvalid,
    NewtonDiverged,
    OrderingViolated,
    SeparationTooSmall,
)
from layerlab.liouville_toda import (
    counterexample_profile,
    decay_iteration_experiment,
    farina_exponent,
    farina_integral,
    liouville_stability_margin,
    make_singular_liouville,
    morrey_trace,
    ode_residual,
    q2_gap_closed_form,
    singular_offset,
    solve_radial_liouville,
    solve_toda_bvp,
    toda_first_integral,
)


@pytest.fixture(scope="module")
def smooth10():
    return solve_radial_liouville(10, r_max=1e6)


@pytest.fixture(scope="module")
def toda_q2():
    return solve_toda_bvp(2, 12.0, 40.0)


# ----------------------------------------------------------------------
# Radial Liouville equation.

def test_smooth_residual(smooth10):
    assert ode_residual(smooth10) <= 1e-8


def test_singular_residual():
    assert ode_residual(make_singular_liouville(10)) <= 1e-10


def test_singular_profile_values():
    sol = make_singular_liouville(10)
    # V = 2(m-2)/r^2 along the exact profile.
    assert np.allclose(sol.v * sol.r ** 2, 16.0, rtol=1e-12)
    assert singular_offset(10) == pytest.approx(-math.log(16.0), abs=1e-15)


def test_smooth_approaches_singular(smooth10):
    dev = smooth10.f[-1] - (2.0 * math.log(smooth10.r[-1]) + singular_offset(10))
    assert abs(dev) <= 1e-10


def test_smooth_approaches_singular_slowly_in_low_dimension():
    sol = solve_radial_liouville(3, r_max=1e6)
    dev = sol.f[-1] - (2.0 * math.log(sol.r[-1]) + singular_offset(3))
    # Oscillatory approach at rate r^{-1/2} in dimension 3.
    assert abs(dev) <= 5e-3
    assert abs(dev) >= 1e-5


def test_center_series(smooth10):
    r = np.array([1e-3, 1e-2])
    expect = 0.0 + r ** 2 / 20.0
    assert np.allclose(smooth10.eval_f(r), expect, atol=1e-9)


@functools.lru_cache(maxsize=None)
def _solution_m4(f_center: float):
    return solve_radial_liouville(4, f_center=f_center, r_max=100.0)


@given(lam=st.sampled_from([0.5, 0.8, 1.3, 2.0]),
       r=st.floats(min_value=0.1, max_value=10.0))
def test_scaling_covariance(lam, r):
    """f(lam r) + 2 log lam solves the equation with shifted center value."""
    base = _solution_m4(0.0)
    shifted = _solution_m4(2.0 * math.log(lam))
    lhs = shifted.eval_f(np.array([r]))[0]
    rhs = base.eval_f(np.array([r / lam]))[0] + 2.0 * math.log(lam)
    assert abs(lhs - rhs) <= 1e-9


def test_dimension_guard():
    with pytest.raises(ConfigInvalid):
        solve_radial_liouville(2)
    with pytest.raises(ConfigInvalid):
        make_singular_liouville(1)


# ----------------------------------------------------------------------
# Stability margin across the critical dimension.

@pytest.mark.parametrize("m,expected", [(9, -1.75), (10, 0.0), (11, 2.25)])
def test_singular_margin(m, expected):
    sol = make_singular_liouville(m, r_min=1e-11, r_max=1e11)
    assert liouville_stability_margin(sol) == pytest.approx(expected, abs=5e-3)


def test_margin_sign_pattern():
    margins = [liouville_stability_margin(
        make_singular_liouville(m, r_min=1e-11, r_max=1e11))
        for m in (9, 10, 11)]
    assert margins[0] < -0.5
    assert abs(margins[1]) <= 5e-3
    assert margins[2] > 0.5


# ----------------------------------------------------------------------
# Farina-type integral growth.

@pytest.mark.parametrize("m,q", [(10, 1.8), (10, 0.0), (9, 1.8), (11, 1.5)])
def test_farina_exponent_exact(m, q):
    sol = make_singular_liouville(m, r_min=1e-3, r_max=1e5)
    slope, info = farina_exponent(sol, q, [10.0, 100.0, 1e3, 1e4])
    assert slope == pytest.approx(m - 2.0 * (2.0 * q + 1.0), abs=1e-10)


def test_farina_boundedness_switch():
    # At q = 1.8 the ball integral saturates for m = 9 but grows for m = 10.
    grow = farina_exponent(make_singular_liouville(10, r_min=1e-3, r_max=1e5),
                           1.8, [10.0, 100.0, 1e3, 1e4])[0]
    sat = farina_exponent(make_singular_liouville(9, r_min=1e-3, r_max=1e5),
                          1.8, [10.0, 100.0, 1e3, 1e4])[0]
    assert grow > 0.0 > sat


def test_farina_guards():
    sol = make_singular_liouville(10)
    with pytest.raises(ConfigInvalid):
        farina_integral(sol, 2.0, 10.0)
    with pytest.raises(ConfigInvalid):
        farina_integral(sol, 1.0, 1e9)


def test_morrey_trace(smooth10):
    tr = morrey_trace(smooth10, [10.0, 100.0, 1e3, 1e4])
    assert tr.meta["slope"] == pytest.approx(8.0, abs=1e-2)
    assert tr.meta["slope"] >= tr.meta["expected_min"]


# ----------------------------------------------------------------------
# Toda chain.

def test_toda_matches_closed_form(toda_q2):
    rho = q2_gap_closed_form(12.0, 40.0, 12.0)
    gap = toda_q2.f[1] - toda_q2.f[0]
    assert np.max(np.abs(gap - rho(toda_q2.x))) <= 1e-9
    assert toda_q2.residual <= 1e-9


def test_toda_first_integral_flat(toda_q2):
    H = toda_first_integral(toda_q2)
    assert np.max(H) - np.min(H) <= 1e-12


def test_toda_symmetry(toda_q2):
    # Symmetric data: gap is even, mean height is linear (here zero).
    gap = toda_q2.f[1] - toda_q2.f[0]
    assert np.max(np.abs(gap - gap[::-1])) <= 1e-9
    mean = 0.5 * (toda_q2.f[1] + toda_q2.f[0])
    assert np.max(np.abs(mean)) <= 1e-9


def test_toda_multicomponent_ordering():
    st_ = solve_toda_bvp(5, 10.0, 30.0)
    gaps = st_.gaps()
    assert np.min(gaps) > 0.0
    assert st_.residual <= 1e-9


def test_decay_halving_ratio():
    # Closed form: the gap doubles its interaction decay over
    # arccosh(sqrt 2)/beta, which is arccosh(sqrt 2)/sqrt(c) in units
    # of the predicted length 1/sqrt(a_max).
    st_ = solve_toda_bvp(2, 8.0, 20.0)
    tr = decay_iteration_experiment(st_)
    assert tr.halving_ratio == pytest.approx(
        math.acosh(math.sqrt(2.0)) / math.sqrt(12.0), abs=1e-3)
    assert tr.halving_ratio <= 10.0


def test_decay_trace_monotone():
    st_ = solve_toda_bvp(2, 8.0, 20.0)
    tr = decay_iteration_experiment(st_)
    assert np.all(np.diff(tr.values) >= 0.0)
    assert tr.values[-1] == pytest.approx(tr.a_max, rel=1e-12)


@given(shift=st.floats(min_value=-20.0, max_value=20.0))
def test_toda_translation_equivariance(shift):
    a = solve_toda_bvp(2, 10.0, 20.0, n_points=801)
    heights = (np.arange(2) - 0.5) * 10.0 + shift
    b = solve_toda_bvp(2, 10.0, 20.0, n_points=801, bc=(heights, heights))
    assert np.max(np.abs(b.f - a.f - shift)) <= 1e-8


def test_toda_guards():
    with pytest.raises(ConfigInvalid):
        solve_toda_bvp(1, 12.0, 40.0)
    with pytest.raises(SeparationTooSmall):
        solve_toda_bvp(2, 3.0, 40.0)
    with pytest.raises(OrderingViolated):
        solve_toda_bvp(2, 12.0, 40.0,
                       bc=(np.array([6.0, -6.0]), np.array([-6.0, 6.0])))
    with pytest.raises(NewtonDiverged):
        solve_toda_bvp(2, 6.0, 30.0)  # below the fold threshold
    with pytest.raises(SeparationTooSmall):
        q2_gap_closed_form(8.0, 40.0, 12.0)


# ----------------------------------------------------------------------
# Flattened envelope counterexample.

def test_counterexample_hessian(smooth10):
    ce = counterexample_profile(smooth10, 1e-4)
    assert ce["hessian_center"] == pytest.approx(0.1, abs=1e-12)
    assert ce["hessian_probe"] == pytest.approx(-2e-4, rel=5e-3)
    # The center Hessian survives while the off-center one dies with eps.
    assert abs(ce["hessian_center"]) > 100.0 * abs(ce["hessian_probe"])


def test_counterexample_graphs(smooth10):
    ce = counterexample_profile(smooth10, 1e-3)
    assert np.all(ce["f_upper"] >= ce["offset"] - 1e-15)
    assert np.allclose(ce["f_lower"], -ce["f_upper"])
    mid = ce["x"].size // 2
    assert ce["f_upper"][mid] == pytest.approx(ce["offset"], abs=1e-12)


def test_counterexample_guards(smooth10):
    with pytest.raises(ConfigInvalid):
        counterexample_profile(make_singular_liouville(10), 1e-3)
    with pytest.raises(ConfigInvalid):
        counterexample_profile(smooth10, 1e-12)  # reach beyond sampled radii
