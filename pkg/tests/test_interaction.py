import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerlab.errors import ConfigInvalid, IllConditionedFit
from layerlab.interaction import (
    fit_asymptotics,
    interaction_curve,
    interaction_integral_minus,
    interaction_integral_plus,
)


@pytest.fixture(scope="module")
def curve(profile):
    return interaction_curve(profile, [10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 21.0])


def test_scaled_interaction_near_one(curve):
    bound = 2.0 * np.exp(-curve.T / 3.0)
    assert np.all(np.abs(curve.scaled_plus - 1.0) <= bound)


def test_plus_minus_antisymmetry(curve):
    # Even potential: the two one-sided integrals cancel exactly.
    assert np.all(np.abs(curve.i_plus + curve.i_minus)
                  <= 1e-12 * np.abs(curve.i_plus))
    assert np.all(np.abs(curve.scaled_plus + curve.scaled_minus) <= 1e-12)


def test_efolding_ratio(profile):
    i20 = interaction_integral_plus(profile, 20.0)
    i21 = interaction_integral_plus(profile, 21.0)
    assert abs(i21 / i20 - math.exp(-1.0)) <= 1e-6


def test_fit_leading_coefficient(curve):
    fit = fit_asymptotics(curve.T, curve.i_plus)
    # The limit of exp(T) I is 2 A^2 = 8 for tail amplitude 2.
    assert abs(fit["c0"] - 8.0) <= 0.02
    assert 0.2 <= fit["rate"] <= 1.0


def test_fit_exact_synthetic():
    T = np.linspace(10.0, 24.0, 8)
    y = (8.0 + 3.0 * np.exp(-T / 3.0)) * np.exp(-T)
    fit = fit_asymptotics(T, y)
    assert abs(fit["c0"] - 8.0) <= 1e-9
    assert abs(fit["rate"] - 1.0 / 3.0) <= 1e-6
    assert abs(fit["c1"] - 3.0) <= 1e-6


@given(
    c0=st.floats(min_value=0.5, max_value=20.0),
    c1=st.floats(min_value=-5.0, max_value=5.0),
    rate=st.floats(min_value=0.25, max_value=0.95),
)
def test_fit_recovers_model(c0, c1, rate):
    T = np.linspace(8.0, 26.0, 10)
    y = (c0 + c1 * np.exp(-rate * T)) * np.exp(-T)
    fit = fit_asymptotics(T, y)
    scale = max(abs(c0), 1.0)
    assert abs(fit["c0"] - c0) <= 1e-7 * scale
    if abs(c1) >= 0.1:
        assert abs(fit["rate"] - rate) <= 1e-3


def test_small_separation_rejected(profile):
    with pytest.raises(ConfigInvalid):
        interaction_integral_plus(profile, 6.0)
    with pytest.raises(ConfigInvalid):
        interaction_integral_minus(profile, 7.9)


def test_fit_needs_three_points():
    with pytest.raises(IllConditionedFit):
        fit_asymptotics([10.0, 12.0], [1.0, 1.1])


def test_empty_curve_rejected(profile):
    with pytest.raises(ConfigInvalid):
        interaction_curve(profile, [])
