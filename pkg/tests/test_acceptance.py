"""End-to-end acceptance: the tolerances promised by the pipeline.

Each test covers one headline guarantee, from the 1d profile constants
through the clustered 2d states and the scaling sweep. Budgets are wall
clock for the test body; session fixtures are shared precomputation.
"""
import contextlib
import math
import time

import numpy as np
import pytest

from conftest import make_two_layer
from layerlab.allencahn2d import ScalarField2D, sz_curvature_term
from layerlab.harness import ScenarioConfig, run_scenario
from layerlab.interaction import fit_asymptotics, interaction_curve
from layerlab.liouville_toda import (
    farina_exponent,
    liouville_stability_margin,
    make_singular_liouville,
    q2_gap_closed_form,
    solve_toda_bvp,
    toda_first_integral,
)
from layerlab.profile1d import second_eigenvalue, truncate
from layerlab.reduction import FermiFrame, reduce_state, solve_optimal_h
from layerlab.stability import seeded_eta, sz_form


@contextlib.contextmanager
def budget(seconds):
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    assert elapsed < seconds, f"budget {seconds}s exceeded: {elapsed:.1f}s"


def test_profile_constants(profile):
    with budget(1.0):
        assert abs(profile.sigma0 - 2.0 / 3.0) < 1e-8
        assert abs(profile.a_plus - 2.0) < 1e-6
        assert abs(profile.a_minus - 2.0) < 1e-6
        assert abs(profile.eval_g(1.0) - math.tanh(0.5)) < 1e-8


def test_spectral_gap(profile):
    with budget(5.0):
        assert abs(second_eigenvalue(profile) - 0.75) < 1e-3


def test_interaction_asymptotics(profile):
    with budget(10.0):
        T = np.array([10.0, 12.0, 14.0, 16.0])
        curve = interaction_curve(profile, T)
        bound = 2.0 * np.exp(-T / 3.0)
        assert np.all(np.abs(curve.scaled_plus - 1.0) <= bound)
        assert np.all(np.abs(curve.scaled_plus + curve.scaled_minus) <= 1e-12)
        dense = interaction_curve(profile, np.arange(10.0, 19.0))
        fit = fit_asymptotics(dense.T, dense.i_plus)
        assert abs(fit["c0"] - 8.0) < 0.02


def test_truncation_defect(long_profile):
    with budget(1.0):
        for eps in (1e-2, 1e-3):
            tp = truncate(long_profile, eps)
            assert tp.sup_defect <= 0.01 * eps ** 3
            li, lo = tp.cut_inner, tp.cut_outer
            t_in = np.linspace(-li, li, 2001)
            assert np.all(tp.xi(t_in) == 0.0)
            t_out = np.concatenate([np.linspace(lo, lo + 20.0, 501),
                                    np.linspace(-lo - 20.0, -lo, 501)])
            assert np.all(tp.xi(t_out) == 0.0)
            t_ramp = np.linspace(li + 0.5, lo - 0.5, 101)
            assert np.any(tp.xi(t_ramp) != 0.0)


def test_singular_margins_and_weighted_integrals():
    with budget(30.0):
        sols = {m: make_singular_liouville(m, r_min=1e-11, r_max=1e11)
                for m in (9, 10, 11)}
        assert liouville_stability_margin(sols[9]) < -0.5
        assert abs(liouville_stability_margin(sols[10])) <= 5e-3
        assert liouville_stability_margin(sols[11]) > 0.0

        K = np.geomspace(1e-8, 1e8, 12)
        slope10, det10 = farina_exponent(sols[10], 1.8, K)
        assert abs(slope10 - (10.0 - 2.0 * (2.0 * 1.8 + 1.0))) < 0.05
        slope9, det9 = farina_exponent(sols[9], 1.8, K)
        assert abs(slope9 - (9.0 - 2.0 * (2.0 * 1.8 + 1.0))) < 0.05
        # growth switch at this q: the ball integral saturates one
        # dimension down and diverges one dimension up
        assert slope9 < 0.0 < slope10
        assert det9["increments"][-1] < det9["increments"][0]
        assert det10["increments"][-1] > det10["increments"][0]


def test_toda_invariants():
    with budget(5.0):
        state = solve_toda_bvp(2, 12.0, 40.0, c=12.0)
        drift = toda_first_integral(state)
        assert np.max(np.abs(drift - drift[0])) < 1e-7
        closed = q2_gap_closed_form(12.0, 40.0, 12.0)
        gap = state.f[1] - state.f[0]
        assert np.max(np.abs(gap - closed(state.x))) < 1e-6


def test_offset_recovery(trunc_em2):
    with budget(5.0):
        x = np.linspace(-15.0, 15.0, 101)
        frame = FermiFrame(x=x, height=np.zeros_like(x), orientation=1)
        for s in (0.0, 0.3, -0.7):
            res = solve_optimal_h(
                lambda px, py, s=s: trunc_em2.gbar(py - s),
                [frame], trunc_em2, tol=1e-12, z_band=12.0)
            assert np.max(np.abs(res.h[0] - s)) < 1e-6
            # re-verify the orthogonality with a quadrature the solver
            # never saw: dense trapezoid on a fresh grid
            z = np.linspace(-res.z_band, res.z_band, 100001)
            h0 = float(res.h[0][50])
            integrand = (trunc_em2.gbar(z - s) - trunc_em2.gbar(z - h0)) \
                * trunc_em2.gbar1(z - h0)
            assert abs(np.trapezoid(integrand, z)) < 1e-9


def test_reduced_equation_residual(quartic, trunc_em2):
    with budget(300.0):
        sups = []
        for d in (10.0, 12.0, 14.0):
            coarse, rc = make_two_layer(quartic, d, 30.0, 12.0, 0.06)
            fine, rf = make_two_layer(quartic, d, 30.0, 12.0, 0.03)
            assert rc.residual_sup < 1e-10 and rf.residual_sup < 1e-10
            rep = reduce_state((coarse, fine), trunc_em2, coupling=12.0,
                               expected=2)
            scale_gap = 12.0 * math.exp(-rep.d_min)
            scale_d = 12.0 * math.exp(-d)
            assert rep.e0_sup / scale_gap <= 0.3
            assert rep.e0_sup / scale_d <= 0.3
            assert rep.orthogonality < 1e-9
            sups.append(rep.e0_sup)
        assert sups[0] > sups[1] > sups[2]


def test_curvature_weighted_form(flat2d, two_layer):
    with budget(60.0):
        flat, _ = flat2d
        pair, _ = two_layer
        for state in (flat, pair):
            for seed in (0, 1, 2):
                out = sz_form(state, seeded_eta(state, seed))
                assert out["value"] >= -1e-6

        flat_b2 = sz_curvature_term(flat)
        assert np.max(np.abs(flat_b2["b2"][flat_b2["mask"]])) < 1e-6

        h = 0.02
        n = int(round(2.0 / h)) + 1
        radial = ScalarField2D.from_function(
            lambda x, y: np.tanh(
                (np.sqrt((x + 4.0) ** 2 + (y + 4.0) ** 2) - 5.0) / 2.0),
            -1.0, -1.0, h, h, n, n)
        out = sz_curvature_term(radial)
        r2 = ((out["x"][:, None] + 4.0) ** 2 + (out["y"][None, :] + 4.0) ** 2)
        vals = (out["b2"] * r2)[out["mask"]]
        assert np.max(np.abs(vals - 1.0)) < 0.05


def test_curvature_scaling_sweep():
    with budget(600.0):
        cfg = ScenarioConfig(
            kind="sweep",
            params={"l": 30.0, "margin": 10.0, "h": 0.06,
                    "d_values": [10.0, 11.5, 13.0, 14.5]})
        summary = run_scenario(cfg)
        assert summary["p"] >= 0.9
        assert summary["p_stderr"] < 0.5 * summary["p"]
