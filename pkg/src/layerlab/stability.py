"""Quadratic-form diagnostics for layered states.

Three views of the second variation are assembled here: the exact
discrete form Q(v) = int |grad v|^2 + W''(u) v^2, the curvature-weighted
inequality that bounds it from below for stable states, and the reduced
tangential-minus-interaction form predicted by the chain limit. The
module reports the pieces side by side; nothing here decides a
tolerance, that is left to callers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import make_interp_spline

from .allencahn2d import ScalarField2D, sz_curvature_term
from .errors import BandExceeded, ConfigInvalid
from .potential import Potential
from .profile1d import TruncatedProfile
from .reduction import FermiFrame

__all__ = [
    "second_variation",
    "composite_test_function",
    "seeded_eta",
    "sz_form",
    "StabilityFormReport",
    "reduced_form_sides",
]


def second_variation(f: ScalarField2D, p: Potential,
                     v: Union[ScalarField2D, np.ndarray]) -> float:
    """Exact discrete Q(v) = int |grad v|^2 + W''(u) v^2.

    The gradient part sums squared face differences, the potential part
    is a cell sum, matching the discretization of the energy.
    """
    vv = v.values if isinstance(v, ScalarField2D) else np.asarray(v, dtype=float)
    if vv.shape != f.values.shape:
        raise ConfigInvalid("test function does not match the field grid")
    cell = f.hx * f.hy
    gx = np.diff(vv, axis=0) / f.hx
    gy = np.diff(vv, axis=1) / f.hy
    grad2 = float(np.sum(gx ** 2)) * cell + float(np.sum(gy ** 2)) * cell
    w2 = p.w2(f.values)
    pot = float(np.sum(w2 * vv ** 2)) * cell
    return grad2 + pot


def composite_test_function(f: ScalarField2D, frames: Sequence[FermiFrame],
                            trunc: TruncatedProfile,
                            eta: Sequence[Union[Callable, np.ndarray]],
                            h: Optional[Sequence[np.ndarray]] = None
                            ) -> ScalarField2D:
    """Layer-localized test field sum_a eta_a(t) gbar'(sigma_a (d_a - h_a)).

    eta entries are either callables of the foot parameter or arrays on
    the frame abscissae (interpolated with a cubic spline). The bump
    gbar' confines each term to the normal band of its layer; if that
    band exceeds the focal scale of a frame the normal chart folds and
    BandExceeded is raised.
    """
    if len(eta) != len(frames):
        raise ConfigInvalid("need one eta per frame")
    for fr in frames:
        kmax = float(np.max(np.abs(fr.curvature(fr.x))))
        if trunc.cut_outer * kmax >= 0.5:
            raise BandExceeded(
                f"profile band {trunc.cut_outer:g} exceeds the focal scale "
                f"of a frame (kmax={kmax:.3g})")
    px = f.x[:, None]
    py = f.y[None, :]
    total = np.zeros((f.nx, f.ny))
    for a, fr in enumerate(frames):
        t, d = fr.project(px, py)
        if h is not None:
            off = make_interp_spline(fr.x, np.asarray(h[a], dtype=float), k=3)
            d = d - off(np.clip(t, fr.x[0], fr.x[-1]))
        amp = eta[a](t) if callable(eta[a]) else \
            make_interp_spline(fr.x, np.asarray(eta[a], dtype=float), k=3)(
                np.clip(t, fr.x[0], fr.x[-1]))
        total += amp * trunc.gbar1(float(fr.orientation) * d)
    return f.with_values(total)


def seeded_eta(f: ScalarField2D, seed: int, n_modes: int = 4,
               edge: float = 2.0) -> np.ndarray:
    """Smooth random tangential amplitude on the field grid, zero at the
    lateral edges; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    x = f.x
    span = x[-1] - x[0]
    xi = (x - x[0]) / span
    out = np.zeros_like(x)
    for k in range(1, n_modes + 1):
        a, b = rng.standard_normal(2)
        out += (a * np.cos(math.pi * k * xi) + b * np.sin(math.pi * k * xi)) / k
    wl = np.clip((x - x[0]) / edge, 0.0, 1.0)
    wr = np.clip((x[-1] - x) / edge, 0.0, 1.0)
    # smootherstep ramps keep the derivative continuous at the clip points
    s = wl * wl * (3.0 - 2.0 * wl) * wr * wr * (3.0 - 2.0 * wr)
    return out * s


def sz_form(f: ScalarField2D, eta: Union[ScalarField2D, np.ndarray],
            band_margin: float = 5e-3, grad_floor: float = 1e-8) -> dict:
    """Curvature-weighted lower-bound pieces for the second variation.

    For a stable state and any smooth eta,
        int |grad eta|^2 |grad u|^2  >=  int eta^2 |B|^2 |grad u|^2
    up to boundary terms; the dict reports both integrals and their
    difference. The curvature weight |B|^2 is only defined where
    |grad u| clears the floor, so both sides are restricted to that
    band.
    """
    ev = eta.values if isinstance(eta, ScalarField2D) else np.asarray(eta, dtype=float)
    if ev.shape != f.values.shape:
        if ev.shape == (f.nx,):
            ev = np.broadcast_to(ev[:, None], (f.nx, f.ny)).copy()
        else:
            raise ConfigInvalid("eta does not match the field grid")
    curv = sz_curvature_term(f, band_margin=band_margin, grad_floor=grad_floor)
    b2, grad2, mask = curv["b2"], curv["grad2"], curv["mask"]
    cell = f.hx * f.hy
    ex = (ev[2:, 1:-1] - ev[:-2, 1:-1]) / (2.0 * f.hx)
    ey = (ev[1:-1, 2:] - ev[1:-1, :-2]) / (2.0 * f.hy)
    e0 = ev[1:-1, 1:-1]
    lhs = float(np.sum(((ex ** 2 + ey ** 2) * grad2)[mask])) * cell
    rhs = float(np.sum((e0 ** 2 * b2 * grad2)[mask])) * cell
    return {"lhs": lhs, "rhs": rhs, "value": lhs - rhs,
            "band_fraction": float(np.mean(mask))}


@dataclass
class StabilityFormReport:
    """Side-by-side decomposition of the second variation on a layer stack."""

    full_form: float
    lhs_tangential: float
    rhs_interaction_vertical: float
    rhs_interaction_foot: float
    reduced_form: float
    q_budget: float
    discrepancy: float
    eps_analog: float
    a_max: float


def reduced_form_sides(f: ScalarField2D, p: Potential,
                       frames: Sequence[FermiFrame], trunc: TruncatedProfile,
                       eta: Sequence[np.ndarray], coupling: float,
                       h: Optional[Sequence[np.ndarray]] = None,
                       edge_pad: float = 2.0) -> StabilityFormReport:
    """Compare Q(v) on a composite test field with its chain-limit form.

    The reduced prediction is
        sum_a sigma0 int |eta_a'|^2 ds
        - coupling sigma0 sum_pairs int exp(-d) (s_a eta_a - s_b eta_b)^2 ds,
    where s_a is the layer orientation: eta multiplies the even bump
    gbar', so the physical displacement of layer a is s_a eta_a and
    alternating stacks couple through the sum eta_a + eta_b. The pair
    amplitudes are matched either at a common abscissa (vertical) or at
    the normal foot (foot); both matchings are reported.
    The budget collects the remainder scales expected at amplitude
    A = max exp(-gap) and eps-analog 1/min gap; the discrepancy between
    the full and reduced forms is reported against it, not asserted.
    """
    if len(eta) != len(frames):
        raise ConfigInvalid("need one eta per frame")
    sigma0 = trunc.gradient_mass
    v = composite_test_function(f, frames, trunc, eta, h=h)
    full = second_variation(f, p, v)

    etas = [make_interp_spline(fr.x, np.asarray(e, dtype=float), k=3)
            for fr, e in zip(frames, eta)]
    lhs = 0.0
    for fr, es in zip(frames, etas):
        de = es.derivative(1)(fr.x)
        w = np.sqrt(1.0 + fr.f1(fr.x) ** 2)
        lhs += sigma0 * float(np.trapezoid(de ** 2 / w, fr.x))

    rhs_v = 0.0
    rhs_f = 0.0
    a_max = 0.0
    for a, b, ea, eb in zip(frames[:-1], frames[1:], etas[:-1], etas[1:]):
        x = a.x[(a.x >= a.x[0] + edge_pad) & (a.x <= a.x[-1] - edge_pad)]
        w = np.sqrt(1.0 + a.f1(x) ** 2)
        t_up, d_up = b.project(x, a.f(x))
        gap = np.abs(d_up)
        a_max = max(a_max, float(np.max(np.exp(-gap))))
        sa, sb = float(a.orientation), float(b.orientation)
        diff_v = sa * ea(x) - sb * eb(np.clip(x, b.x[0], b.x[-1]))
        diff_f = sa * ea(x) - sb * eb(np.clip(t_up, b.x[0], b.x[-1]))
        rhs_v += coupling * sigma0 * float(
            np.trapezoid(np.exp(-gap) * diff_v ** 2 * w, x))
        rhs_f += coupling * sigma0 * float(
            np.trapezoid(np.exp(-gap) * diff_f ** 2 * w, x))

    reduced = lhs - rhs_v
    gaps = [float(np.min(np.abs(b.project(a.x, a.height)[1])))
            for a, b in zip(frames[:-1], frames[1:])]
    eps_analog = 1.0 / min(gaps) if gaps else 0.0
    mass_d = sum(float(np.trapezoid(es.derivative(1)(fr.x) ** 2, fr.x))
                 for fr, es in zip(frames, etas))
    mass_0 = sum(float(np.trapezoid(es(fr.x) ** 2, fr.x))
                 for fr, es in zip(frames, etas))
    budget = (eps_analog ** 0.25 + math.sqrt(a_max)) * mass_d + \
        (eps_analog ** 2 + a_max ** 1.5 + eps_analog ** (1.0 / 7.0) * a_max) * mass_0
    return StabilityFormReport(
        full_form=full, lhs_tangential=lhs,
        rhs_interaction_vertical=rhs_v, rhs_interaction_foot=rhs_f,
        reduced_form=reduced, q_budget=budget,
        discrepancy=abs(full - reduced), eps_analog=eps_analog, a_max=a_max)
