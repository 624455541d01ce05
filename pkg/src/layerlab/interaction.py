"""Tail-mediated interaction between two facing transition layers.

The two integrals below measure the force that a layer at distance T
exerts through the overlap of its exponential tail with the curvature of
the potential along a reference layer. To leading order they behave like
+-2 A^2 exp(-T); the fitting helper recovers that coefficient and bounds
the decay rate of the remainder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, IllConditionedFit
from .profile1d import Profile

__all__ = [
    "InteractionCurve",
    "interaction_integral_plus",
    "interaction_integral_minus",
    "interaction_curve",
    "fit_asymptotics",
]

_PAD = 36.0      # integration pad beyond the interacting cores
_PANEL = 2.0     # target panel width for composite Gauss-Legendre
_NODES = 16      # nodes per panel


def _panels(breaks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on a union of panels."""
    x_ref, w_ref = np.polynomial.legendre.leggauss(_NODES)
    a = breaks[:-1][:, None]
    b = breaks[1:][:, None]
    nodes = 0.5 * (b - a) * x_ref[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * np.tile(w_ref, (breaks.size - 1, 1))
    return nodes.ravel(), weights.ravel()

def _breakpoints(lo: float, hi: float, interior: list[float]) -> np.ndarray:
    pts = set(np.arange(math.ceil(lo / _PANEL), math.floor(hi / _PANEL) + 1) * _PANEL)
    pts.update([lo, hi])
    pts.update(x for x in interior if lo < x < hi)
    return np.array(sorted(pts))


def _check_T(T: float) -> float:
    T = float(T)
    if not (T >= 8.0 and math.isfinite(T)):
        raise ConfigInvalid(f"T={T!r} must be a finite separation >= 8")
    return T


def interaction_integral_plus(profile: Profile, T: float) -> float:
    """Integral of [W''(g(t)) - 1] [g(T - t) - 1] g'(t) over the line.

    Positive, asymptotic to 2 a_plus^2 exp(-T). Quadrature panels are
    split at the tail handover points of both factors so every panel
    sees a smooth integrand; refining the panels moves the value by
    less than 1e-9 relative.
    """
    T = _check_T(T)
    w2 = profile.potential.w2
    lo, hi = -_PAD, T + _PAD
    interior = [-profile.t_switch_minus, profile.t_switch_plus,
                T - profile.t_switch_plus, T + profile.t_switch_minus]
    nodes, weights = _panels(_breakpoints(lo, hi, interior))
    vals = ((np.asarray(w2(profile.eval_g(nodes)), dtype=float) - 1.0)
            * (profile.eval_g(T - nodes) - 1.0)
            * profile.eval_g1(nodes))
    return float(weights @ vals)


def interaction_integral_minus(profile: Profile, T: float) -> float:
    """Integral of [W''(g(t)) - 1] [g(-t - T) + 1] g'(t) over the line.

    Negative, asymptotic to -2 a_minus^2 exp(-T); for an even potential
    it is exactly the negative of the plus integral.
    """
    T = _check_T(T)
    w2 = profile.potential.w2
    lo, hi = -T - _PAD, _PAD
    interior = [-profile.t_switch_minus, profile.t_switch_plus,
                -T + profile.t_switch_minus, -T - profile.t_switch_plus]
    nodes, weights = _panels(_breakpoints(lo, hi, interior))
    vals = ((np.asarray(w2(profile.eval_g(nodes)), dtype=float) - 1.0)
            * (profile.eval_g(-nodes - T) + 1.0)
            * profile.eval_g1(nodes))
    return float(weights @ vals)


@dataclass
class InteractionCurve:
    """Interaction integrals tabulated over a set of separations."""

    T: np.ndarray
    i_plus: np.ndarray
    i_minus: np.ndarray
    scaled_plus: np.ndarray
    scaled_minus: np.ndarray
    a_plus: float
    a_minus: float


def interaction_curve(profile: Profile, T_values) -> InteractionCurve:
    """Tabulate both integrals and their exp(T)-rescaled versions."""
    T_values = np.asarray(sorted(float(T) for T in T_values))
    if T_values.size == 0:
        raise ConfigInvalid("empty separation list")
    ip = np.array([interaction_integral_plus(profile, T) for T in T_values])
    im = np.array([interaction_integral_minus(profile, T) for T in T_values])
    return InteractionCurve(
        T=T_values, i_plus=ip, i_minus=im,
        scaled_plus=np.exp(T_values) * ip / (2.0 * profile.a_plus ** 2),
        scaled_minus=np.exp(T_values) * im / (2.0 * profile.a_minus ** 2),
        a_plus=profile.a_plus, a_minus=profile.a_minus)


def fit_asymptotics(T_values, values, rate_range=(0.2, 1.0)) -> dict:
    """Fit exp(T) I(T) = c0 + c1 exp(-r T) with r scanned over a range.

    The scan makes the fit linear at each candidate rate; the reported
    rate is the best-fitting one, clamped to rate_range because faster
    remainders cannot be resolved from a handful of separations. Ties
    prefer the larger rate.

    Returns a dict with c0, c1, rate, sse, n.
    """
    T = np.asarray(T_values, dtype=float)
    y = np.asarray(values, dtype=float) * np.exp(T)
    if T.size < 3 or np.unique(T).size < 3:
        raise IllConditionedFit("need at least three distinct separations")
    def solve_at(r):
        A = np.column_stack([np.ones_like(T), np.exp(-r * T)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(np.sum((A @ coef - y) ** 2)), float(coef[0]), float(coef[1])

    rates = np.arange(rate_range[0], rate_range[1] + 1e-12, 0.0025)
    best = None
    for r in rates:
        sse, c0, c1 = solve_at(r)
        if best is None or sse < best[0] - 1e-18 * abs(best[0]) or (
                abs(sse - best[0]) <= 1e-18 * abs(best[0]) and r > best[1]):
            best = (sse, float(r), c0, c1)

    # Golden-section polish around the grid winner; the scan alone would
    # bias c0 at the grid resolution.
    lo = max(rate_range[0], best[1] - 0.005)
    hi = min(rate_range[1], best[1] + 0.005)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    for _ in range(60):
        c, d = b - phi * (b - a), a + phi * (b - a)
        if solve_at(c)[0] <= solve_at(d)[0]:
            b = d
        else:
            a = c
    r_ref = 0.5 * (a + b)
    sse_ref, c0_ref, c1_ref = solve_at(r_ref)
    if sse_ref <= best[0]:
        best = (sse_ref, r_ref, c0_ref, c1_ref)

    sse, rate, c0, c1 = best
    return {"c0": c0, "c1": c1, "rate": rate, "sse": sse, "n": int(T.size)}
