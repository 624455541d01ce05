"""The one-dimensional transition profile and quantities derived from it.

The profile g solves g'' = W'(g) with g(0) = 0 and g(+-inf) = +-1. Along
the connecting orbit the first integral g' = sqrt(2 W(g)) holds, which is
what gets integrated here: it is first order, monotone, and lets every
derived quantity be evaluated from g alone. Near the wells the orbit is
represented by its exponential tail 1 - A exp(-|t|); the amplitudes A are
recovered by Richardson extrapolation just before the switch point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import cholesky_banded, cho_solve_banded

from .errors import (
    ConfigInvalid,
    EpsTooLarge,
    ExtrapolationUnstable,
    MaxIterExceeded,
    NonMonotone,
    ProfileRangeTooShort,
)
from .potential import Potential, validate

__all__ = [
    "Profile",
    "TruncatedProfile",
    "solve_profile",
    "constants",
    "truncate",
    "second_eigenvalue",
    "bump",
    "bump_derivatives",
]

# The orbit is handed over to the tail representation once it is this
# close to a well.
TAIL_DELTA = 1e-4

# Relative spread allowed between the two Richardson estimates of a tail
# amplitude before the extraction is declared unstable.
_TAIL_SPREAD = 1e-5


@dataclass
class Profile:
    """Sampled transition profile with continuous evaluators.

    The arrays t, g, g1, g2 hold samples on the requested uniform grid;
    eval_g and friends evaluate anywhere in [-t_max, t_max] by combining
    the dense ODE solution with the tail representation.
    """

    potential: Potential
    t: np.ndarray
    g: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    sigma0: float
    sigma0_err: float
    a_plus: float
    a_minus: float
    t_switch_plus: float
    t_switch_minus: float
    t_max: float
    tail_delta: float = TAIL_DELTA
    _sol_plus: object = field(default=None, repr=False)
    _sol_minus: object = field(default=None, repr=False)

    @property
    def tail_switch(self) -> float:
        """|t| beyond which the tail representation is in use on both sides."""
        return max(self.t_switch_plus, self.t_switch_minus)

    def eval_g(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return float(self.eval_g(t[None])[0])
        out = np.empty_like(t)
        hi = t >= self.t_switch_plus
        lo = t <= -self.t_switch_minus
        mid_p = (~hi) & (t >= 0.0)
        mid_m = (~lo) & (t < 0.0)
        out[hi] = 1.0 - self.a_plus * np.exp(-t[hi])
        out[lo] = -1.0 + self.a_minus * np.exp(t[lo])
        if np.any(mid_p):
            out[mid_p] = self._sol_plus(t[mid_p])[0]
        if np.any(mid_m):
            out[mid_m] = self._sol_minus(-t[mid_m])[0]
        return out

    def eval_g1(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return float(self.eval_g1(t[None])[0])
        out = np.empty_like(t)
        hi = t >= self.t_switch_plus
        lo = t <= -self.t_switch_minus
        mid = ~(hi | lo)
        out[hi] = self.a_plus * np.exp(-t[hi])
        out[lo] = self.a_minus * np.exp(t[lo])
        if np.any(mid):
            g_mid = self.eval_g(t[mid])
            out[mid] = np.sqrt(np.maximum(2.0 * self.potential.w(g_mid), 0.0))
        return out

    def eval_g2(self, t) -> np.ndarray:
        return np.asarray(self.potential.w1(self.eval_g(t)), dtype=float)

    def eval_g3(self, t) -> np.ndarray:
        g = self.eval_g(t)
        return np.asarray(self.potential.w2(g), dtype=float) * self.eval_g1(t)

    def eval_g4(self, t) -> np.ndarray:
        g = self.eval_g(t)
        g1 = self.eval_g1(t)
        return (np.asarray(self.potential.w3(g), dtype=float) * g1 * g1
                + np.asarray(self.potential.w2(g), dtype=float)
                * np.asarray(self.potential.w1(g), dtype=float))


def _integrate_side(p: Potential, t_max: float, sign: int):
    """Integrate the first-order reduction toward one well.

    Returns the dense solution (parametrized by tau = sign * t >= 0) and
    the tau at which 1 - |g| = TAIL_DELTA.
    """
    well = 1.0 if sign > 0 else -1.0

    def rhs(_tau, y):
        # Moving away from 0 in either direction increases sign * g.
        return [math.sqrt(max(2.0 * float(p.w(y[0])), 0.0)) * (1.0 if sign > 0 else -1.0)]

    def reach_tail(_tau, y):
        return (1.0 - well * y[0]) - TAIL_DELTA

    reach_tail.terminal = True
    sol = solve_ivp(rhs, (0.0, t_max), [0.0], method="DOP853",
                    dense_output=True, events=reach_tail,
                    rtol=1e-12, atol=1e-14, max_step=0.5)
    if sol.status != 1:
        raise ProfileRangeTooShort(
            f"t_max={t_max:g} ends before 1-|g| reaches {TAIL_DELTA:g} "
            f"on the {'+' if sign > 0 else '-'} side")
    return sol.sol, float(sol.t_events[0][0])


def _tail_amplitude(sol, t_switch: float, well_sign: int) -> float:
    """Richardson-extrapolate A from (1 - |g|) e^{|t|} near the switch."""

    def phi(tau):
        g = float(sol(tau)[0])
        return (1.0 - well_sign * g) * math.exp(tau)

    def estimate(t1, t2):
        r = math.exp(-(t2 - t1))
        return (phi(t2) - r * phi(t1)) / (1.0 - r)

    est_a = estimate(t_switch - 2.0, t_switch - 1.0)
    est_b = estimate(t_switch - 1.0, t_switch)
    scale = max(abs(est_b), 1e-300)
    if abs(est_a - est_b) > _TAIL_SPREAD * scale:
        raise ExtrapolationUnstable(
            f"tail amplitude estimates disagree: {est_a:.12g} vs {est_b:.12g}")
    return est_b


def _simpson_uniform(y: np.ndarray, h: float) -> float:
    n = y.size
    if n % 2 != 1:
        raise ValueError("simpson needs an odd number of samples")
    return h / 3.0 * float(y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum())


def solve_profile(p: Potential, t_max: float = 25.0, n_points: int = 20001) -> Profile:
    """Solve for the transition profile of a validated potential.

    Parameters
    ----------
    p : Potential
        Must pass `validate`; the defects are re-checked here.
    t_max : float
        Half-width of the sample grid. Must reach past the tail handover
        (about 10 for the quartic model).
    n_points : int
        Number of uniform samples on [-t_max, t_max]; at least 1000.

    Returns
    -------
    Profile

    Raises
    ------
    ConfigInvalid, ProfileRangeTooShort, ExtrapolationUnstable
    """
    if n_points < 1000:
        raise ConfigInvalid(f"n_points={n_points} is below the minimum of 1000")
    if not (t_max > 0.0 and math.isfinite(t_max)):
        raise ConfigInvalid(f"t_max={t_max!r} must be positive and finite")
    report = validate(p)
    if not report.ok:
        names = ", ".join(c.name for c in report.failed())
        raise ConfigInvalid(f"potential {p.name!r} failed validation: {names}")

    sol_plus, ts_plus = _integrate_side(p, t_max, +1)
    sol_minus, ts_minus = _integrate_side(p, t_max, -1)
    a_plus = _tail_amplitude(sol_plus, ts_plus, +1)
    a_minus = _tail_amplitude(sol_minus, ts_minus, -1)

    prof = Profile(
        potential=p, t=np.zeros(0), g=np.zeros(0), g1=np.zeros(0), g2=np.zeros(0),
        sigma0=0.0, sigma0_err=0.0, a_plus=a_plus, a_minus=a_minus,
        t_switch_plus=ts_plus, t_switch_minus=ts_minus, t_max=t_max,
        _sol_plus=sol_plus, _sol_minus=sol_minus)

    # Energy constant by composite Simpson over the core plus analytic
    # tail mass; equipartition turns the integrand into 2 W(g).
    def sigma_quad(n_quad: int) -> float:
        tq = np.linspace(-ts_minus, ts_plus, n_quad)
        wq = 2.0 * np.asarray(p.w(prof.eval_g(tq)), dtype=float)
        core = _simpson_uniform(wq, tq[1] - tq[0])
        tails = 0.5 * (a_plus ** 2 * math.exp(-2.0 * ts_plus)
                       + a_minus ** 2 * math.exp(-2.0 * ts_minus))
        return core + tails

    s_coarse = sigma_quad(8193)
    s_fine = sigma_quad(16385)
    prof.sigma0 = (16.0 * s_fine - s_coarse) / 15.0
    prof.sigma0_err = abs(s_fine - s_coarse) / 15.0

    prof.t = np.linspace(-t_max, t_max, n_points)
    prof.g = prof.eval_g(prof.t)
    prof.g1 = prof.eval_g1(prof.t)
    prof.g2 = prof.eval_g2(prof.t)
    # Strict increase is only meaningful before the tails saturate at
    # the double-precision wells.
    dg = np.diff(prof.g)
    if np.any(dg < 0.0):
        raise NonMonotone("profile samples decrease somewhere")
    core = np.abs(prof.g[:-1]) < 1.0 - 1e-12
    if np.any(dg[core] <= 0.0):
        raise NonMonotone("profile samples are not strictly increasing")
    return prof


def constants(profile: Profile) -> dict:
    """Energy constant and tail amplitudes of a solved profile."""
    return {
        "sigma0": profile.sigma0,
        "sigma0_err": profile.sigma0_err,
        "a_plus": profile.a_plus,
        "a_minus": profile.a_minus,
    }


# ----------------------------------------------------------------------
# Cutoff machinery.

def _smoothstep_derivs(x: np.ndarray):
    """S(x) = 10x^3 - 15x^4 + 6x^5 and its first four derivatives on [0, 1]."""
    s0 = x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)
    s1 = 30.0 * x ** 2 * (1.0 - x) ** 2
    s2 = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
    s3 = 60.0 * (1.0 - 6.0 * x + 6.0 * x * x)
    s4 = 360.0 * x - 360.0
    return s0, s1, s2, s3, s4


def bump(s) -> np.ndarray:
    """C^2 bump equal to 1 on [-1, 1] and 0 outside (-2, 2)."""
    return bump_derivatives(s)[0]


def bump_derivatives(s):
    """Return the bump and its first four derivatives (piecewise quintic)."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    sign = np.sign(s)
    x = np.clip(a - 1.0, 0.0, 1.0)
    s0, s1, s2, s3, s4 = _smoothstep_derivs(x)
    ramp = (a > 1.0) & (a < 2.0)
    z0 = np.where(a <= 1.0, 1.0, np.where(ramp, 1.0 - s0, 0.0))
    z1 = np.where(ramp, -s1 * sign, 0.0)
    z2 = np.where(ramp, -s2, 0.0)
    z3 = np.where(ramp, -s3 * sign, 0.0)
    z4 = np.where(ramp, -s4, 0.0)
    return z0, z1, z2, z3, z4


@dataclass
class TruncatedProfile:
    """Profile glued to the exact well values outside a logarithmic window.

    The residual xi = gbar'' - W'(gbar) vanishes identically outside
    (cut_inner, cut_outer) in |t| and is of size O(eps^3) inside it.
    """

    profile: Profile
    eps: float
    cut_inner: float
    cut_outer: float
    sup_defect: float
    defect_constant: float
    gradient_mass: float

    def _pieces(self, t):
        t = np.asarray(t, dtype=float)
        scale = self.cut_inner  # = 4 |log eps|
        z0, z1, z2, z3, z4 = bump_derivatives(t / scale)
        return (t, z0, z1 / scale, z2 / scale ** 2, z3 / scale ** 3,
                z4 / scale ** 4)

    def _gbar_all(self, t):
        """gbar and its derivatives up to fourth order, by Leibniz."""
        t, z0, z1, z2, z3, z4 = self._pieces(t)
        pr = self.profile
        well = np.where(t >= 0.0, 1.0, -1.0)
        d = pr.eval_g(t) - well
        d1 = pr.eval_g1(t)
        d2 = pr.eval_g2(t)
        d3 = pr.eval_g3(t)
        d4 = pr.eval_g4(t)
        b0 = z0 * d + well
        b1 = z1 * d + z0 * d1
        b2 = z2 * d + 2.0 * z1 * d1 + z0 * d2
        b3 = z3 * d + 3.0 * z2 * d1 + 3.0 * z1 * d2 + z0 * d3
        b4 = z4 * d + 4.0 * z3 * d1 + 6.0 * z2 * d2 + 4.0 * z1 * d3 + z0 * d4
        # On the plateau the weights are exactly (1, 0, ...); skip the
        # recombination there so the defect vanishes to the last bit.
        plateau = (z0 == 1.0) & (z1 == 0.0)
        b0 = np.where(plateau, pr.eval_g(t), b0)
        return b0, b1, b2, b3, b4

    def gbar(self, t) -> np.ndarray:
        return self._gbar_all(t)[0]

    def gbar1(self, t) -> np.ndarray:
        return self._gbar_all(t)[1]

    def gbar2(self, t) -> np.ndarray:
        return self._gbar_all(t)[2]

    def xi_all(self, t):
        """Defect xi = gbar'' - W'(gbar) and its first two derivatives."""
        b0, b1, b2, b3, b4 = self._gbar_all(t)
        w = self.profile.potential
        xi0 = b2 - np.asarray(w.w1(b0), dtype=float)
        xi1 = b3 - np.asarray(w.w2(b0), dtype=float) * b1
        xi2 = (b4 - np.asarray(w.w3(b0), dtype=float) * b1 * b1
               - np.asarray(w.w2(b0), dtype=float) * b2)
        return xi0, xi1, xi2

    def xi(self, t) -> np.ndarray:
        return self.xi_all(t)[0]


def truncate(profile: Profile, eps: float) -> TruncatedProfile:
    """Glue the profile to +-1 outside the window 8 |log eps|.

    The cutoff ramps over 4|log eps| < |t| < 8|log eps|, so the defect is
    supported there, of size O(eps^3) in C^2 because the profile tails
    are already down to eps^4 at the inner edge.

    Raises
    ------
    ConfigInvalid  if eps is outside (0, 0.2)
    EpsTooLarge    if the window does not fit inside the profile range
    """
    if not (0.0 < eps < 0.2):
        raise ConfigInvalid(f"eps={eps!r} must lie in (0, 0.2)")
    cut_inner = 4.0 * abs(math.log(eps))
    cut_outer = 8.0 * abs(math.log(eps))
    if cut_inner <= profile.tail_switch:
        raise EpsTooLarge(
            f"inner cut {cut_inner:.3g} is inside the profile core "
            f"(tail switch {profile.tail_switch:.3g})")
    if cut_outer > profile.t_max:
        raise EpsTooLarge(
            f"outer cut {cut_outer:.3g} exceeds the profile range {profile.t_max:g}")

    tp = TruncatedProfile(profile=profile, eps=eps, cut_inner=cut_inner,
                          cut_outer=cut_outer, sup_defect=0.0,
                          defect_constant=0.0, gradient_mass=0.0)

    # Defect norms over the ramp, where xi is supported.
    spans = np.concatenate([
        np.linspace(-cut_outer, -cut_inner, 4001),
        np.linspace(cut_inner, cut_outer, 4001),
    ])
    xi0, xi1, xi2 = tp.xi_all(spans)
    tp.sup_defect = float(np.max(np.abs(xi0) + np.abs(xi1) + np.abs(xi2)))
    tp.defect_constant = tp.sup_defect / eps ** 3

    tq = np.linspace(-cut_outer, cut_outer, 32769)
    b1 = tp.gbar1(tq)
    tp.gradient_mass = _simpson_uniform(b1 * b1, tq[1] - tq[0])
    return tp


# ----------------------------------------------------------------------
# Linearized spectrum.

def second_eigenvalue(profile: Profile, t_max: Optional[float] = None,
                      n: int = 20001, return_details: bool = False):
    """Lowest eigenvalue of -d^2/dt^2 + W''(g) orthogonal to g'.

    Discretized on a uniform Dirichlet grid; the translation mode is
    removed by deflating both the sampled g' and the computed ground
    state, and the constrained minimizer is found by inverse iteration
    on the shifted operator.

    Returns the eigenvalue, or (eigenvalue, details) when
    return_details is set. details carries the unconstrained ground
    eigenvalue and its overlap with g'.
    """
    if n < 1001:
        raise ConfigInvalid(f"n={n} is below the minimum of 1001")
    T = min(profile.t_max, 25.0) if t_max is None else float(t_max)
    if T > profile.t_max:
        raise ConfigInvalid(f"t_max={T:g} exceeds the profile range")

    t = np.linspace(-T, T, n)
    h = t[1] - t[0]
    ti = t[1:-1]
    diag = 2.0 / h ** 2 + np.asarray(profile.potential.w2(profile.eval_g(ti)))
    off = -1.0 / h ** 2

    # Banded Cholesky of the operator shifted by +1 (positive definite:
    # the spectrum is bounded below by the near-zero translation mode).
    m = ti.size
    ab = np.zeros((2, m))
    ab[0, 1:] = off
    ab[1, :] = diag + 1.0
    cb = cholesky_banded(ab, lower=False)

    def solve(v):
        return cho_solve_banded((cb, False), v)

    def rayleigh(v):
        tv = diag * v
        tv[:-1] += off * v[1:]
        tv[1:] += off * v[:-1]
        return float(v @ tv) / float(v @ v)

    b = profile.eval_g1(ti)
    b = b / np.linalg.norm(b)

    # Unconstrained ground state.
    v0 = b.copy()
    lam0 = rayleigh(v0)
    for _ in range(200):
        v0 = solve(v0)
        v0 /= np.linalg.norm(v0)
        lam_new = rayleigh(v0)
        if abs(lam_new - lam0) <= 1e-14 * max(1.0, abs(lam_new)):
            lam0 = lam_new
            break
        lam0 = lam_new
    else:
        raise MaxIterExceeded("ground-state inverse iteration did not settle")

    def deflate(v):
        v = v - (b @ v) * b
        v = v - (v0 @ v) * v0
        return v

    v = deflate(ti * profile.eval_g1(ti))
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = deflate(np.sin(np.pi * (ti + T) / (2.0 * T)))
        nv = np.linalg.norm(v)
    v /= nv
    mu = rayleigh(v)
    for _ in range(2000):
        v = deflate(solve(v))
        v /= np.linalg.norm(v)
        mu_new = rayleigh(v)
        if abs(mu_new - mu) <= 1e-13 * max(1.0, abs(mu_new)):
            mu = mu_new
            break
        mu = mu_new
    else:
        raise MaxIterExceeded("deflated inverse iteration did not settle")

    if return_details:
        overlap = float(abs(b @ v0))
        return mu, {"ground_eigenvalue": lam0, "ground_overlap_with_g1": overlap,
                    "grid_points": n, "t_max": T}
    return mu
