"""Radial Liouville profiles and the discrete Toda chain for layer stacks.

Two reduced models live here. The radial Liouville equation
Delta f = exp(-f) in dimension m governs the envelope of a clustered
stack; its singular solution 2 log r - log(2(m-2)) marks the stability
threshold through the Hardy constant (m-2)^2/4. The Toda chain couples
the heights of Q stacked interfaces through exponentials of consecutive
gaps and is solved here as a Dirichlet boundary value problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson, solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .errors import (
    BlowDown,
    ConfigInvalid,
    MaxIterExceeded,
    NewtonDiverged,
    NonMonotone,
    OrderingViolated,
    SeparationTooSmall,
)

__all__ = [
    "RadialLiouville",
    "TodaState",
    "DecayTrace",
    "solve_radial_liouville",
    "make_singular_liouville",
    "singular_offset",
    "ode_residual",
    "liouville_stability_margin",
    "farina_integral",
    "farina_exponent",
    "morrey_trace",
    "solve_toda_bvp",
    "toda_first_integral",
    "q2_gap_closed_form",
    "decay_iteration_experiment",
    "counterexample_profile",
]


# ----------------------------------------------------------------------
# Radial Liouville equation.

@dataclass
class RadialLiouville:
    """Radial solution of Delta f = exp(-f) in R^m on a log-spaced grid."""

    m: int
    r: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    v: np.ndarray
    kind: str
    f_center: Optional[float] = None
    _dense: Callable = field(default=None, repr=False)

    def eval_f(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self._dense(r)

    def eval_fpp(self, r) -> np.ndarray:
        """f'' from the equation itself, given f and f' on the grid."""
        return np.exp(-self.f) - (self.m - 1) * self.fp / self.r


def singular_offset(m: int) -> float:
    """Additive constant of the singular profile 2 log r + offset."""
    return -math.log(2.0 * (m - 2))


def _check_m(m: int) -> int:
    if int(m) != m or m < 3:
        raise ConfigInvalid(f"dimension m={m!r} must be an integer >= 3")
    return int(m)


def _log_grid(r_min: float, r_max: float, points_per_decade: int) -> np.ndarray:
    if not (0.0 < r_min < r_max):
        raise ConfigInvalid(f"need 0 < r_min < r_max, got ({r_min!r}, {r_max!r})")
    decades = math.log10(r_max / r_min)
    n = max(int(round(decades * points_per_decade)), 8) + 1
    return np.geomspace(r_min, r_max, n)


def solve_radial_liouville(m: int, f_center: float = 0.0, r_min: float = 1e-4,
                           r_max: float = 1e4,
                           points_per_decade: int = 64) -> RadialLiouville:
    """Integrate the radial equation outward from a regular center.

    The integration runs in s = log r, started from the center series
    f = f_center + exp(-f_center) r^2 / (2m) + O(r^4) at a radius far
    below the intrinsic length exp(f_center / 2).

    Returns the solution sampled on a log-spaced grid; the dense
    integrator output stays attached for residual checks.
    """
    m = _check_m(m)
    if not (-10.0 <= f_center <= 10.0):
        raise ConfigInvalid(f"f_center={f_center!r} outside [-10, 10]")
    scale = math.exp(f_center / 2.0)
    r0 = min(1e-4 * scale, 0.5 * r_min)
    a2 = math.exp(-f_center) / (2.0 * m)
    a4 = -math.exp(-2.0 * f_center) / (2.0 * m * (4.0 * m + 8.0))

    def series_f(r):
        return f_center + a2 * r * r + a4 * r ** 4

    def series_rfp(r):
        return 2.0 * a2 * r * r + 4.0 * a4 * r ** 4

    def rhs(s, y):
        # u(s) = f(e^s); u'' + (m-2) u' = e^{2s - u}
        return [y[1], math.exp(2.0 * s - y[0]) - (m - 2) * y[1]]

    s0, s1 = math.log(r0), math.log(r_max)
    sol = solve_ivp(rhs, (s0, s1), [series_f(r0), series_rfp(r0)],
                    method="DOP853", dense_output=True, max_step=0.1,
                    rtol=1e-12, atol=1e-14)
    if sol.status != 0:
        raise BlowDown(f"radial integration stopped at s={sol.t[-1]:.3g}: {sol.message}")

    def dense(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r <= r0
        out[small] = series_f(r[small])
        if np.any(~small):
            out[~small] = sol.sol(np.log(r[~small]))[0]
        return out

    r = _log_grid(r_min, r_max, points_per_decade)
    states = sol.sol(np.log(np.maximum(r, r0)))
    f = np.where(r <= r0, series_f(r), states[0])
    fp = np.where(r <= r0, series_rfp(r) / np.maximum(r, 1e-300), states[1] / r)
    return RadialLiouville(m=m, r=r, f=f, fp=fp, v=np.exp(-f), kind="smooth",
                           f_center=f_center, _dense=dense)


def make_singular_liouville(m: int, r_min: float = 1e-6, r_max: float = 1e6,
                            points_per_decade: int = 64) -> RadialLiouville:
    """Exact singular profile f = 2 log r - log(2(m-2)), V = 2(m-2)/r^2."""
    m = _check_m(m)
    r = _log_grid(r_min, r_max, points_per_decade)
    off = singular_offset(m)
    f = 2.0 * np.log(r) + off

    def dense(rr):
        return 2.0 * np.log(np.asarray(rr, dtype=float)) + off

    return RadialLiouville(m=m, r=r, f=f, fp=2.0 / r, v=np.exp(-f),
                           kind="singular", f_center=None, _dense=dense)


def ode_residual(sol: RadialLiouville, n_check: int = 200) -> float:
    """Largest relative defect of the radial equation at interior points.

    Second derivatives come from fourth-order differences of the dense
    evaluation in log r, so the number reflects the solution itself and
    not the sample spacing. For smooth solutions the check starts at a
    few percent of the intrinsic center length: below that the solution
    is its center series and the curvature term sits under rounding.
    """
    r_lo, r_hi = sol.r[0], sol.r[-1]
    if sol.kind == "smooth":
        r_lo = max(r_lo, 0.05 * math.exp((sol.f_center or 0.0) / 2.0))
    rc = np.geomspace(r_lo * 1.5, r_hi / 1.5, n_check)
    s = np.log(rc)
    d = 1e-2
    f0 = sol.eval_f(rc)
    fm2, fm1 = sol.eval_f(np.exp(s - 2 * d)), sol.eval_f(np.exp(s - d))
    fp1, fp2 = sol.eval_f(np.exp(s + d)), sol.eval_f(np.exp(s + 2 * d))
    us = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * d)
    uss = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * d * d)
    lap = (uss + (sol.m - 2) * us) / rc ** 2
    res = lap - np.exp(-f0)
    scale = np.abs(lap) + np.exp(-f0)
    return float(np.max(np.abs(res) / np.maximum(scale, 1e-300)))


def liouville_stability_margin(sol: RadialLiouville) -> float:
    """Bottom of the Hardy-weighted stability quotient.

    The quotient inf [int (|eta'|^2 - V eta^2) r^{m-1} dr] /
    [int eta^2 r^{m-3} dr] becomes, after the substitution
    eta = r^{-(m-2)/2} psi in s = log r, the lowest Dirichlet eigenvalue
    of -psi'' + [(m-2)^2/4 - r^2 V] psi on the sampled window. For the
    singular profile the potential is the constant (m-2)^2/4 - 2(m-2).
    """
    s = np.log(sol.r)
    h = float(np.mean(np.diff(s)))
    q = ((sol.m - 2) ** 2 / 4.0 - sol.r ** 2 * sol.v)[1:-1]
    diag = 2.0 / h ** 2 + q
    off = np.full(q.size - 1, -1.0 / h ** 2)
    vals = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0),
                            eigvals_only=True)
    return float(vals[0])


def farina_integral(sol: RadialLiouville, q: float, K: float) -> float:
    """Integral of V^{2q+1} over the ball of radius K, by log-radial quadrature.

    Admissible exponents are 0 <= q < 15/8. The integrand is assembled in
    log space from f itself, so extreme magnitudes of V cause no overflow.
    """
    if not (0.0 <= q < 15.0 / 8.0):
        raise ConfigInvalid(f"q={q!r} outside the admissible range [0, 15/8)")
    if not (sol.r[0] <= K <= sol.r[-1]):
        raise ConfigInvalid(f"K={K!r} outside the sampled range")
    idx = int(np.searchsorted(sol.r, K, side="right"))
    r = sol.r[:idx]
    if r.size < 8:
        raise ConfigInvalid(f"K={K!r} leaves too few quadrature points")
    s = np.log(r)
    m = sol.m
    log_omega = math.log(2.0) + (m / 2.0) * math.log(math.pi) - math.lgamma(m / 2.0)
    y = np.exp(log_omega - (2.0 * q + 1.0) * sol.f[:idx] + m * s)
    return float(simpson(y, x=s))


def farina_exponent(sol: RadialLiouville, q: float, K_values) -> tuple[float, dict]:
    """Growth exponent of the ball integrals, from annular increments.

    The ball integral itself saturates when the exponent is negative, so
    the slope is measured on successive increments, which scale exactly
    like K^{m - 2(2q+1)} for a quadratic-decay V.
    """
    Ks = np.asarray(sorted(float(K) for K in K_values))
    if Ks.size < 3:
        raise ConfigInvalid("need at least three K values")
    I = np.array([farina_integral(sol, q, K) for K in Ks])
    inc = np.diff(I)
    if np.any(inc <= 0.0):
        raise NonMonotone("ball integrals must increase strictly with K")
    mid = np.sqrt(Ks[:-1] * Ks[1:])
    slope, intercept = np.polyfit(np.log(mid), np.log(inc), 1)
    return float(slope), {"K": Ks, "integral": I, "increments": inc,
                          "intercept": float(intercept)}


@dataclass
class DecayTrace:
    """Radius-indexed amplitude data from a decay experiment."""

    r: np.ndarray
    values: np.ndarray
    kind: str
    a_max: float = 0.0
    r_star: float = 0.0
    halving_radius: Optional[float] = None
    halving_ratio: Optional[float] = None
    meta: dict = field(default_factory=dict)


def morrey_trace(sol: RadialLiouville, r_values) -> DecayTrace:
    """Mass of V over growing balls, with the fitted growth exponent."""
    slope, info = farina_exponent(sol, 0.0, r_values)
    return DecayTrace(r=info["K"], values=info["integral"], kind="morrey_mass",
                      meta={"slope": slope, "expected_min": sol.m - 3.0})


# ----------------------------------------------------------------------
# Toda boundary value problem.

@dataclass
class TodaState:
    """Solution of the Dirichlet Toda chain for Q stacked heights."""

    x: np.ndarray
    f: np.ndarray            # shape (Q, n)
    c: float
    residual: float
    iterations: int
    boundary_left: np.ndarray
    boundary_right: np.ndarray

    @property
    def Q(self) -> int:
        return self.f.shape[0]

    def gaps(self) -> np.ndarray:
        return np.diff(self.f, axis=0)


def _toda_residual_vec(f: np.ndarray, c: float, h: float,
                       left: np.ndarray, right: np.ndarray) -> np.ndarray:
    Q, n = f.shape
    full = np.empty((Q, n + 2))
    full[:, 1:-1] = f
    full[:, 0] = left
    full[:, -1] = right
    lap = (full[:, :-2] - 2.0 * full[:, 1:-1] + full[:, 2:]) / h ** 2
    with np.errstate(over="ignore", invalid="ignore"):
        E = np.exp(-np.diff(f, axis=0))  # gap exponentials, shape (Q-1, n)
        force = np.zeros_like(f)
        force[1:, :] += E          # pull from the layer below
        force[:-1, :] -= E         # pull from the layer above
        return lap - c * force


def solve_toda_bvp(Q: int, D: float, L: float, c: float = 12.0,
                   n_points: int = 4001, bc: Optional[tuple] = None,
                   tol: float = 1e-9, max_iter: int = 80) -> TodaState:
    """Solve the Q-component Toda chain with Dirichlet ends.

    Parameters
    ----------
    Q : int
        Number of heights, at least 2.
    D : float
        Boundary separation of consecutive heights (ignored when bc is
        given). Must be at least 4.
    L : float
        Domain length; the grid covers [-L/2, L/2].
    c : float
        Coupling coefficient multiplying the gap exponentials.
    bc : optional (left, right) arrays of shape (Q,)
        Explicit boundary heights, strictly increasing in the component
        index on both ends.

    Returns
    -------
    TodaState

    Raises
    ------
    SeparationTooSmall, OrderingViolated, NewtonDiverged, MaxIterExceeded
    """
    if int(Q) != Q or Q < 2:
        raise ConfigInvalid(f"Q={Q!r} must be an integer >= 2")
    Q = int(Q)
    if not (L > 0.0 and math.isfinite(L)):
        raise ConfigInvalid(f"L={L!r} must be positive")
    if n_points < 201:
        raise ConfigInvalid(f"n_points={n_points} below the minimum of 201")
    if c < 0.0:
        raise ConfigInvalid(f"c={c!r} must be nonnegative")
    if bc is None:
        if D < 4.0:
            raise SeparationTooSmall(f"boundary separation D={D:g} below 4")
        heights = (np.arange(Q) - (Q - 1) / 2.0) * D
        left = right = heights
    else:
        left = np.asarray(bc[0], dtype=float)
        right = np.asarray(bc[1], dtype=float)
        if left.shape != (Q,) or right.shape != (Q,):
            raise ConfigInvalid("boundary arrays must have shape (Q,)")
        if np.any(np.diff(left) <= 0.0) or np.any(np.diff(right) <= 0.0):
            raise OrderingViolated("boundary heights must increase with the index")
        if min(np.min(np.diff(left)), np.min(np.diff(right))) < 4.0:
            raise SeparationTooSmall("boundary separations below 4")

    x = np.linspace(-L / 2.0, L / 2.0, n_points)
    h = x[1] - x[0]
    n = n_points - 2
    # Straight-line initial heights.
    frac = (x[1:-1] + L / 2.0) / L
    f0 = left[:, None] + (right - left)[:, None] * frac[None, :]

    D2 = sp.diags([np.full(n - 1, 1.0), np.full(n, -2.0), np.full(n - 1, 1.0)],
                  [-1, 0, 1], format="csr") / h ** 2

    # Strong coupling can defeat Newton from the straight-line start, so
    # retry along a geometric schedule in c with warm starts.
    schedules = ([1.0], [1e-2, 1e-1, 0.5, 1.0],
                 [1e-4, 1e-3, 1e-2, 0.1, 0.3, 1.0])
    f = None
    last_exc: Optional[Exception] = None
    total_its = 0
    for schedule in schedules:
        f_try = f0.copy()
        its = 0
        try:
            for factor in schedule:
                f_try, stage_its = _toda_newton(f_try, factor * c, h, left,
                                                right, D2, Q, n, tol,
                                                max_iter - its)
                its += stage_its
            f, total_its = f_try, its
            break
        except (NewtonDiverged, MaxIterExceeded) as exc:
            last_exc = exc
    if f is None:
        raise last_exc

    res = _toda_residual_vec(f, c, h, left, right)
    res_norm = float(np.max(np.abs(res)))
    full = np.empty((Q, n_points))
    full[:, 1:-1] = f
    full[:, 0] = left
    full[:, -1] = right
    if np.any(np.diff(full, axis=0) <= 0.0):
        raise OrderingViolated("components crossed in the converged solution")
    return TodaState(x=x, f=full, c=c, residual=res_norm, iterations=total_its,
                     boundary_left=np.asarray(left, dtype=float),
                     boundary_right=np.asarray(right, dtype=float))


def _toda_newton(f, c, h, left, right, D2, Q, n, tol, max_iter):
    """Damped Newton for one coupling value; returns (f, iterations)."""
    res = _toda_residual_vec(f, c, h, left, right)
    res_norm = float(np.max(np.abs(res)))
    rms = float(np.sqrt(np.mean(res ** 2)))
    it = 0
    while res_norm > tol:
        if it >= max_iter:
            raise MaxIterExceeded(
                f"Toda Newton at residual {res_norm:.3e} after {it} steps")
        it += 1
        with np.errstate(over="ignore"):
            E = np.exp(-np.diff(f, axis=0))
        if not np.all(np.isfinite(E)):
            raise NewtonDiverged("gap exponentials overflowed")
        blocks = [[None] * Q for _ in range(Q)]
        for a in range(Q):
            diag = np.zeros(n)
            if a > 0:
                diag += c * E[a - 1]
                blocks[a][a - 1] = sp.diags(-c * E[a - 1])
            if a < Q - 1:
                diag += c * E[a]
                blocks[a][a + 1] = sp.diags(-c * E[a])
            blocks[a][a] = D2 + sp.diags(diag)
        J = sp.bmat(blocks, format="csc")
        try:
            step = splu(J).solve(-res.ravel()).reshape(Q, n)
        except RuntimeError as exc:
            raise NewtonDiverged(f"singular Jacobian: {exc}") from exc
        t = 1.0
        while True:
            cand = f + t * step
            with np.errstate(over="ignore", invalid="ignore"):
                cand_res = _toda_residual_vec(cand, c, h, left, right)
                cand_rms = float(np.sqrt(np.mean(cand_res ** 2)))
            if np.isfinite(cand_rms) and cand_rms <= (1.0 - 1e-4 * t) * rms:
                f, res, rms = cand, cand_res, cand_rms
                res_norm = float(np.max(np.abs(res)))
                break
            t *= 0.5
            if t < 1e-8:
                raise NewtonDiverged(
                    f"line search exhausted at residual {res_norm:.3e}")
    return f, it


def toda_first_integral(state: TodaState) -> np.ndarray:
    """Conserved energy sum_a f_a'^2 / 2 + c sum_j exp(-gap_j), pointwise.

    Derivatives are taken with fourth-order differences, so the drift of
    the returned array measures discretization alone. For Q = 2 the
    quantity equals half of rho'^2/2 + 2 c exp(-rho) with rho the gap.
    """
    x, f, c = state.x, state.f, state.c
    h = x[1] - x[0]
    fp = (f[:, :-4] - 8.0 * f[:, 1:-3] + 8.0 * f[:, 3:-1] - f[:, 4:]) / (12.0 * h)
    gaps = np.diff(f[:, 2:-2], axis=0)
    return 0.5 * np.sum(fp ** 2, axis=0) + c * np.sum(np.exp(-gaps), axis=0)


def q2_gap_closed_form(D: float, L: float, c: float) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form gap of the symmetric two-component chain.

    The even solution of rho'' = 2 c exp(-rho) with rho(+-L/2) = D is
    rho(x) = rho0 + 2 log cosh(beta x), beta = sqrt(c exp(-rho0)). The
    center value rho0 solves a scalar matching equation on the shallow
    branch; SeparationTooSmall is raised when no shallow solution exists.
    """
    if c <= 0.0:
        raise ConfigInvalid("closed form needs c > 0")

    def mismatch(rho0):
        beta = math.sqrt(c * math.exp(-rho0))
        return rho0 + 2.0 * math.log(math.cosh(beta * L / 2.0)) - D

    # Shallowest admissible center value: where the matching curve turns.
    z_star = brentq(lambda z: z * math.tanh(z) - 1.0, 0.5, 2.0)
    rho_turn = 2.0 * math.log(L * math.sqrt(c) / (2.0 * z_star))
    if mismatch(rho_turn) > 0.0:
        raise SeparationTooSmall(
            f"no shallow symmetric gap for D={D:g}, L={L:g}, c={c:g}")
    rho0 = brentq(mismatch, rho_turn, D + 1.0, xtol=1e-14)
    beta = math.sqrt(c * math.exp(-rho0))

    def rho(xx):
        return rho0 + 2.0 * np.log(np.cosh(beta * np.asarray(xx, dtype=float)))

    rho.rho0 = rho0
    rho.beta = beta
    return rho


def decay_iteration_experiment(state: TodaState, r_values=None) -> DecayTrace:
    """Amplitude of the gap interaction over growing windows.

    The pointwise amplitude a(x) = max_j exp(-gap_j(x)) peaks where the
    stack is tightest; the trace records its running maximum over |x| <= r
    together with the distance needed for a to halve, in units of the
    predicted length a_max^{-1/2}.
    """
    gaps = state.gaps()
    if np.any(gaps <= 0.0):
        raise OrderingViolated("state has nonpositive gaps")
    a = np.max(np.exp(-gaps), axis=0)
    x = state.x
    half_span = float(x[-1])
    if r_values is None:
        r_values = np.linspace(0.0, half_span, 33)[1:]
    r_values = np.asarray(r_values, dtype=float)
    A = np.array([float(np.max(a[np.abs(x) <= r])) for r in r_values])

    i_max = int(np.argmax(a))
    a_max = float(a[i_max])
    r_star = a_max ** -0.5
    return _finish_trace(x, a, i_max, a_max, r_star, r_values, A)


def _finish_trace(x, a, i_max, a_max, r_star, r_values, A) -> DecayTrace:
    target = 0.5 * a_max
    dist = None
    for side in (slice(i_max, None, 1), slice(i_max, None, -1)):
        seg = a[side]
        below = np.nonzero(seg <= target)[0]
        if below.size:
            d = abs(float(x[side][below[0]] - x[i_max]))
            dist = d if dist is None else max(dist, d)
    ratio = None if dist is None else dist / r_star
    return DecayTrace(r=r_values, values=A, kind="toda_gap", a_max=a_max,
                      r_star=r_star, halving_radius=dist, halving_ratio=ratio,
                      meta={"x_peak": float(x[i_max])})


def counterexample_profile(sol: RadialLiouville, eps: float,
                           x_max: float = 1.5, n: int = 1001) -> dict:
    """Rescaled envelope pair whose Hessian survives at the center.

    Builds f_eps(x) = eps f(x / sqrt(eps)) + eps |log eps| from a smooth
    radial solution and returns the upper and lower envelope graphs. The
    second derivative at the center equals f''(0) = exp(-f(0)) / m
    independently of eps, while at distance one it decays like 2 eps.
    """
    if sol.kind != "smooth":
        raise ConfigInvalid("counterexample profile needs a smooth radial solution")
    if not (0.0 < eps < 0.1):
        raise ConfigInvalid(f"eps={eps!r} outside (0, 0.1)")
    reach = x_max / math.sqrt(eps)
    if reach > sol.r[-1]:
        raise ConfigInvalid(
            f"profile sampled only to r={sol.r[-1]:g}, need {reach:g}")
    x = np.linspace(-x_max, x_max, n)
    offset = eps * abs(math.log(eps))
    f_eps = eps * sol.eval_f(np.abs(x) / math.sqrt(eps)) + offset

    def fpp(r):
        states_f = sol.eval_f(np.array([r]))[0]
        # f'' from the equation, with f' by centered differences in log r.
        d = 1e-3
        fm = sol.eval_f(np.array([r * math.exp(-d)]))[0]
        fp_ = sol.eval_f(np.array([r * math.exp(d)]))[0]
        us = (fp_ - fm) / (2.0 * d)
        return math.exp(-states_f) - (sol.m - 1) * us / r / r

    hess_center = math.exp(-(sol.f_center or 0.0)) / sol.m
    hess_probe = fpp(1.0 / math.sqrt(eps))
    return {
        "eps": eps,
        "offset": offset,
        "x": x,
        "f_upper": f_eps,
        "f_lower": -f_eps,
        "hessian_center": hess_center,
        "hessian_probe": hess_probe,
    }
