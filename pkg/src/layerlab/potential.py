"""Double-well potentials with the normalization used throughout the package.

A potential is admissible when it vanishes to second order at u = -1 and
u = +1 with unit curvature there, is positive in between, and has exactly
one interior critical point, located at u = 0. All downstream solvers
assume this normalization; `validate` measures each requirement and
reports the defects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigInvalid, NotEvaluable

__all__ = [
    "Potential",
    "CheckResult",
    "ValidationReport",
    "make_quartic",
    "make_polynomial",
    "validate",
    "get_potential",
    "register_potential",
]


@dataclass(frozen=True)
class Potential:
    """A scalar potential W with its first three derivatives.

    Attributes
    ----------
    name : str
        Registry name, also used in CSV provenance.
    w, w1, w2, w3 : callable
        Vectorized evaluations of W and dW/du, d2W/du2, d3W/du3.
    params : dict
        Constructor parameters, recorded for provenance only.
    """

    name: str
    w: Callable[[np.ndarray], np.ndarray]
    w1: Callable[[np.ndarray], np.ndarray]
    w2: Callable[[np.ndarray], np.ndarray]
    w3: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)


def make_quartic() -> Potential:
    """Return the model quartic W(u) = (1 - u^2)^2 / 8."""
    return Potential(
        name="quartic",
        w=lambda u: (1.0 - np.asarray(u) ** 2) ** 2 / 8.0,
        w1=lambda u: (np.asarray(u) ** 3 - np.asarray(u)) / 2.0,
        w2=lambda u: (3.0 * np.asarray(u) ** 2 - 1.0) / 2.0,
        w3=lambda u: 3.0 * np.asarray(u),
        params={},
    )


def make_polynomial(coeffs, name: str = "polynomial") -> Potential:
    """Build a potential from polynomial coefficients (highest degree first).

    No normalization is enforced here; run `validate` to find out whether
    the result is admissible.
    """
    p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float)[::-1])
    d1, d2, d3 = p.deriv(1), p.deriv(2), p.deriv(3)
    return Potential(
        name=name,
        w=lambda u: p(np.asarray(u, dtype=float)),
        w1=lambda u: d1(np.asarray(u, dtype=float)),
        w2=lambda u: d2(np.asarray(u, dtype=float)),
        w3=lambda u: d3(np.asarray(u, dtype=float)),
        params={"coeffs": [float(c) for c in coeffs]},
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    defect: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    potential: str
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


# Tolerances for the individual normalization checks.
_TOL_VALUE = 1e-12      # W(+-1) and W'(+-1)
_TOL_CURVATURE = 1e-10  # W''(+-1) - 1
_N_SCAN = 10_000


def validate(p: Potential, n_scan: int = _N_SCAN) -> ValidationReport:
    """Measure every admissibility requirement of a potential.

    Parameters
    ----------
    p : Potential
    n_scan : int
        Number of points in the sign-scan grid on [-1, 1].

    Returns
    -------
    ValidationReport
        One CheckResult per requirement, with the measured defect.

    Raises
    ------
    NotEvaluable
        If W or a derivative returns a non-finite value on the scan grid.
    """
    u = np.linspace(-1.0, 1.0, n_scan)
    vals = {}
    for key, fn in (("w", p.w), ("w1", p.w1), ("w2", p.w2), ("w3", p.w3)):
        arr = np.asarray(fn(u), dtype=float)
        if not np.all(np.isfinite(arr)):
            raise NotEvaluable(f"{p.name}: {key} is non-finite on the scan grid")
        vals[key] = arr

    checks = []

    d_ends = max(abs(float(p.w(-1.0))), abs(float(p.w(1.0))))
    checks.append(CheckResult("zero_at_wells", d_ends <= _TOL_VALUE, d_ends,
                              "W(-1), W(+1)"))

    d_slope = max(abs(float(p.w1(-1.0))), abs(float(p.w1(1.0))))
    checks.append(CheckResult("critical_at_wells", d_slope <= _TOL_VALUE, d_slope,
                              "W'(-1), W'(+1)"))

    d_curv = max(abs(float(p.w2(-1.0)) - 1.0), abs(float(p.w2(1.0)) - 1.0))
    checks.append(CheckResult("unit_curvature", d_curv <= _TOL_CURVATURE, d_curv,
                              "W''(+-1) - 1"))

    # Positivity away from the wells; exclude a thin collar where the
    # quadratic vanishing makes the sign test meaningless at roundoff level.
    interior = np.abs(u) <= 1.0 - 1e-3
    min_w = float(np.min(vals["w"][interior]))
    checks.append(CheckResult("positive_between_wells", min_w > 0.0, -min_w,
                              "min W on |u| <= 0.999"))

    # Interior critical points located by sign changes of W' strictly
    # inside (-1, 1). Admissible means exactly one, at u = 0.
    w1_in = vals["w1"][1:-1]
    u_in = u[1:-1]
    sgn = np.sign(w1_in)
    flips = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    roots = 0.5 * (u_in[flips] + u_in[flips + 1])
    exact_zeros = u_in[np.abs(w1_in) == 0.0]
    roots = np.sort(np.concatenate([roots, exact_zeros]))
    if roots.size == 1:
        defect = abs(float(roots[0]))
        ok = defect <= 2.0 / n_scan
        detail = f"one interior critical point near {roots[0]:.6g}"
    else:
        defect = float(roots.size)
        ok = False
        detail = f"{roots.size} interior critical points"
    checks.append(CheckResult("unique_critical_point_at_zero", ok, defect, detail))

    # Derivative consistency by centered differences at a fixed step. The
    # truncation budget for each pair needs the derivative two orders up;
    # above w3 it is estimated from differences of w3 on the scan grid.
    h = 1e-5
    uu = np.linspace(-0.95, 0.95, 191)
    fd1 = (p.w(uu + h) - p.w(uu - h)) / (2 * h)
    fd2 = (p.w1(uu + h) - p.w1(uu - h)) / (2 * h)
    du = float(u[1] - u[0])
    m3 = float(np.max(np.abs(vals["w3"]))) + 1.0
    m4 = float(np.max(np.abs(np.diff(vals["w3"])))) / du + 1.0
    budget = max(m3, m4) / 6.0 * h * h + 1e-9
    d_fd = max(float(np.max(np.abs(fd1 - p.w1(uu)))),
               float(np.max(np.abs(fd2 - p.w2(uu)))))
    checks.append(CheckResult("derivative_consistency", d_fd <= budget, d_fd,
                              f"centered differences, h={h:g}"))

    return ValidationReport(potential=p.name, checks=tuple(checks))


_REGISTRY: dict[str, Callable[[], Potential]] = {"quartic": make_quartic}


def register_potential(name: str, factory: Callable[[], Potential]) -> None:
    _REGISTRY[name] = factory


def get_potential(name: str) -> Potential:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigInvalid(
            f"unknown potential {name!r} (known: {known})") from None
    return factory()
