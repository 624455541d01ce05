"""Planar Allen-Cahn solver on rectangles with Dirichlet boundary data.

The discretization is the five-point Laplacian on a uniform grid; the
stationary states solve lap u = W'(u) with the boundary row and column
frozen at the values of the initial field. Newton corrections are
computed by preconditioned MINRES, with sine-transform solves of
(-lap + shift) as the preconditioner; an energy line search keeps the
iteration inside the basin, and a semi-implicit gradient flow serves as
the fallback when a Newton direction fails to descend.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft
from scipy.sparse.linalg import LinearOperator, minres

from .errors import (
    ConfigInvalid,
    IoError,
    LinearSolveFailure,
    MaxIterExceeded,
    NewtonDiverged,
    NoConvergence,
    NonGraphLevelSet,
)
from .potential import Potential

__all__ = [
    "ScalarField2D",
    "SolveReport",
    "InterfaceGraph",
    "laplacian",
    "residual_field",
    "energy",
    "solve_newton",
    "relax_flow",
    "stability_check",
    "extract_levelset",
    "sz_curvature_term",
    "save_field",
    "load_field",
]


@dataclass
class ScalarField2D:
    """Samples of a scalar field on a uniform rectangular grid.

    values[i, j] sits at (x0 + i hx, y0 + j hy). The outermost rows and
    columns act as Dirichlet data for every solver in this module.
    """

    x0: float
    y0: float
    hx: float
    hy: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ConfigInvalid("field values must be a 2d array")
        if min(self.values.shape) < 8:
            raise ConfigInvalid("grid needs at least 8 points per direction")
        if not (self.hx > 0.0 and self.hy > 0.0):
            raise ConfigInvalid("grid spacings must be positive")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    @classmethod
    def from_function(cls, fn: Callable, x0: float, y0: float, hx: float,
                      hy: float, nx: int, ny: int) -> "ScalarField2D":
        x = x0 + hx * np.arange(nx)
        y = y0 + hy * np.arange(ny)
        vals = np.broadcast_to(np.asarray(fn(x[:, None], y[None, :]),
                                          dtype=float), (nx, ny))
        return cls(x0=x0, y0=y0, hx=hx, hy=hy, values=vals.copy())

    def with_values(self, values: np.ndarray) -> "ScalarField2D":
        return ScalarField2D(x0=self.x0, y0=self.y0, hx=self.hx, hy=self.hy,
                             values=values)


def laplacian(f: ScalarField2D) -> np.ndarray:
    """Five-point Laplacian at the interior points, shape (nx-2, ny-2)."""
    u = f.values
    return ((u[:-2, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[2:, 1:-1]) / f.hx ** 2
            + (u[1:-1, :-2] - 2.0 * u[1:-1, 1:-1] + u[1:-1, 2:]) / f.hy ** 2)


def residual_field(f: ScalarField2D, p: Potential) -> np.ndarray:
    """Defect lap u - W'(u) at the interior points."""
    return laplacian(f) - np.asarray(p.w1(f.values[1:-1, 1:-1]), dtype=float)


def energy(f: ScalarField2D, p: Potential) -> float:
    """Discrete energy whose critical points satisfy the five-point scheme.

    Gradient terms are summed over cell faces, the potential over interior
    points; the fixed boundary contributes only a constant offset, which
    is dropped.
    """
    u = f.values
    cell = f.hx * f.hy
    ex = np.sum((u[1:, :] - u[:-1, :]) ** 2) / (2.0 * f.hx ** 2)
    ey = np.sum((u[:, 1:] - u[:, :-1]) ** 2) / (2.0 * f.hy ** 2)
    ew = float(np.sum(np.asarray(p.w(u[1:-1, 1:-1]), dtype=float)))
    return float(cell * (ex + ey + ew))


class _DirichletOps:
    """Shared grid machinery: Laplacian matvec and sine-transform solves."""

    def __init__(self, f: ScalarField2D):
        self.hx, self.hy = f.hx, f.hy
        self.ni, self.nj = f.nx - 2, f.ny - 2
        ii = np.arange(1, self.ni + 1)
        jj = np.arange(1, self.nj + 1)
        self.lam_x = (2.0 - 2.0 * np.cos(ii * math.pi / (self.ni + 1))) / f.hx ** 2
        self.lam_y = (2.0 - 2.0 * np.cos(jj * math.pi / (self.nj + 1))) / f.hy ** 2
        self.size = self.ni * self.nj

    def lap_homogeneous(self, v: np.ndarray) -> np.ndarray:
        """Laplacian of an interior field extended by zero."""
        out = (-2.0 / self.hx ** 2 - 2.0 / self.hy ** 2) * v
        out[1:, :] += v[:-1, :] / self.hx ** 2
        out[:-1, :] += v[1:, :] / self.hx ** 2
        out[:, 1:] += v[:, :-1] / self.hy ** 2
        out[:, :-1] += v[:, 1:] / self.hy ** 2
        return out

    def helmholtz_solve(self, rhs: np.ndarray, shift: float) -> np.ndarray:
        """Exact solve of (-lap + shift) v = rhs with zero boundary."""
        coef = sfft.dstn(rhs, type=1, norm="ortho")
        coef /= self.lam_x[:, None] + self.lam_y[None, :] + shift
        return sfft.idstn(coef, type=1, norm="ortho")


@dataclass
class SolveReport:
    """Outcome summary of a stationary solve."""

    residual_sup: float
    newton_steps: int
    flow_steps: int
    minres_iters: int
    energy: float
    converged: bool = True


def relax_flow(f: ScalarField2D, p: Potential, dt: float = 0.5,
               steps: int = 50, stabilizer: float = 1.0) -> ScalarField2D:
    """Semi-implicit gradient flow; diffusion implicit, W' explicit.

    Each step solves (1/dt + s - lap) du = residual with zero boundary
    data, which is unconditionally contractive near stable states for
    s at least the negative curvature of the well.
    """
    ops = _DirichletOps(f)
    u = f.values.copy()
    cur = f.with_values(u)
    for _ in range(steps):
        res = residual_field(cur, p)
        du = ops.helmholtz_solve(res, 1.0 / dt + stabilizer)
        u[1:-1, 1:-1] += du
    return cur


def solve_newton(f0: ScalarField2D, p: Potential, tol: float = 1e-11,
                 max_iter: int = 40, minres_rtol: float = 1e-12,
                 max_flow_rounds: int = 4) -> tuple[ScalarField2D, SolveReport]:
    """Newton iteration for lap u = W'(u) with the boundary of f0 frozen.

    Returns the converged field and a SolveReport. Raises NewtonDiverged
    if line searches and flow fallbacks stop making progress, and
    MaxIterExceeded if the residual stays above tol after max_iter
    Newton steps.
    """
    ops = _DirichletOps(f0)
    u = f0.values.copy()
    cur = f0.with_values(u)
    cell = f0.hx * f0.hy
    newton_steps = flow_steps = minres_total = 0
    flow_rounds = 0

    res = residual_field(cur, p)
    res_sup = float(np.max(np.abs(res)))
    while res_sup > tol:
        if newton_steps >= max_iter:
            raise MaxIterExceeded(
                f"Newton residual {res_sup:.3e} after {max_iter} steps")
        newton_steps += 1
        w2 = np.asarray(p.w2(u[1:-1, 1:-1]), dtype=float)

        def matvec(vflat):
            v = vflat.reshape(ops.ni, ops.nj)
            return (-ops.lap_homogeneous(v) + w2 * v).ravel()

        def precond(vflat):
            v = vflat.reshape(ops.ni, ops.nj)
            return ops.helmholtz_solve(v, 1.0).ravel()

        A = LinearOperator((ops.size, ops.size), matvec=matvec)
        M = LinearOperator((ops.size, ops.size), matvec=precond)
        it_count = [0]

        def cb(_):
            it_count[0] += 1

        step, info = minres(A, res.ravel(), M=M, rtol=minres_rtol,
                            maxiter=2000, callback=cb)
        minres_total += it_count[0]
        if info < 0:
            raise LinearSolveFailure(f"minres failed with info={info}")
        step = step.reshape(ops.ni, ops.nj)

        # Energy line search; the gradient of the discrete energy at the
        # interior points is -cell * residual.
        e0 = energy(cur, p)
        slope = -cell * float(np.sum(res * step))
        accepted = False
        if slope < 0.0:
            t = 1.0
            while t >= 1e-6:
                trial = u.copy()
                trial[1:-1, 1:-1] += t * step
                cand = cur.with_values(trial)
                if energy(cand, p) <= e0 + 1e-4 * t * slope:
                    cur, u = cand, trial
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            # Not a descent direction, or the search collapsed: take a
            # round of stabilized flow instead.
            flow_rounds += 1
            if flow_rounds > max_flow_rounds:
                raise NewtonDiverged(
                    f"no descent after {flow_rounds} flow rounds "
                    f"(residual {res_sup:.3e})")
            cur = relax_flow(cur, p, dt=0.5, steps=50)
            u = cur.values
            flow_steps += 50
        res = residual_field(cur, p)
        res_sup = float(np.max(np.abs(res)))

    report = SolveReport(residual_sup=res_sup, newton_steps=newton_steps,
                         flow_steps=flow_steps, minres_iters=minres_total,
                         energy=energy(cur, p))
    return cur, report


def stability_check(f: ScalarField2D, p: Potential, k: int = 4,
                    tol: float = 1e-8, maxiter: int = 500,
                    seed: int = 0) -> tuple[float, ScalarField2D]:
    """Smallest eigenvalue of -lap + W''(u) with zero boundary data.

    Uses LOBPCG on a small block with the Helmholtz preconditioner; the
    returned field holds the corresponding eigenfunction (zero-padded on
    the boundary, normalized in the discrete L2 norm).
    """
    from scipy.sparse.linalg import lobpcg

    ops = _DirichletOps(f)
    w2 = np.asarray(p.w2(f.values[1:-1, 1:-1]), dtype=float)

    def matvec(vflat):
        v = vflat.reshape(ops.ni, ops.nj)
        return (-ops.lap_homogeneous(v) + w2 * v).ravel()

    def precond(vflat):
        v = vflat.reshape(ops.ni, ops.nj)
        return ops.helmholtz_solve(v, 1.0).ravel()

    A = LinearOperator((ops.size, ops.size), matvec=matvec)
    M = LinearOperator((ops.size, ops.size), matvec=precond)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((ops.size, k))
    with np.errstate(all="ignore"):
        vals, vecs = lobpcg(A, X, M=M, tol=tol, maxiter=maxiter, largest=False)
    order = np.argsort(vals)
    lam = float(vals[order[0]])
    v = vecs[:, order[0]].reshape(ops.ni, ops.nj)
    # Validate through the Rayleigh residual; LOBPCG does not hard-fail.
    vn = v / math.sqrt(float(np.sum(v ** 2)) * f.hx * f.hy)
    resid = matvec(vn.ravel()) - lam * vn.ravel()
    if float(np.max(np.abs(resid))) > 1e3 * tol * max(1.0, abs(lam)):
        raise NoConvergence(
            f"eigen residual {float(np.max(np.abs(resid))):.3e} at tol {tol:g}")
    padded = np.zeros_like(f.values)
    padded[1:-1, 1:-1] = vn
    return lam, f.with_values(padded)


# ----------------------------------------------------------------------
# Level-set extraction.

@dataclass
class InterfaceGraph:
    """A level crossing written as a graph y = height(x).

    orientation is +1 where the field increases upward through the
    crossing and -1 where it decreases.
    """

    x: np.ndarray
    height: np.ndarray
    orientation: int
    level: float = 0.0


# Inverse Vandermonde for cubic interpolation at offsets (-1, 0, 1, 2).
_V4 = np.linalg.inv(np.vander(np.array([-1.0, 0.0, 1.0, 2.0]), 4,
                              increasing=True))


def extract_levelset(f: ScalarField2D, level: float = 0.0,
                     expected: Optional[int] = None) -> list[InterfaceGraph]:
    """Extract level crossings column by column as graphs over x.

    Every column must carry the same number of crossings, otherwise the
    level set is not a union of graphs and NonGraphLevelSet is raised.
    Crossing ordinates are refined with local cubic interpolation.
    """
    u = f.values - level
    sgn = np.where(u >= 0.0, 1.0, -1.0)
    flips = sgn[:, :-1] * sgn[:, 1:] < 0.0
    counts = flips.sum(axis=1)
    if counts.min() != counts.max():
        raise NonGraphLevelSet(
            f"crossing count varies between {counts.min()} and {counts.max()}")
    n_cross = int(counts[0])
    if expected is not None and n_cross != expected:
        raise NonGraphLevelSet(f"found {n_cross} crossings, expected {expected}")
    if n_cross == 0:
        return []

    nx, ny = u.shape
    ix, jy = np.nonzero(flips)
    order = np.lexsort((jy, ix))
    ix, jy = ix[order], jy[order]
    rows = jy.reshape(nx, n_cross)
    if rows.min() < 1 or rows.max() > ny - 3:
        raise NonGraphLevelSet("crossing touches the boundary ring")
    # Cubic through rows j-1 .. j+2; tau measured from row j in [0, 1].
    samples = np.stack([np.take_along_axis(u, rows - 1 + k, axis=1)
                        for k in range(4)], axis=-1)
    coef = samples @ _V4.T           # value at offset tau: sum c_k tau^k
    num = np.take_along_axis(u, rows, axis=1)
    den = num - np.take_along_axis(u, rows + 1, axis=1)
    tau = num / den
    for _ in range(6):
        val = ((coef[..., 3] * tau + coef[..., 2]) * tau
               + coef[..., 1]) * tau + coef[..., 0]
        der = (3.0 * coef[..., 3] * tau + 2.0 * coef[..., 2]) * tau \
            + coef[..., 1]
        tau = np.clip(tau - val / der, -0.5, 1.5)
    heights = f.y0 + f.hy * (rows + tau)

    graphs = []
    x = f.x
    for kk in range(n_cross):
        der = (3.0 * coef[:, kk, 3] * tau[:, kk]
               + 2.0 * coef[:, kk, 2]) * tau[:, kk] + coef[:, kk, 1]
        sigma = 1 if float(np.median(der)) > 0.0 else -1
        if not (np.all(der > 0.0) or np.all(der < 0.0)):
            raise NonGraphLevelSet(
                f"crossing {kk} changes orientation along the layer")
        graphs.append(InterfaceGraph(x=x.copy(), height=heights[:, kk],
                                     orientation=sigma, level=level))
    graphs.sort(key=lambda g: float(np.mean(g.height)))
    return graphs


# ----------------------------------------------------------------------
# Pointwise curvature weight of the stability form.

def sz_curvature_term(f: ScalarField2D, band_margin: float = 5e-3,
                      grad_floor: float = 1e-8) -> dict:
    """Squared second-fundamental-form weight of the level-set foliation.

    Computes B2 = (|D^2 u|^2 - |grad|grad u||^2) / |grad u|^2 with
    grad|grad u| = (D^2 u . grad u)/|grad u|, on interior points where
    the field is inside the wells by band_margin and the gradient is
    above grad_floor. All derivatives are centered differences, composed
    algebraically, so the two |D^2 u| contractions cancel exactly for
    fields foliated by parallel lines.
    """
    u = f.values
    hx, hy = f.hx, f.hy
    c = u[1:-1, 1:-1]
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * hx)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * hy)
    uxx = (u[2:, 1:-1] - 2.0 * c + u[:-2, 1:-1]) / hx ** 2
    uyy = (u[1:-1, 2:] - 2.0 * c + u[1:-1, :-2]) / hy ** 2
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4.0 * hx * hy)
    g2 = ux ** 2 + uy ** 2
    mask = (np.abs(c) <= 1.0 - band_margin) & (g2 >= grad_floor ** 2)
    hess2 = uxx ** 2 + 2.0 * uxy ** 2 + uyy ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        gx = (uxx * ux + uxy * uy)
        gy = (uxy * ux + uyy * uy)
        b2 = np.where(mask, (hess2 - (gx ** 2 + gy ** 2) / g2) / g2, 0.0)
    return {"b2": b2, "grad2": g2, "mask": mask,
            "x": f.x[1:-1], "y": f.y[1:-1]}


# ----------------------------------------------------------------------
# Field input and output.

def _paths(path: str) -> tuple[str, str]:
    if path.endswith(".bin"):
        base = path[:-4]
    else:
        base = path
    return base + ".bin", base + ".json"


def save_field(f: ScalarField2D, path: str) -> None:
    """Write raw float64 samples next to a JSON header."""
    bin_path, json_path = _paths(path)
    header = {"nx": f.nx, "ny": f.ny, "hx": f.hx, "hy": f.hy,
              "x0": f.x0, "y0": f.y0, "dtype": "float64", "order": "C"}
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    f.values.astype("<f8").tofile(bin_path)


def load_field(path: str) -> ScalarField2D:
    bin_path, json_path = _paths(path)
    for p in (bin_path, json_path):
        if not os.path.exists(p):
            raise IoError(f"missing field file {p!r}")
    try:
        with open(json_path, encoding="utf-8") as fh:
            header = json.load(fh)
    except json.JSONDecodeError as exc:
        raise IoError(f"malformed field header {json_path!r}: {exc}") from exc
    try:
        nx, ny = int(header["nx"]), int(header["ny"])
        hx, hy = float(header["hx"]), float(header["hy"])
        x0, y0 = float(header["x0"]), float(header["y0"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IoError(f"malformed field header {json_path!r}: {exc}") from exc
    data = np.fromfile(bin_path, dtype="<f8")
    if data.size != nx * ny:
        raise IoError(
            f"field payload has {data.size} samples, header says {nx * ny}")
    return ScalarField2D(x0=x0, y0=y0, hx=hx, hy=hy,
                         values=data.reshape(nx, ny))
