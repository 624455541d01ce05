"""Scenario configs, experiment drivers, and deterministic output files.

A scenario is a TOML table with a kind, a seed, and a params table; the
drivers here map each kind onto the solver modules and write CSV/JSON
artifacts whose bytes depend only on the config and seed. Every CSV
starts with a comment line carrying the sha256 of the canonical config
encoding so tables can be traced back to their inputs.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import os
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import tomli

from . import allencahn2d as ac2d
from . import liouville_toda as lt
from .errors import ConfigInvalid, IllConditionedFit, IoError
from .potential import get_potential
from .profile1d import constants, second_eigenvalue, solve_profile, truncate
from .interaction import fit_asymptotics, interaction_curve
from .reduction import (frame_from_graph, frames_from_field, reduce_state,
                        solve_optimal_h)
from .stability import reduced_form_sides, seeded_eta, sz_form

__all__ = [
    "ScenarioConfig",
    "load_config",
    "config_sha256",
    "write_csv",
    "write_json",
    "fit_scaling",
    "run_scenario",
    "thread_budget",
]

_KINDS = ("profile", "interact", "liouville", "toda", "solve2d", "reduce",
          "stability", "sweep")


@dataclass
class ScenarioConfig:
    """One experiment: a kind, its parameters, and the RNG seed."""

    kind: str
    params: dict = dc_field(default_factory=dict)
    seed: int = 0
    label: str = ""

    def canonical(self) -> str:
        return json.dumps(
            {"kind": self.kind, "params": self.params, "seed": self.seed,
             "label": self.label},
            sort_keys=True, separators=(",", ":"), allow_nan=False)


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        raise IoError(f"config file not found: {p}")
    try:
        raw = tomli.loads(p.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigInvalid(f"config is not valid TOML: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ScenarioConfig:
    if "kind" not in raw:
        raise ConfigInvalid("missing field: kind")
    kind = raw["kind"]
    if kind not in _KINDS:
        raise ConfigInvalid(f"field kind must be one of {_KINDS}, got {kind!r}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigInvalid("field seed must be a nonnegative integer")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigInvalid("field params must be a table")
    label = raw.get("label", "")
    if not isinstance(label, str):
        raise ConfigInvalid("field label must be a string")
    known = {"kind", "seed", "params", "label"}
    extra = sorted(set(raw) - known)
    if extra:
        raise ConfigInvalid(f"unknown field: {extra[0]}")
    return ScenarioConfig(kind=kind, params=params, seed=seed, label=label)


def config_sha256(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(cfg.canonical().encode()).hexdigest()


def thread_budget() -> int:
    """Worker count for sweeps, capped by LAYERLAB_THREADS if set."""
    raw = os.environ.get("LAYERLAB_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigInvalid(
                f"LAYERLAB_THREADS must be an integer, got {raw!r}")
        if n < 1:
            raise ConfigInvalid("LAYERLAB_THREADS must be at least 1")
        return n
    return min(os.cpu_count() or 1, 8)


# ----------------------------------------------------------------------
# Output files.

def write_csv(path, columns: Sequence[str], rows, sha: str) -> None:
    """Plain CSV with a provenance comment and 17 significant digits."""
    lines = [f"# config_sha256={sha}", ",".join(columns)]
    for row in rows:
        lines.append(",".join("%.17g" % float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _coerce_scalar(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj: dict) -> None:
    """Flat JSON summary; NaN is a bug in the producer, not a value."""
    try:
        text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False,
                          default=_coerce_scalar)
    except ValueError as exc:
        raise IoError(f"refusing to serialize non-finite value: {exc}") from exc
    Path(path).write_text(text + "\n")


def _num(params: dict, key: str, default=None, kind=float):
    if key not in params:
        if default is None:
            raise ConfigInvalid(f"missing field: params.{key}")
        return default
    v = params[key]
    if kind is float and isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if kind is int and isinstance(v, int) and not isinstance(v, bool):
        return v
    raise ConfigInvalid(f"field params.{key} must be a {kind.__name__}")


def fit_scaling(eps_values, values, with_loglog: bool = True) -> dict:
    """Power-law fit log y = c0 + p log eps (+ c2 loglog|log eps|).

    Returns the fitted coefficients, the standard error of p, and the
    basis condition number. Raises IllConditionedFit if the collinearity
    of the regressors makes p meaningless.
    """
    e = np.asarray(eps_values, dtype=float)
    y = np.asarray(values, dtype=float)
    if e.size != y.size or e.size < 3:
        raise ConfigInvalid("need at least three (eps, value) pairs")
    if np.any(e <= 0) or np.any(e >= 1) or np.any(y <= 0):
        raise ConfigInvalid("eps must be in (0, 1) and values positive")
    le = np.log(e)
    cols = [np.ones_like(le), le]
    if with_loglog:
        cols.append(np.log(np.log(np.abs(le))))
    X = np.stack(cols, axis=1)
    if e.size < X.shape[1] + 1:
        raise ConfigInvalid("not enough points for the regressor count")
    cond = float(np.linalg.cond(X))
    if cond > 1e8:
        raise IllConditionedFit(f"regressor condition number {cond:.3g}")
    ly = np.log(y)
    beta, res, rank, _ = np.linalg.lstsq(X, ly, rcond=None)
    dof = e.size - X.shape[1]
    rss = float(np.sum((ly - X @ beta) ** 2))
    XtX_inv = np.linalg.inv(X.T @ X)
    p_stderr = math.sqrt(rss / dof * XtX_inv[1, 1]) if dof > 0 else float("inf")
    out = {"c0": float(beta[0]), "p": float(beta[1]), "p_stderr": p_stderr,
           "cond": cond, "rss": rss, "n": int(e.size)}
    if with_loglog:
        out["c_loglog"] = float(beta[2])
    return out


# ----------------------------------------------------------------------
# Drivers.

def _drive_profile(cfg: ScenarioConfig) -> tuple[dict, dict]:
    p = cfg.params
    pot = get_potential(p.get("potential", "quartic"))
    t_max = _num(p, "t_max", 25.0)
    n = _num(p, "n_points", 20001, int)
    prof = solve_profile(pot, t_max=t_max, n_points=n)
    summary = dict(constants(prof))
    summary["mu"] = second_eigenvalue(prof)
    eps = p.get("eps")
    table = {"t": prof.t, "g": prof.g, "g1": prof.g1}
    if eps is not None:
        tp = truncate(prof, float(eps))
        summary.update(eps=float(eps), sup_defect=tp.sup_defect,
                       defect_constant=tp.defect_constant,
                       gradient_mass=tp.gradient_mass)
        table["gbar"] = tp.gbar(prof.t)
        table["xi"] = tp.xi(prof.t)
    stride = max(1, prof.t.size // 2000)
    rows = np.stack([v[::stride] for v in table.values()], axis=1)
    return summary, {"columns": list(table), "rows": rows}


def _drive_interact(cfg: ScenarioConfig) -> tuple[dict, dict]:
    p = cfg.params
    pot = get_potential(p.get("potential", "quartic"))
    t_lo = _num(p, "t_min", 10.0)
    t_hi = _num(p, "t_max", 18.0)
    n = _num(p, "n_values", 9, int)
    prof = solve_profile(pot, t_max=_num(p, "profile_t_max", 25.0),
                         n_points=_num(p, "n_points", 20001, int))
    T = np.linspace(t_lo, t_hi, n)
    curve = interaction_curve(prof, T)
    fit = fit_asymptotics(curve.T, curve.i_plus)
    summary = {"c0": fit["c0"], "c1": fit["c1"], "rate": fit["rate"],
               "t_min": t_lo, "t_max": t_hi}
    rows = np.stack([curve.T, curve.i_plus, curve.i_minus,
                     curve.scaled_plus, curve.scaled_minus], axis=1)
    return summary, {"columns": ["T", "i_plus", "i_minus", "scaled_plus",
                                 "scaled_minus"], "rows": rows}


def _drive_liouville(cfg: ScenarioConfig) -> tuple[dict, dict]:
    p = cfg.params
    m = _num(p, "m", None, int)
    kind = p.get("kind", "smooth")
    if kind == "singular":
        sol = lt.make_singular_liouville(m, r_min=_num(p, "r_min", 1e-6),
                                         r_max=_num(p, "r_max", 1e6))
    elif kind == "smooth":
        sol = lt.solve_radial_liouville(m, f_center=_num(p, "f_center", 0.0),
                                        r_min=_num(p, "r_min", 1e-4),
                                        r_max=_num(p, "r_max", 1e4))
    else:
        raise ConfigInvalid("field params.kind must be smooth or singular")
    summary = {"m": m, "kind": kind,
               "ode_residual": lt.ode_residual(sol),
               "stability_margin": lt.liouville_stability_margin(sol)}
    q = p.get("farina_q")
    if q is not None:
        K = np.geomspace(_num(p, "k_min", sol.r[0] * 10),
                         _num(p, "k_max", sol.r[-1] / 10), 12)
        slope, detail = lt.farina_exponent(sol, float(q), K)
        summary.update(farina_q=float(q), farina_slope=slope)
    stride = max(1, sol.r.size // 2000)
    rows = np.stack([sol.r[::stride], sol.f[::stride], sol.v[::stride]], axis=1)
    return summary, {"columns": ["r", "f", "v"], "rows": rows}


def _drive_toda(cfg: ScenarioConfig) -> tuple[dict, dict]:
    p = cfg.params
    q = _num(p, "q", 2, int)
    d = _num(p, "d", None)
    length = _num(p, "l", None)
    c = _num(p, "coupling", 12.0)
    state = lt.solve_toda_bvp(q, d, length, c=c,
                              n_points=_num(p, "n_points", 4001, int))
    drift = lt.toda_first_integral(state)
    summary = {"q": q, "d": d, "l": length, "coupling": c,
               "residual": state.residual, "iterations": state.iterations,
               "first_integral_drift": float(np.max(np.abs(drift - drift[0]))),
               "min_gap": float(np.min(state.gaps()))}
    if q == 2:
        closed = lt.q2_gap_closed_form(d, length, c)
        summary["gap_closed_form"] = closed.rho0
        summary["gap_vs_closed_form"] = float(
            np.max(np.abs((state.f[1] - state.f[0])
                          - (closed.rho0 + 2.0 * np.log(np.cosh(closed.beta * state.x))))))
    cols = ["x"] + [f"f{a}" for a in range(q)]
    rows = np.stack([state.x] + [state.f[a] for a in range(q)], axis=1)
    return summary, {"columns": cols, "rows": rows}


def _two_layer_start(d, length, margin, h, c):
    closed = lt.q2_gap_closed_form(d, length, c)
    nx = int(round(length / h)) + 1
    ny = int(round((d + 2.0 * margin) / h)) + 1

    def init(x, y):
        gap = closed.rho0 + 2.0 * np.log(np.cosh(closed.beta * x))
        return (np.tanh((y + gap / 2.0) / 2.0)
                - np.tanh((y - gap / 2.0) / 2.0) - 1.0)

    return ac2d.ScalarField2D.from_function(
        init, -length / 2.0, -(d / 2.0 + margin), h, h, nx, ny)


def _solve2d_field(p: dict) -> tuple[ac2d.ScalarField2D, ac2d.SolveReport]:
    pot = get_potential(p.get("potential", "quartic"))
    h = _num(p, "h", 0.06)
    shape = p.get("shape", "two_layer")
    if shape == "two_layer":
        f0 = _two_layer_start(_num(p, "d", None), _num(p, "l", None),
                              _num(p, "margin", 12.0), h,
                              _num(p, "coupling", 12.0))
    elif shape == "flat":
        length = _num(p, "l", None)
        margin = _num(p, "margin", 12.0)
        nx = int(round(length / h)) + 1
        ny = int(round(2.0 * margin / h)) + 1
        f0 = ac2d.ScalarField2D.from_function(
            lambda x, y: np.tanh(y / 2.0), -length / 2.0, -margin, h, h, nx, ny)
    else:
        raise ConfigInvalid("field params.shape must be two_layer or flat")
    return ac2d.solve_newton(f0, pot, tol=_num(p, "tol", 1e-11))


def _drive_solve2d(cfg: ScenarioConfig) -> tuple[dict, dict]:
    sol, rep = _solve2d_field(cfg.params)
    summary = {"residual_sup": rep.residual_sup, "newton_steps": rep.newton_steps,
               "flow_steps": rep.flow_steps, "minres_iters": rep.minres_iters,
               "energy": rep.energy, "nx": sol.nx, "ny": sol.ny,
               "hx": sol.hx, "hy": sol.hy}
    graphs = ac2d.extract_levelset(sol, expected=cfg.params.get("expected"))
    cols = ["x"] + [f"height{a}" for a in range(len(graphs))]
    rows = np.stack([graphs[0].x] + [g.height for g in graphs], axis=1)
    summary["n_layers"] = len(graphs)
    return summary, {"columns": cols, "rows": rows, "field": sol}


def _drive_reduce(cfg: ScenarioConfig) -> tuple[dict, dict]:
    p = cfg.params
    pot = get_potential(p.get("potential", "quartic"))
    eps = _num(p, "eps", 1e-2)
    prof = solve_profile(pot, t_max=_num(p, "t_max", 60.0),
                         n_points=_num(p, "n_points", 48001, int))
    tr = truncate(prof, eps)
    c = _num(p, "coupling", 12.0)
    h = _num(p, "h", 0.06)
    pair = bool(p.get("richardson", True))
    coarse, _ = _solve2d_field({**p, "h": h})
    if pair:
        fine, _ = _solve2d_field({**p, "h": h / 2.0})
        rep = reduce_state((coarse, fine), tr, coupling=c,
                           expected=p.get("expected", 2))
    else:
        rep = reduce_state(coarse, tr, coupling=c,
                           expected=p.get("expected", 2))
    summary = {"e0_sup": rep.e0_sup, "e0_ratio": rep.e0_ratio,
               "phi_sup": rep.phi_sup, "phi_c1": rep.phi_c1,
               "orthogonality": rep.orthogonality, "d_min": rep.d_min,
               "eps_analog": rep.eps_analog, "a_max": rep.a_max,
               "max_curvature": max(float(np.max(np.abs(fr.curvature(fr.x))))
                                    for fr in rep.frames)}
    for k, v in rep.diagnostics.items():
        summary[f"diag_{k}"] = v
    x = rep.frames[0].x
    cols = ["x"] + [f"height{a}" for a in range(len(rep.frames))] + \
        [f"h{a}" for a in range(len(rep.frames))]
    rows = np.stack([x] + [fr.height for fr in rep.frames]
                    + [np.asarray(ha) for ha in rep.h], axis=1)
    return summary, {"columns": cols, "rows": rows}


def _drive_stability(cfg: ScenarioConfig) -> tuple[dict, dict]:
    p = cfg.params
    pot = get_potential(p.get("potential", "quartic"))
    eps = _num(p, "eps", 1e-2)
    prof = solve_profile(pot, t_max=_num(p, "t_max", 60.0),
                         n_points=_num(p, "n_points", 48001, int))
    tr = truncate(prof, eps)
    sol, rep2d = _solve2d_field(p)
    expected = p.get("expected", 2 if p.get("shape", "two_layer") == "two_layer" else 1)
    frames = frames_from_field(sol, expected=expected)
    off = solve_optimal_h(sol, frames, tr)
    etas = [seeded_eta(sol, cfg.seed + 17 * a) for a in range(len(frames))]
    report = reduced_form_sides(sol, pot, frames, tr, etas,
                                coupling=_num(p, "coupling", 12.0), h=off.h)
    sz = sz_form(sol, seeded_eta(sol, cfg.seed))
    summary = {"full_form": report.full_form,
               "lhs_tangential": report.lhs_tangential,
               "rhs_interaction_vertical": report.rhs_interaction_vertical,
               "rhs_interaction_foot": report.rhs_interaction_foot,
               "reduced_form": report.reduced_form,
               "q_budget": report.q_budget,
               "discrepancy": report.discrepancy,
               "eps_analog": report.eps_analog, "a_max": report.a_max,
               "sz_lhs": sz["lhs"], "sz_rhs": sz["rhs"],
               "sz_value": sz["value"], "residual_sup": rep2d.residual_sup,
               "seed": cfg.seed}
    rows = np.stack([frames[0].x] + [np.asarray(e) for e in etas], axis=1)
    cols = ["x"] + [f"eta{a}" for a in range(len(etas))]
    return summary, {"columns": cols, "rows": rows}


def _sweep_single(p: dict, d: float) -> dict:
    sol, rep = _solve2d_field({**p, "d": d})
    graphs = ac2d.extract_levelset(sol, expected=p.get("expected", 2))
    frames = [frame_from_graph(g) for g in graphs]
    kmax = max(float(np.max(np.abs(fr.curvature(
        fr.x[(fr.x >= fr.x[0] + 2.0) & (fr.x <= fr.x[-1] - 2.0)]))))
        for fr in frames)
    gaps = [float(np.min(np.abs(b.project(a.x, a.height)[1])))
            for a, b in zip(frames[:-1], frames[1:])]
    d_min = min(gaps)
    return {"d": d, "eps_analog": 1.0 / d_min, "max_curvature": kmax,
            "d_min": d_min, "residual_sup": rep.residual_sup}


def _drive_sweep(cfg: ScenarioConfig) -> tuple[dict, dict]:
    p = cfg.params
    ds = p.get("d_values")
    if not isinstance(ds, list) or len(ds) < 4 or \
            not all(isinstance(v, (int, float)) for v in ds):
        raise ConfigInvalid("field params.d_values must list at least four numbers")
    ds = [float(v) for v in ds]
    workers = min(thread_budget(), len(ds))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(_sweep_single, p, d) for d in ds]
        results = [f.result() for f in futures]
    eps = [r["eps_analog"] for r in results]
    kmax = [r["max_curvature"] for r in results]
    fit = fit_scaling(eps, kmax)
    plain = fit_scaling(eps, kmax, with_loglog=False)
    summary = {"n_runs": len(results), "p": fit["p"],
               "p_stderr": fit["p_stderr"], "c0": fit["c0"],
               "cond": fit["cond"], "p_plain": plain["p"],
               "p_plain_stderr": plain["p_stderr"], "workers": workers}
    cols = ["d", "eps_analog", "max_curvature", "d_min", "residual_sup"]
    rows = [[r[c] for c in cols] for r in results]
    return summary, {"columns": cols, "rows": rows}


_DRIVERS = {
    "profile": _drive_profile,
    "interact": _drive_interact,
    "liouville": _drive_liouville,
    "toda": _drive_toda,
    "solve2d": _drive_solve2d,
    "reduce": _drive_reduce,
    "stability": _drive_stability,
    "sweep": _drive_sweep,
}


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> dict:
    """Run one scenario; optionally write its artifacts under out_dir.

    Returns the flat summary dict (what the JSON file contains, plus the
    config hash). File names are <label or kind>.{csv,json,bin}.
    """
    if cfg.kind not in _DRIVERS:
        raise ConfigInvalid(f"unknown scenario kind: {cfg.kind!r}")
    summary, table = _DRIVERS[cfg.kind](cfg)
    sha = config_sha256(cfg)
    summary = {**summary, "config_sha256": sha}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = cfg.label or cfg.kind
        write_json(out / f"{stem}.json", summary)
        write_csv(out / f"{stem}.csv", table["columns"], table["rows"], sha)
        if "field" in table:
            ac2d.save_field(table["field"], str(out / f"{stem}_field"))
    return summary
