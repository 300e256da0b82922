"""Command line entry point: ``warpflow curvature|flow|verify|sweep --config FILE``.

Exit codes
----------
0  success (every checked residual under its tolerance)
1  completed, but at least one residual exceeded its tolerance
2  configuration error (bad JSON, unknown key, invalid spec, m2 < 2, ...)
3  numerical failure (singular metric, stencil outside the domain, ...)
4  flow reached a singularity (final state written to final_state.json)
5  unstable step (step size above the stability bound, or NaN/Inf)
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .catalog import warped_from_definition, warped_from_name
from .config import CURVATURE_RESIDUALS, EINSTEIN_ONLY, ScenarioConfig, load_config
from .errors import (
    ConfigError,
    InvalidSpec,
    NotEinsteinFiber,
    SingularityReached,
    UnstableStep,
    WarpflowError,
)
from .expr import ExpressionError, compile_expr
from .flow import (
    FlowGrid,
    FlowState,
    check_einstein,
    check_hgf_characterization,
    check_rf_characterization,
    integrate,
    sectional_curvatures,
    unified_rhs,
)
from .manifold import MetricField, ScalarField, curvature_direct
from .report import ResidualReport
from .verify import (
    EinsteinFiberContext,
    FlowTrajectory,
    verify_characterization,
    verify_f_consistency,
    verify_f_evolution,
    verify_metric_evolution,
    verify_proportionality,
    verify_ricci_evolution,
    verify_warp_evolution,
)
from .warped import WarpedProductSpec, default_samples, oracle_compare, product_metric

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SINGULAR = 4
EXIT_UNSTABLE = 5

EXIT_CODES = {
    EXIT_OK: "ok",
    EXIT_FAILED: "residual above tolerance",
    EXIT_CONFIG: "configuration error",
    EXIT_NUMERICAL: "numerical failure",
    EXIT_SINGULAR: "singularity reached",
    EXIT_UNSTABLE: "unstable step",
}


def fmt(v) -> str:
    """Shortest round-trip decimal for floats, empty cell for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["schema_version"] + header)
        for row in rows:
            w.writerow([SCHEMA_VERSION] + [fmt(row.get(h)) for h in header])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=False)
        fh.write("\n")


# -- building blocks ---------------------------------------------------------------------

def build_spec(cfg: ScenarioConfig) -> WarpedProductSpec:
    try:
        if isinstance(cfg.spec, str):
            return warped_from_name(cfg.spec)
        return warped_from_definition(cfg.spec)
    except InvalidSpec as exc:
        raise ConfigError(str(exc)) from None


def spec_label(cfg: ScenarioConfig) -> str:
    return cfg.spec if isinstance(cfg.spec, str) else "inline"


def strip_analytic(wp: WarpedProductSpec) -> WarpedProductSpec:
    """Same spec with every analytic derivative removed (pure finite differences)."""
    base = replace(wp.base, analytic_derivs=None)
    fiber = replace(wp.fiber, analytic_derivs=None)
    warp = replace(wp.warp, gradient=None, partial_hessian=None)
    return WarpedProductSpec(base, fiber, warp, wp.einstein_c, name=wp.name)


def _fiber_einstein_constant(wp: WarpedProductSpec) -> Optional[float]:
    """Declared constant, or one measured on the fiber when it is numerically Einstein."""
    if wp.einstein_c is not None:
        return float(wp.einstein_c)
    samples = default_samples(WarpedProductSpec(wp.fiber, wp.fiber, _unit(wp.fiber), name="probe"), 3)
    cs = []
    for p in samples:
        cb = curvature_direct(wp.fiber, p[: wp.m2])
        ratio = np.linalg.solve(cb.metric, cb.ricci)
        cs.append(np.trace(ratio) / wp.m2)
        if np.max(np.abs(ratio - cs[-1] * np.eye(wp.m2))) > 1e-6:
            return None
    if max(cs) - min(cs) > 1e-6:
        return None
    return float(np.mean(cs))


def _unit(metric: MetricField) -> ScalarField:
    d = metric.dim
    return ScalarField(metric.domain, lambda x: 1.0, lambda x: np.zeros(d), lambda x: np.zeros((d, d)))


def _grid_values(value, x: np.ndarray, what: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(x.shape, float(value))
    try:
        f = compile_expr(str(value), 1)
    except ExpressionError as exc:
        raise ConfigError(f"flow.{what}: {exc}") from None
    return np.asarray(f(x[None, :]), dtype=float) * np.ones_like(x)


def build_state(cfg: ScenarioConfig, wp: WarpedProductSpec) -> FlowState:
    if wp.m1 != 1:
        raise ConfigError("flows need a one-dimensional base (m1 = 1)")
    c = _fiber_einstein_constant(wp)
    if c is None:
        raise ConfigError(
            f"{NotEinsteinFiber.__name__}: the rotationally symmetric flow needs an Einstein fiber (Ric = c g)"
        )
    f = cfg.flow
    dom = wp.base.domain
    lo, hi = (f.domain if f.domain is not None else (dom.lo[0], dom.hi[0]))
    boundary = f.boundary or ("periodic" if dom.periodic[0] else "neumann")
    grid = FlowGrid(f.N, float(lo), float(hi), boundary)
    x = grid.x
    if f.lam is None:
        lam = np.array([wp.warp(np.array([xi])) for xi in x])
    else:
        lam = _grid_values(f.lam, x, "lam")
    if not np.all(lam > f.lam_min):
        raise ConfigError(
            f"initial warping function drops to {lam.min():.3g} on [{lo:g}, {hi:g}]; "
            "choose flow.domain away from its zeros"
        )
    mu = _grid_values(f.mu, x, "mu")
    if not np.all(mu > 0):
        raise ConfigError("initial mu must be positive")
    second = f.alpha != 0.0
    try:
        return FlowState(
            grid=grid,
            mu=mu,
            lam=lam,
            mu_vel=_grid_values(f.mu_vel, x, "mu_vel") if second else None,
            lam_vel=_grid_values(f.lam_vel, x, "lam_vel") if second else None,
            coeffs=(f.alpha, f.beta, f.gamma),
            n=wp.m2,
            fiber_einstein_c=c,
            lam_min=f.lam_min,
            K_max=f.K_max,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _snapshot_dt(cfg: ScenarioConfig, state: FlowState) -> tuple:
    f = cfg.flow
    total = f.t_end - state.t
    if f.snapshot_dt is not None:
        return f.dt, f.snapshot_dt
    if f.dt is None:
        raise ConfigError("flow needs dt or snapshot_dt")
    ten = 10 * f.dt
    if abs(round(total / ten) * ten - total) <= 1e-9 * total:
        return f.dt, ten
    return f.dt, f.dt


def _characterization(state: FlowState) -> ResidualReport:
    if state.second_order:
        _, lam_tt = unified_rhs(state)
        return check_hgf_characterization(state, lam_tt=lam_tt)
    return check_rf_characterization(state, unified_rhs(state)[1])


def series_row(state: FlowState) -> dict:
    row = {
        "t": state.t,
        "lam_min": float(state.lam.min()),
        "lam_max": float(state.lam.max()),
        "mu_min": float(state.mu.min()),
        "mu_max": float(state.mu.max()),
    }
    try:
        k_rad, k_sph = sectional_curvatures(state)
        row.update(
            K_rad_min=float(k_rad.min()),
            K_rad_max=float(k_rad.max()),
            K_sph_min=float(k_sph.min()),
            K_sph_max=float(k_sph.max()),
        )
        rep = _characterization(state)
        for name, (li, l2) in rep.norms.items():
            row[f"res.{name}.linf"] = li
            row[f"res.{name}.l2"] = l2
    except WarpflowError:
        pass
    return row


SERIES_HEADER = ["t", "lam_min", "lam_max", "mu_min", "mu_max", "K_rad_min", "K_rad_max", "K_sph_min", "K_sph_max"]


def _state_dump(state: FlowState) -> dict:
    out = {
        "t": state.t,
        "x": state.x,
        "lam": state.lam,
        "mu": state.mu,
        "coeffs": list(state.coeffs),
        "n": state.n,
        "fiber_einstein_c": state.fiber_einstein_c,
    }
    if state.lam_vel is not None:
        out.update(lam_vel=state.lam_vel, mu_vel=state.mu_vel)
    return out


class Outcome:
    def __init__(self, code: int, summary: dict):
        self.code = code
        self.summary = summary


def _equations_summary(rep: ResidualReport, names, cfg: ScenarioConfig, defaults=None) -> tuple:
    defaults = defaults or {}
    eqs, ok = {}, True
    for name in names:
        li, l2 = rep.norms[name]
        tol = cfg.tolerance(name, defaults.get(name, 1e-3))
        passed = bool(li < tol)
        ok &= passed
        eqs[name] = {"linf": li, "l2": l2, "tol": tol, "pass": passed}
    return eqs, ok


# -- modes -----------------------------------------------------------------------------------

def run_curvature(cfg: ScenarioConfig, out: Path) -> Outcome:
    wp = build_spec(cfg)
    cc = cfg.curvature
    if cc.finite_differences:
        wp = strip_analytic(wp)
    analytic = (
        wp.base.analytic_derivs is not None and wp.fiber.analytic_derivs is not None and wp.warp.has_analytic_derivs
    )
    default_tol = 1e-6 if analytic else 1e-4
    samples = default_samples(wp, cc.samples)
    rows = []
    for i, p in enumerate(samples):
        single = oracle_compare(wp, [p], cc.h)
        row = {"sample": i, "point": " ".join(repr(float(v)) for v in p), "scalar_oracle": single.extra["oracle_scalar_min"]}
        for name in CURVATURE_RESIDUALS:
            row[f"res.{name}.linf"] = single.linf(name)
        rows.append(row)
    rep = oracle_compare(wp, samples, cc.h)
    header = ["sample", "point", "scalar_oracle"] + [f"res.{n}.linf" for n in CURVATURE_RESIDUALS]
    write_csv(out / (cfg.output.csv or "curvature.csv"), header, rows)
    eqs, ok = _equations_summary(rep, CURVATURE_RESIDUALS, cfg, {n: default_tol for n in CURVATURE_RESIDUALS})
    summary = {
        "mode": "curvature",
        "spec": spec_label(cfg),
        "derivatives": "analytic" if analytic else "finite-difference",
        "scalar_oracle_min": rep.extra["oracle_scalar_min"],
        "scalar_oracle_max": rep.extra["oracle_scalar_max"],
        "equations": eqs,
        "status": "pass" if ok else "fail",
    }
    return Outcome(EXIT_OK if ok else EXIT_FAILED, summary)


def _run(cfg: ScenarioConfig, state: FlowState, rows: Optional[list] = None):
    dt, snap = _snapshot_dt(cfg, state)
    cb = (lambda s: rows.append(series_row(s))) if rows is not None else None
    return integrate(state, cfg.flow.t_end, dt=dt, snapshot_dt=snap, scheme=cfg.flow.scheme, on_snapshot=cb,
                     stop_on_singularity=True)


def _extra_columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in SERIES_HEADER and k not in cols:
                cols.append(k)
    return cols


def run_flow(cfg: ScenarioConfig, out: Path) -> Outcome:
    wp = build_spec(cfg)
    state = build_state(cfg, wp)
    base = {"mode": "flow", "spec": spec_label(cfg), "coeffs": list(state.coeffs), "n": state.n}
    if state.coeffs[0] == 0.0 and state.coeffs[1] == 0.0:
        rep = check_einstein(state)
        eqs, ok = _equations_summary(rep, rep.names(), cfg)
        row = series_row(state)
        for name, (li, l2) in rep.norms.items():
            row[f"res.{name}.linf"], row[f"res.{name}.l2"] = li, l2
        write_csv(out / (cfg.output.csv or "series.csv"), SERIES_HEADER + _extra_columns([row]), [row])
        base.update(equations=eqs, status="pass" if ok else "fail", t_final=state.t)
        return Outcome(EXIT_OK if ok else EXIT_FAILED, base)
    rows: list = []
    result = _run(cfg, state, rows)
    write_csv(out / (cfg.output.csv or "series.csv"), SERIES_HEADER + _extra_columns(rows), rows)
    if cfg.output.snapshots:
        write_json(out / "snapshots.json", {"snapshots": [_state_dump(s) for s in result.snapshots]})
    base.update(t_final=result.final.t, snapshots=len(result.snapshots), dt=result.dt, snapshot_dt=result.snapshot_dt)
    if result.status == "singular":
        write_json(out / "final_state.json", _state_dump(result.final))
        base.update(status="singular", message=str(result.error))
        return Outcome(EXIT_SINGULAR, base)
    base["status"] = "ok"
    return Outcome(EXIT_OK, base)


def _perturbed(traj: FlowTrajectory, perturb: Optional[dict]) -> FlowTrajectory:
    if not perturb:
        return traj
    k = int(perturb["snapshot"])
    if not 0 <= k < len(traj):
        raise ConfigError(f"verify.perturb.snapshot {k} outside 0..{len(traj) - 1}")
    snaps = list(traj.snapshots)
    snaps[k] = replace(snaps[k], lam=snaps[k].lam * float(perturb["lam_scale"]))
    return FlowTrajectory(snaps, traj.dt_snap)


def verify_trajectory(cfg: ScenarioConfig, wp: WarpedProductSpec, traj: FlowTrajectory, equations) -> ResidualReport:
    v = cfg.verify
    kw = dict(scheme=v.time_scheme, margin=v.margin)
    needs_ctx = [e for e in equations if e in EINSTEIN_ONLY]
    ctx = None
    if wp.einstein_c is not None:
        ctx = EinsteinFiberContext(float(wp.einstein_c), wp.m2)
    elif needs_ctx:
        raise ConfigError(f"{NotEinsteinFiber.__name__}: {needs_ctx} need a fiber declared Einstein (einstein_c)")
    want = set(equations)
    rep = ResidualReport(t=traj.snapshots[-1].t)
    so = v.spatial_order
    if want & {"metric_base", "metric_fiber"}:
        rep.merge(verify_metric_evolution(traj, fiber=wp.fiber, spatial_order=so, **kw))
    if "metric_base_hgf" in want:
        rep.merge(verify_metric_evolution(traj, flow="hgf", spatial_order=so, **kw))
    if "warp_rf" in want:
        rep.merge(verify_warp_evolution(traj, ctx, spatial_order=so, **kw))
    if "warp_hgf" in want:
        rep.merge(verify_warp_evolution(traj, ctx, flow="hgf", spatial_order=so, **kw))
    if want & {"ricci_base", "ricci_fiber", "ricci_fiber_einstein"}:
        rep.merge(verify_ricci_evolution(traj, ctx, fiber=wp.fiber, spatial_order=so, **kw))
    if want & {"f_evolution", "f_evolution_complete"}:
        rep.merge(verify_f_evolution(traj, ctx, spatial_order=so, **kw))
    for name, fn in (("f_consistency", verify_f_consistency), ("f_proportionality", verify_proportionality)):
        if name in want:
            parts = [fn(ctx, s, margin=v.margin) for s in traj.snapshots]
            rep.add(name, np.concatenate([p.fields[name] for p in parts]), [s.t for s in traj.snapshots])
    if want & {"rf_char", "rf_char_hess"}:
        rep.merge(verify_characterization(traj, "rf", **kw))
    if want & {"hgf_char", "hgf_char_offdiag"}:
        rep.merge(verify_characterization(traj, "hgf", **kw))
    return rep


def _verify_rows(rep: ResidualReport, names, times) -> tuple:
    header = ["t"]
    for n in names:
        header += [f"res.{n}.linf", f"res.{n}.l2"]
    by_t = {t: {"t": t} for t in times}
    for n in names:
        for t, li, l2 in rep.per_time(n):
            row = by_t.setdefault(t, {"t": t})
            row[f"res.{n}.linf"], row[f"res.{n}.l2"] = li, l2
    return header, [by_t[t] for t in sorted(by_t)]


def run_verify(cfg: ScenarioConfig, out: Path) -> Outcome:
    wp = build_spec(cfg)
    equations = list(dict.fromkeys(cfg.verify.equations))
    if wp.einstein_c is None and any(e in EINSTEIN_ONLY for e in equations):
        raise ConfigError(f"{NotEinsteinFiber.__name__}: requested equations need a fiber declared Einstein")
    state = build_state(cfg, wp)
    result = _run(cfg, state)
    base = {"mode": "verify", "spec": spec_label(cfg), "coeffs": list(state.coeffs), "n": state.n}
    if result.status == "singular":
        write_json(out / "final_state.json", _state_dump(result.final))
        base.update(status="singular", message=str(result.error), t_final=result.final.t)
        return Outcome(EXIT_SINGULAR, base)
    traj = _perturbed(FlowTrajectory.from_run(result), cfg.verify.perturb)
    rep = verify_trajectory(cfg, wp, traj, equations)
    header, rows = _verify_rows(rep, equations, [s.t for s in traj.snapshots])
    write_csv(out / (cfg.output.csv or "series.csv"), header, rows)
    eqs, ok = _equations_summary(rep, equations, cfg)
    base.update(
        equations=eqs,
        status="pass" if ok else "fail",
        t_final=traj.snapshots[-1].t,
        snapshot_dt=traj.dt_snap,
        perturbed=bool(cfg.verify.perturb),
    )
    return Outcome(EXIT_OK if ok else EXIT_FAILED, base)


# -- sweeps --------------------------------------------------------------------------------------

def _workers(count: int) -> int:
    cap = os.environ.get("WARPFLOW_THREADS")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"WARPFLOW_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(count, limit))


def _orders(errors, sizes):
    orders = [None]
    for (e0, h0), (e1, h1) in zip(zip(errors, sizes), zip(errors[1:], sizes[1:])):
        if e0 and e1 and e0 > 0 and e1 > 0 and h0 != h1:
            orders.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            orders.append(None)
    return orders


def _exact_lam2(state: FlowState, t: float):
    """Closed-form λ² for spatially constant data under RF or HGF, else None."""
    if np.ptp(state.lam) != 0.0 or np.ptp(state.mu) != 0.0:
        return None
    lam0, c = float(state.lam[0]), state.fiber_einstein_c
    if state.coeffs == (0.0, 1.0, 0.0):
        return lam0**2 - 2.0 * c * t
    if state.coeffs == (1.0, 0.0, 0.0) and np.ptp(state.lam_vel) == 0.0:
        v0 = float(state.lam_vel[0])
        return lam0**2 + 2.0 * lam0 * v0 * t - c * t * t
    return None


def _sweep_flow(cfg: ScenarioConfig, wp, value):
    if cfg.sweep.param == "dt":
        c = replace(cfg, flow=replace(cfg.flow, dt=float(value), snapshot_dt=cfg.flow.t_end))
        size = float(value)
    else:
        c = replace(cfg, flow=replace(cfg.flow, N=int(value)))
        size = None
    state = build_state(c, wp)
    if size is None:
        size = state.grid.dx
    rows: list = []
    dt = c.flow.dt
    result = integrate(state, c.flow.t_end, dt=dt, snapshot_dt=c.flow.snapshot_dt or c.flow.t_end,
                       scheme=c.flow.scheme, stop_on_singularity=True,
                       on_snapshot=lambda s: rows.append(series_row(s)))
    if result.status == "singular":
        raise result.error
    return {"value": value, "size": size, "state": result.final, "row": rows[-1], "initial": state}


def _sweep_curvature(cfg: ScenarioConfig, wp, value):
    fd = strip_analytic(wp)
    samples = default_samples(wp, cfg.curvature.samples)
    h = float(value)
    rep = oracle_compare(fd, samples, h)
    pm_fd, pm = product_metric(fd), product_metric(wp)
    analytic = pm.analytic_derivs is not None
    fd_bundles = [curvature_direct(pm_fd, p, h) for p in samples]
    ref = [curvature_direct(pm, p) for p in samples] if analytic else None
    return {"value": value, "size": h, "rep": rep, "bundles": fd_bundles, "ref": ref}


def _sweep_verify(cfg: ScenarioConfig, wp, value, base_n, base_snap):
    n = int(value)
    c = replace(cfg, flow=replace(cfg.flow, N=n))
    state = build_state(c, wp)
    ratio = state.grid.dx / _dx_for(c, wp, base_n)
    snap = base_snap * ratio
    c = replace(c, flow=replace(c.flow, snapshot_dt=snap, dt=None))
    result = _run(c, state)
    if result.status == "singular":
        raise result.error
    traj = FlowTrajectory.from_run(result)
    rep = verify_trajectory(c, wp, traj, c.verify.equations)
    return {"value": value, "size": state.grid.dx, "rep": rep, "snapshot_dt": snap}


def _dx_for(cfg, wp, n):
    return build_state(replace(cfg, flow=replace(cfg.flow, N=int(n))), wp).grid.dx


def run_sweep(cfg: ScenarioConfig, out: Path) -> Outcome:
    wp = build_spec(cfg)
    s = cfg.sweep
    values = list(s.values)
    workers = _workers(len(values))
    if s.target == "flow":
        job = lambda v: _sweep_flow(cfg, wp, v)  # noqa: E731
    elif s.target == "curvature":
        job = lambda v: _sweep_curvature(cfg, wp, v)  # noqa: E731
    else:
        if cfg.flow.snapshot_dt is None:
            raise ConfigError("verify sweeps need flow.snapshot_dt for the first value")
        job = lambda v: _sweep_verify(cfg, wp, v, values[0], cfg.flow.snapshot_dt)  # noqa: E731
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(job, values))

    summary = {"mode": "sweep", "spec": spec_label(cfg), "target": s.target, "param": s.param}
    if s.target == "flow":
        errors = []
        for r in results:
            st = r["state"]
            exact = _exact_lam2(r["initial"], st.t) if s.reference == "exact" else None
            if s.reference == "exact":
                if exact is None:
                    raise ConfigError("no closed-form solution for this flow; use sweep.reference = finest")
                errors.append(float(np.max(np.abs(st.lam**2 - exact))))
            else:
                errors.append(_self_error(st, results[-1]["state"]))
        orders = _orders(errors, [r["size"] for r in results])
        header = ["param", "value", "size", "error", "order"] + SERIES_HEADER + _extra_columns([r["row"] for r in results])
        rows = []
        for r, e, o in zip(results, errors, orders):
            row = dict(r["row"])
            row.update(param=s.param, value=r["value"], size=r["size"], error=e, order=o)
            rows.append(row)
        summary.update(errors=errors, orders=orders)
    elif s.target == "curvature":
        errors, unified = [], []
        for r in results:
            if r["ref"] is not None:
                errors.append(max(float(np.max(np.abs(b.ricci - a.ricci))) for b, a in zip(r["bundles"], r["ref"])))
            else:
                errors.append(max(float(np.max(np.abs(b.ricci - a.ricci)))
                                  for b, a in zip(r["bundles"], results[-1]["bundles"])))
            unified.append(r["rep"].linf("ricci"))
        orders = _orders(errors, [r["size"] for r in results])
        header = ["param", "value", "size", "error", "order", "res.ricci.linf", "res.scalar.linf", "res.riemann.linf"]
        rows = [
            {"param": "h", "value": r["value"], "size": r["size"], "error": e, "order": o,
             "res.ricci.linf": r["rep"].linf("ricci"), "res.scalar.linf": r["rep"].linf("scalar"),
             "res.riemann.linf": r["rep"].linf("riemann")}
            for r, e, o in zip(results, errors, orders)
        ]
        summary.update(errors=errors, orders=orders, unified_residuals=unified)
    else:
        names = list(dict.fromkeys(cfg.verify.equations))
        header = ["param", "value", "size", "snapshot_dt"]
        rows = [{"param": "N", "value": r["value"], "size": r["size"], "snapshot_dt": r["snapshot_dt"]} for r in results]
        orders_by = {}
        for name in names:
            errs = [r["rep"].linf(name) for r in results]
            ords = _orders(errs, [r["size"] for r in results])
            orders_by[name] = ords
            header += [f"res.{name}.linf", f"order.{name}"]
            for row, e, o in zip(rows, errs, ords):
                row[f"res.{name}.linf"], row[f"order.{name}"] = e, o
        summary.update(orders=orders_by)
    write_csv(out / (cfg.output.csv or "sweep.csv"), header, rows)
    summary["status"] = "ok"
    return Outcome(EXIT_OK, summary)


def _self_error(state: FlowState, ref: FlowState) -> float:
    """Max difference to a reference run on nested grids (coarse nodes ⊂ fine nodes)."""
    g, gr = state.grid, ref.grid
    if g.n_points == gr.n_points:
        return float(np.max(np.abs(state.lam - ref.lam)))
    if g.mode == "periodic":
        k, rem = divmod(gr.n_points, g.n_points)
    else:
        k, rem = divmod(gr.n_points - 1, g.n_points - 1)
    if rem or k < 1:
        raise ConfigError("grid sizes in an N sweep must nest (refine by integer factors)")
    return float(np.max(np.abs(state.lam - ref.lam[::k][: g.n_points])))


# -- entry point ----------------------------------------------------------------------------------

RUNNERS = {"curvature": run_curvature, "flow": run_flow, "verify": run_verify, "sweep": run_sweep}


def execute(mode: str, config_path, out_dir=".", quiet: bool = True) -> tuple:
    """Run one scenario; returns ``(exit_code, summary)``.  Never raises for
    expected failures; those map onto exit codes."""
    out = Path(out_dir)
    summary: dict = {"mode": mode}
    try:
        cfg = load_config(config_path)
        if cfg.mode != mode:
            raise ConfigError(f"config declares mode {cfg.mode!r} but the command is {mode!r}")
        out.mkdir(parents=True, exist_ok=True)
        outcome = RUNNERS[mode](cfg, out)
        code, summary = outcome.code, outcome.summary
    except ConfigError as exc:
        code, summary = EXIT_CONFIG, {"mode": mode, "status": "config-error", "message": str(exc)}
    except SingularityReached as exc:
        code, summary = EXIT_SINGULAR, {"mode": mode, "status": "singular", "message": str(exc)}
        if exc.state is not None:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "final_state.json", _state_dump(exc.state))
    except UnstableStep as exc:
        code, summary = EXIT_UNSTABLE, {"mode": mode, "status": "unstable", "message": str(exc)}
    except WarpflowError as exc:
        code, summary = EXIT_NUMERICAL, {"mode": mode, "status": "numerical-failure",
                                         "message": f"{type(exc).__name__}: {exc}"}
    summary["exit_code"] = code
    summary["version"] = __version__
    if out.is_dir():
        name = "summary.json"
        try:
            name = load_config(config_path).output.json
        except WarpflowError:
            pass
        write_json(out / name, summary)
    if not quiet:
        _print_summary(summary)
    return code, summary


def _print_summary(summary: dict) -> None:
    status = summary.get("status", "")
    print(f"[{summary['mode']}] {status} (exit {summary['exit_code']})")
    if "message" in summary:
        print(f"  {summary['message']}")
    for name, e in summary.get("equations", {}).items():
        mark = "PASS" if e["pass"] else "FAIL"
        print(f"  {mark} {name}: linf={e['linf']:.3e} l2={e['l2']:.3e} tol={e['tol']:.1e}")
    if "orders" in summary and isinstance(summary["orders"], list):
        print("  errors: " + ", ".join(f"{e:.3e}" for e in summary["errors"]))
        print("  orders: " + ", ".join("-" if o is None else f"{o:.2f}" for o in summary["orders"]))
    elif isinstance(summary.get("orders"), dict):
        for name, ords in summary["orders"].items():
            print(f"  {name} orders: " + ", ".join("-" if o is None else f"{o:.2f}" for o in ords))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="warpflow", description="Warped-product curvature and geometric flows.")
    parser.add_argument("mode", choices=sorted(RUNNERS))
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=".", help="output directory (default: current directory)")
    parser.add_argument("--quiet", action="store_true", help="do not print the summary")
    args = parser.parse_args(argv)
    code, _ = execute(args.mode, args.config, args.out, quiet=args.quiet)
    return code


if __name__ == "__main__":
    sys.exit(main())
