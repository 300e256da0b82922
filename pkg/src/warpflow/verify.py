"""Along-flow checks of the metric, warping-function, Ricci and f evolution laws.

A trajectory is a uniformly spaced list of :class:`~warpflow.flow.FlowState`
snapshots of a rotationally symmetric product μ² dx² + λ² g_fiber.  Time
derivatives are finite differences across snapshots, spatial quantities come
from each snapshot with the grid operators of :mod:`warpflow.flow`.  A residual
is "LHS − RHS" of an evolution law, so it should shrink under refinement.

Ricci components are normalised as Ric̄ = a·μ²dx² + f·λ²g_fiber; ``a`` is the
radial Ricci eigenvalue and ``f`` the fiber one (the Einstein-fiber function).
Fiber-block residuals are reported in a g_fiber-orthonormal frame unless an
explicit fiber metric is supplied.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import InsufficientSnapshots, NotEinsteinFiber
from .flow import (
    FlowState,
    check_hgf_characterization,
    check_rf_characterization,
    base_grad_sq,
    base_hessian,
    base_laplacian,
    product_laplacian,
)
from .manifold import MetricField, curvature_direct
from .report import ResidualReport

TIME_SCHEMES = ("central", "central4")
# Spatial stencils used by the checks.  Fourth order keeps the checker's own
# truncation error well below that of the second-order flow being checked.
SPATIAL_ORDER = 4


@dataclass(frozen=True)
class FlowTrajectory:
    snapshots: tuple
    dt_snap: float

    def __init__(self, snapshots: Sequence[FlowState], dt_snap: Optional[float] = None):
        snaps = tuple(snapshots)
        if len(snaps) < 3:
            raise InsufficientSnapshots(f"need at least 3 snapshots, got {len(snaps)}")
        t = np.array([s.t for s in snaps])
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        h = float(steps.mean()) if dt_snap is None else float(dt_snap)
        if np.max(np.abs(steps - h)) > 1e-8 * h:
            raise ValueError("snapshots must be uniformly spaced")
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "dt_snap", h)

    def __len__(self):
        return len(self.snapshots)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @classmethod
    def from_run(cls, run) -> "FlowTrajectory":
        return cls(run.snapshots, run.snapshot_dt)


@dataclass(frozen=True)
class EinsteinFiberContext:
    """Fiber declared Einstein: Ric_fiber = c g_fiber."""

    c: float
    m2: int
    m1: int = 1
    f_field: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.m1 != 1:
            raise ValueError("flow trajectories have a one-dimensional base")
        if self.m2 < 2:
            raise ValueError("fiber dimension must be >= 2")

    @classmethod
    def from_state(cls, state: FlowState) -> "EinsteinFiberContext":
        return cls(state.fiber_einstein_c, state.n)

    def with_f(self, state: FlowState) -> "EinsteinFiberContext":
        closed, _ = compute_f(self, state)
        return EinsteinFiberContext(self.c, self.m2, self.m1, closed)


def _require_ctx(ctx):
    if ctx is None or getattr(ctx, "c", None) is None:
        raise NotEinsteinFiber("this check needs a fiber declared Einstein (Ric = c g)")
    return ctx


# -- time differences ------------------------------------------------------------------

def _stencil(scheme: str, order: int):
    if scheme == "central":
        return (1, np.array([-0.5, 0.0, 0.5])) if order == 1 else (1, np.array([1.0, -2.0, 1.0]))
    if scheme == "central4":
        if order == 1:
            return 2, np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
        return 2, np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    raise ValueError(f"unknown time scheme {scheme!r}; choose from {TIME_SCHEMES}")


def time_derivative(values: List[np.ndarray], dt: float, scheme: str = "central", order: int = 1):
    """Finite-difference ∂ₜ (order 1) or ∂ₜ² (order 2) at every snapshot where
    the stencil fits.  Returns ``(indices, derivatives)``."""
    half, w = _stencil(scheme, order)
    if len(values) < 2 * half + 1:
        raise InsufficientSnapshots(f"{scheme} differences need {2 * half + 1} snapshots, got {len(values)}")
    arr = np.asarray(values, dtype=float)
    idx = list(range(half, len(values) - half))
    out = [sum(w[j] * arr[k - half + j] for j in range(w.size)) / dt**order for k in idx]
    return idx, out


# -- per-snapshot geometry ---------------------------------------------------------------

@dataclass(frozen=True)
class SnapshotGeometry:
    """Spatial quantities of one snapshot on the base grid."""

    mu2: np.ndarray
    lam2: np.ndarray
    hess: np.ndarray        # Hess(λ)_xx
    lap: np.ndarray         # Δλ
    grad_sq: np.ndarray     # |grad λ|²
    lap_lam2: np.ndarray    # Δ(λ²), differenced directly
    a: np.ndarray           # radial Ricci eigenvalue, Ric̄_xx = a μ²
    f_trace: np.ndarray     # fiber Ricci eigenvalue from the Ricci formula
    h2: np.ndarray          # |grad λ|² / λ²


def snapshot_geometry(state: FlowState, c: Optional[float] = None, order: int = SPATIAL_ORDER) -> SnapshotGeometry:
    g, mu, lam, n = state.grid, state.mu, state.lam, state.n
    c = state.fiber_einstein_c if c is None else c
    hess = base_hessian(g, mu, lam, order)
    lap = hess / mu**2
    grad_sq = base_grad_sq(g, mu, lam, order)
    lam2 = lam**2
    a = -(n / lam) * hess / mu**2
    f_trace = (c - lam * lap - (n - 1) * grad_sq) / lam2
    return SnapshotGeometry(mu**2, lam2, hess, lap, grad_sq, base_laplacian(g, mu, lam2, order), a, f_trace, grad_sq / lam2)


def rough_laplacian_split(state: FlowState, a, b, order: int = SPATIAL_ORDER):
    """Rough Laplacian of a·μ²dx² + b·λ²g_fiber, returned as its two eigenvalues.

    Besides the function Laplacian of the coefficients, the warping rotates the
    radial and fiber directions into each other, which couples the two blocks
    through (a − b)|grad λ|²/λ².
    """
    g, mu, lam, n = state.grid, state.mu, state.lam, state.n
    h2 = base_grad_sq(g, mu, lam, order) / lam**2
    lap_a = product_laplacian(g, mu, lam, n, a, order)
    lap_b = product_laplacian(g, mu, lam, n, b, order)
    return lap_a - 2.0 * n * h2 * (a - b), lap_b + 2.0 * h2 * (a - b)


# -- fiber data ----------------------------------------------------------------------------

def fiber_frame(n: int, c: float, fiber: Optional[MetricField] = None, point=None):
    """(g2, Ric2, Rm2) at one fiber point.

    Without an explicit metric, an orthonormal frame of a constant-curvature
    fiber with Ric = c g is used.  Rm2[w, z, x, y] = Rm(∂_w, ∂_z, ∂_x, ∂_y).
    """
    if fiber is not None:
        if point is None:
            point = np.array([(lo + hi) / 2 for lo, hi in zip(fiber.domain.lo, fiber.domain.hi)])
        cb = curvature_direct(fiber, point)
        return cb.metric, cb.ricci, cb.riemann04
    g2 = np.eye(n)
    k = c / (n - 1)
    rm2 = k * (np.einsum("yz,wx->wzxy", g2, g2) - np.einsum("xz,wy->wzxy", g2, g2))
    return g2, c * g2, rm2


# -- checks ---------------------------------------------------------------------------------

def _times(snaps, idx):
    return [snaps[k].t for k in idx]


def _mask(traj: FlowTrajectory, margin: float):
    return traj.snapshots[0].grid.interior(margin)


def verify_metric_evolution(
    traj: FlowTrajectory,
    fiber: Optional[MetricField] = None,
    scheme: str = "central",
    margin: float = 0.0,
    spatial_order: int = SPATIAL_ORDER,
    flow: str = "rf",
) -> ResidualReport:
    """Base and fiber blocks of the metric evolution.

    ``flow="rf"``: ∂ₜμ² − (2n/λ)Hess λ, and the fiber block
    ∂ₜ(λ²g2) + 2Ric2 − (Δλ² + (2n−4)|grad λ|²)g2.
    ``flow="hgf"``: the base block with ∂ₜ² (fiber held fixed).
    """
    snaps = traj.snapshots
    s0 = snaps[0]
    n, c = s0.n, s0.fiber_einstein_c
    geo = [snapshot_geometry(s, None, spatial_order) for s in snaps]
    mask = _mask(traj, margin)
    rep = ResidualReport(t=snaps[-1].t)
    order = 2 if flow == "hgf" else 1
    idx, d_mu2 = time_derivative([q.mu2 for q in geo], traj.dt_snap, scheme, order)
    base = [d - (2.0 * n / snaps[k].lam) * geo[k].hess for k, d in zip(idx, d_mu2)]
    rep.add("metric_base_hgf" if flow == "hgf" else "metric_base", np.concatenate([b[mask] for b in base]), _times(snaps, idx))
    if flow == "hgf":
        return rep
    g2, ric2, _ = fiber_frame(n, c, fiber)
    idx, d_lam2 = time_derivative([q.lam2 for q in geo], traj.dt_snap, scheme, 1)
    pieces = []
    for k, d in zip(idx, d_lam2):
        q = geo[k]
        coef = d - (q.lap_lam2 + (2 * n - 4) * q.grad_sq)
        mat = coef[:, None, None] * g2[None] + 2.0 * ric2[None]
        pieces.append(mat[mask].ravel())
    rep.add("metric_fiber", np.concatenate(pieces), _times(snaps, idx))
    return rep


def verify_warp_evolution(
    traj: FlowTrajectory,
    ctx: EinsteinFiberContext,
    scheme: str = "central",
    margin: float = 0.0,
    spatial_order: int = SPATIAL_ORDER,
    flow: str = "rf",
) -> ResidualReport:
    """∂ₜλ² (or ∂ₜ²λ² for the hyperbolic flow) + 2c − Δλ² − (2n−4)|grad λ|²."""
    ctx = _require_ctx(ctx)
    n = ctx.m2
    geo = [snapshot_geometry(s, ctx.c, spatial_order) for s in traj.snapshots]
    order = 2 if flow == "hgf" else 1
    idx, d = time_derivative([q.lam2 for q in geo], traj.dt_snap, scheme, order)
    mask = _mask(traj, margin)
    res = [dk + 2.0 * ctx.c - geo[k].lap_lam2 - (2 * n - 4) * geo[k].grad_sq for k, dk in zip(idx, d)]
    rep = ResidualReport(t=traj.snapshots[-1].t)
    rep.add("warp_hgf" if flow == "hgf" else "warp_rf", np.concatenate([r[mask] for r in res]), _times(traj.snapshots, idx))
    return rep


# Right-hand sides of the Ricci evolution with base indices kept explicit.  With a
# one-dimensional base every (…, 1, 1) array collapses to the x component; the
# collapsed versions below spell that out term by term.

def ricci_base_rhs(gbar_inv, ric, ric_base, lap_ric, fiber_trace, m2):
    """Δ̄Ric̄_ij + (2/m2) ḡ^{αβ}Ric̄_αβ (Ric̄_ij − Ric1_ij) − 2 ḡ^{kl}Ric̄_ik Ric̄_jl."""
    return (
        lap_ric
        + (2.0 / m2) * fiber_trace[:, None, None] * (ric - ric_base)
        - 2.0 * np.einsum("pkl,pik,pjl->pij", gbar_inv, ric, ric)
    )


def ricci_fiber_rhs(gbar_inv, ric, ric_base, lap_ric_fib, ric_fib, gbar_fib, m2):
    """Δ̄Ric̄_αβ − (2/m2) ḡ^{kp}(Ric̄ − Ric1)_kp Ric̄_αβ
    + (2/m2) ḡ^{kl}ḡ^{pq}(Ric̄ − Ric1)_kp Ric̄_lq ḡ_αβ, with fiber tensors as
    scalar multiples of one fiber frame."""
    diff = ric - ric_base
    tr1 = np.einsum("pkq,pkq->p", gbar_inv, diff)
    tr2 = np.einsum("pkl,pmq,pkm,plq->p", gbar_inv, gbar_inv, diff, ric)
    return lap_ric_fib - (2.0 / m2) * tr1 * ric_fib + (2.0 / m2) * tr2 * gbar_fib


def f_rhs(gbar_inv, ric, ric_base, lap_f, f, m2):
    """Δ̄f + 2f² − (2/m2) ḡ^{kp}(Ric̄ − Ric1)_kp f + (2/m2) ḡ^{kl}ḡ^{pq}(Ric̄ − Ric1)_kp Ric̄_lq."""
    diff = ric - ric_base
    tr1 = np.einsum("pkq,pkq->p", gbar_inv, diff)
    tr2 = np.einsum("pkl,pmq,pkm,plq->p", gbar_inv, gbar_inv, diff, ric)
    return lap_f + 2.0 * f**2 - (2.0 / m2) * tr1 * f + (2.0 / m2) * tr2


# The collapsed forms group products exactly as the einsum contractions above
# multiply their operands (left to right), so both paths round identically.

def ricci_base_rhs_1d(gxx_inv, ric_xx, lap_ric_xx, fiber_trace, m2):
    """Δ̄Ric̄_xx + (2/m2) ḡ^{αβ}Ric̄_αβ Ric̄_xx − 2 ḡ^{xx} Ric̄_xx²."""
    return lap_ric_xx + (2.0 / m2) * fiber_trace * ric_xx - 2.0 * (gxx_inv * ric_xx * ric_xx)


def ricci_fiber_rhs_1d(gxx_inv, ric_xx, lap_ric_fib, ric_fib, gbar_fib, m2):
    """Δ̄Ric̄_αβ − (2/m2) ḡ^{xx}Ric̄_xx Ric̄_αβ + (2/m2) (ḡ^{xx})² Ric̄_xx² ḡ_αβ."""
    tr1 = gxx_inv * ric_xx
    tr2 = gxx_inv * gxx_inv * ric_xx * ric_xx
    return lap_ric_fib - (2.0 / m2) * tr1 * ric_fib + (2.0 / m2) * tr2 * gbar_fib


def f_rhs_1d(gxx_inv, ric_xx, lap_f, f, m2):
    """Δ̄f + 2f² − (2/m2) ḡ^{xx}Ric̄_xx f + (2/m2) (ḡ^{xx})² Ric̄_xx²."""
    tr1 = gxx_inv * ric_xx
    tr2 = gxx_inv * gxx_inv * ric_xx * ric_xx
    return lap_f + 2.0 * f**2 - (2.0 / m2) * tr1 * f + (2.0 / m2) * tr2


def _as_base_tensor(v):
    return np.asarray(v, dtype=float)[:, None, None]


def verify_ricci_evolution(
    traj: FlowTrajectory,
    ctx: Optional[EinsteinFiberContext] = None,
    fiber: Optional[MetricField] = None,
    scheme: str = "central",
    margin: float = 0.0,
    spatial_order: int = SPATIAL_ORDER,
    collapsed: bool = False,
) -> ResidualReport:
    """Ricci evolution under Ricci flow.

    Always reports ``ricci_base`` (radial block) and ``ricci_fiber`` (fiber
    block with fiber curvature, taken from ``fiber`` or a constant-curvature
    frame).  With an Einstein context also ``ricci_fiber_einstein``, the form
    that eliminates the fiber curvature through f.  ``collapsed=True`` uses the
    one-dimensional-base formulas instead of the index-general ones.
    """
    snaps = traj.snapshots
    s0 = snaps[0]
    n = s0.n
    c = ctx.c if ctx is not None else s0.fiber_einstein_c
    g2, ric2, rm2 = fiber_frame(n, c, fiber)
    geo = [snapshot_geometry(s, c, spatial_order) for s in snaps]
    mask = _mask(traj, margin)
    dt = traj.dt_snap

    idx, d_ricxx = time_derivative([q.a * q.mu2 for q in geo], dt, scheme)
    _, d_ricfib = time_derivative([q.f_trace * q.lam2 for q in geo], dt, scheme)
    base_res, fib_res, fibE_res = [], [], []
    for j, k in enumerate(idx):
        s, q = snaps[k], geo[k]
        lap_a, lap_f = rough_laplacian_split(s, q.a, q.f_trace, spatial_order)
        ric_xx = q.a * q.mu2
        lap_ric_xx = lap_a * q.mu2
        ric_fib = q.f_trace * q.lam2          # coefficient of g2
        lap_ric_fib = lap_f * q.lam2
        gxx_inv = 1.0 / q.mu2
        trace_fib = n * q.f_trace             # ḡ^{αβ}Ric̄_αβ
        if collapsed:
            rb = ricci_base_rhs_1d(gxx_inv, ric_xx, lap_ric_xx, trace_fib, n)
            rfE = ricci_fiber_rhs_1d(gxx_inv, ric_xx, lap_ric_fib, ric_fib, q.lam2, n)
        else:
            gi, R, R1 = _as_base_tensor(gxx_inv), _as_base_tensor(ric_xx), np.zeros((ric_xx.size, 1, 1))
            rb = ricci_base_rhs(gi, R, R1, _as_base_tensor(lap_ric_xx), trace_fib, n)[:, 0, 0]
            rfE = ricci_fiber_rhs(gi, R, R1, lap_ric_fib, ric_fib, q.lam2, n)
        base_res.append((d_ricxx[j] - rb)[mask])
        fibE_res.append((d_ricfib[j] - rfE)[mask])

        # fiber block with fiber curvature kept explicit, as matrices in the frame g2
        lam2 = q.lam2
        g2inv = np.linalg.inv(g2)
        ric_ab = ric2[None] - (s.lam * q.lap + (n - 1) * q.grad_sq)[:, None, None] * g2[None]
        gbar_inv = g2inv[None] / lam2[:, None, None]
        gbar_ab = lam2[:, None, None] * g2[None]
        rough = lap_ric_fib[:, None, None] * g2[None]
        t_base = (2.0 / n) * (ric_xx**2 / q.mu2**2)[:, None, None] * gbar_ab
        t_sq = -2.0 * np.einsum("pgd,pga,pdb->pab", gbar_inv, ric_ab, ric_ab)
        curv = rm2[None] + q.grad_sq[:, None, None, None, None] * (
            np.einsum("as,bg->agbs", g2, g2) - np.einsum("ab,gs->agbs", g2, g2)
        )[None]
        # Rm2 index order (α, γ, β, σ) matches rm2[w, z, x, y] with w=α, z=γ, x=β, y=σ
        t_curv = 2.0 * lam2[:, None, None] * np.einsum("pgd,pst,pdt,pagbs->pab", gbar_inv, gbar_inv, ric_ab, curv)
        rhs = rough + t_base + t_sq + t_curv
        lhs = d_ricfib[j][:, None, None] * g2[None]
        fib_res.append((lhs - rhs)[mask].ravel())

    rep = ResidualReport(t=snaps[-1].t)
    rep.add("ricci_base", np.concatenate(base_res), _times(snaps, idx))
    rep.add("ricci_fiber", np.concatenate(fib_res), _times(snaps, idx))
    if ctx is not None:
        rep.add("ricci_fiber_einstein", np.concatenate(fibE_res), _times(snaps, idx))
    return rep


def compute_f(ctx: EinsteinFiberContext, state: FlowState, order: int = SPATIAL_ORDER):
    """(closed form, trace form) of the fiber Ricci eigenvalue f on the grid.

    Closed form: ((4 − 2n)|grad λ|² − Δλ² + 2c) / (2λ²) with Δλ² differenced
    directly; trace form: (1/n) ḡ^{αβ}Ric̄_αβ with Ric̄ from the warped Ricci
    formula.
    """
    ctx = _require_ctx(ctx)
    n = ctx.m2
    q = snapshot_geometry(state, ctx.c, order)
    closed = ((4 - 2 * n) * q.grad_sq - q.lap_lam2 + 2.0 * ctx.c) / (2.0 * q.lam2)
    return closed, q.f_trace


def verify_f_consistency(ctx: EinsteinFiberContext, state: FlowState, margin: float = 0.0) -> ResidualReport:
    closed, trace = compute_f(ctx, state)
    mask = state.grid.interior(margin)
    rep = ResidualReport(t=state.t)
    rep.add("f_consistency", (closed - trace)[mask])
    return rep


def verify_proportionality(
    ctx: EinsteinFiberContext, state: FlowState, fiber: Optional[MetricField] = None, margin: float = 0.0
) -> ResidualReport:
    """‖Ric̄_αβ − f ḡ_αβ‖ with Ric̄_αβ from the warped Ricci formula (fiber
    Ricci from ``fiber`` when given) and f in closed form."""
    ctx = _require_ctx(ctx)
    n = ctx.m2
    g2, ric2, _ = fiber_frame(n, ctx.c, fiber)
    q = snapshot_geometry(state, ctx.c)
    closed, _ = compute_f(ctx, state)
    ric_ab = ric2[None] - (state.lam * q.lap + (n - 1) * q.grad_sq)[:, None, None] * g2[None]
    res = ric_ab - (closed * q.lam2)[:, None, None] * g2[None]
    mask = state.grid.interior(margin)
    rep = ResidualReport(t=state.t)
    rep.add("f_proportionality", res[mask].ravel())
    return rep


def verify_f_evolution(
    traj: FlowTrajectory,
    ctx: EinsteinFiberContext,
    scheme: str = "central",
    margin: float = 0.0,
    spatial_order: int = SPATIAL_ORDER,
    collapsed: bool = False,
) -> ResidualReport:
    """``f_evolution``: ∂ₜf − (Δ̄f + 2f² − …), obtained by taking the fiber trace
    through the rough Laplacian as if the fiber projector were parallel.

    ``f_evolution_complete`` adds the radial/fiber coupling of the rough
    Laplacian, 2|grad λ|²/λ² (a − f), which that shortcut drops.
    The two agree whenever λ is spatially constant or the product is Einstein.
    """
    ctx = _require_ctx(ctx)
    n = ctx.m2
    snaps = traj.snapshots
    geo = [snapshot_geometry(s, ctx.c, spatial_order) for s in snaps]
    fs = [compute_f(ctx, s, spatial_order)[0] for s in snaps]
    idx, d_f = time_derivative(fs, traj.dt_snap, scheme)
    mask = _mask(traj, margin)
    uncoupled, complete = [], []
    for j, k in enumerate(idx):
        s, q, f = snaps[k], geo[k], fs[k]
        lap_f = product_laplacian(s.grid, s.mu, s.lam, n, f, spatial_order)
        ric_xx = q.a * q.mu2
        gxx_inv = 1.0 / q.mu2
        if collapsed:
            rhs = f_rhs_1d(gxx_inv, ric_xx, lap_f, f, n)
        else:
            rhs = f_rhs(_as_base_tensor(gxx_inv), _as_base_tensor(ric_xx), np.zeros((f.size, 1, 1)), lap_f, f, n)
        res = d_f[j] - rhs
        uncoupled.append(res[mask])
        complete.append((res - 2.0 * q.h2 * (q.a - f))[mask])
    rep = ResidualReport(t=snaps[-1].t)
    rep.add("f_evolution", np.concatenate(uncoupled), _times(snaps, idx))
    rep.add("f_evolution_complete", np.concatenate(complete), _times(snaps, idx))
    return rep


def verify_characterization(
    traj: FlowTrajectory,
    flow: str = "rf",
    fiber: Optional[MetricField] = None,
    scheme: str = "central",
    margin: float = 0.0,
) -> ResidualReport:
    """Warping-function characterization residuals along a trajectory, with
    ∂ₜλ (or ∂ₜ²λ) differenced across snapshots instead of taken from the flow."""
    snaps = traj.snapshots
    mask = _mask(traj, margin)
    if flow == "hgf":
        idx, d2 = time_derivative([s.lam for s in snaps], traj.dt_snap, scheme, 2)
        _, d1 = time_derivative([s.lam for s in snaps], traj.dt_snap, scheme, 1)
        names = ("hgf_char", "hgf_char_offdiag")
        reps = [
            check_hgf_characterization(replace(snaps[k], lam_vel=v, mu_vel=np.zeros_like(v), coeffs=(1.0, 0.0, 0.0)), fiber, lam_tt=a)
            for k, v, a in zip(idx, d1, d2)
        ]
    else:
        idx, d1 = time_derivative([s.lam for s in snaps], traj.dt_snap, scheme, 1)
        names = ("rf_char", "rf_char_hess")
        reps = [check_rf_characterization(snaps[k], v, fiber) for k, v in zip(idx, d1)]
    out = ResidualReport(t=snaps[-1].t)
    for name in names:
        out.add(name, np.concatenate([r.fields[name][mask] for r in reps]), _times(snaps, idx))
    return out
