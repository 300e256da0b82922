"""Method-of-lines flows on rotationally symmetric warped products.

The metric is ḡ = μ(x,t)² dx² + λ(x,t)² g_fiber on an interval or circle in
``x``, with an Einstein fiber (Ric = c g_fiber; c = n-1 for the unit sphere).
Arc-length derivatives use ∂_s = μ⁻¹ ∂_x.

Flows are members of the family α ∂²ₜḡ + β ∂ₜḡ + γ ḡ + 2 Ric(ḡ) = 0, acting on
the two metric coefficients G = μ² and G = λ².  Ricci flow is (0, 1, 0) and the
hyperbolic geometric flow is (1, 0, 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .errors import InvalidCoefficients, MissingVelocities, SingularityReached, UnstableStep
from .report import ResidualReport

SIGMA_PARABOLIC = 0.2
SIGMA_HYPERBOLIC = 0.5


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FlowGrid:
    """Uniform grid on [lo, hi].

    ``neumann``: N nodes including both end points, Δx = L/(N-1), ghost nodes
    mirror the first interior node.  ``periodic``: N nodes, Δx = L/N, the point
    ``hi`` is identified with ``lo``.
    """

    n_points: int
    lo: float
    hi: float
    mode: str = "neumann"

    def __post_init__(self):
        if self.mode not in ("neumann", "periodic"):
            raise ValueError(f"unknown boundary mode {self.mode!r}")
        if self.n_points < 5:
            raise ValueError("grid needs at least 5 points")
        if not self.hi > self.lo:
            raise ValueError("grid needs hi > lo")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def dx(self) -> float:
        if self.mode == "periodic":
            return self.length / self.n_points
        return self.length / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.n_points)

    def _pad(self, u, width=1):
        if self.mode == "periodic":
            return np.concatenate((u[-width:], u, u[:width]))
        # even reflection about the end nodes
        return np.concatenate((u[width:0:-1], u, u[-2 : -2 - width : -1]))

    def d1(self, u, order: int = 2) -> np.ndarray:
        if order == 4:
            p = self._pad(np.asarray(u, dtype=float), 2)
            return (-p[4:] + 8.0 * p[3:-1] - 8.0 * p[1:-3] + p[:-4]) / (12.0 * self.dx)
        _check_order(order)
        p = self._pad(np.asarray(u, dtype=float))
        return (p[2:] - p[:-2]) / (2.0 * self.dx)

    def d2(self, u, order: int = 2) -> np.ndarray:
        if order == 4:
            p = self._pad(np.asarray(u, dtype=float), 2)
            return (-p[4:] + 16.0 * p[3:-1] - 30.0 * p[2:-2] + 16.0 * p[1:-3] - p[:-4]) / (12.0 * self.dx**2)
        _check_order(order)
        p = self._pad(np.asarray(u, dtype=float))
        return (p[2:] - 2.0 * p[1:-1] + p[:-2]) / self.dx**2

    def interior(self, margin: float = 0.0) -> np.ndarray:
        """Mask of nodes at least ``margin`` away from a Neumann boundary."""
        x = self.x
        if self.mode == "periodic" or margin <= 0:
            return np.ones(x.size, dtype=bool)
        return (x >= self.lo + margin - 1e-12) & (x <= self.hi - margin + 1e-12)


def _check_order(order):
    if order not in (2, 4):
        raise ValueError(f"spatial order must be 2 or 4, got {order}")


# -- base operators for the metric μ² dx² ---------------------------------------

def base_hessian(grid: FlowGrid, mu, u, order: int = 2) -> np.ndarray:
    """Hess(u)_xx = u_xx − (μ_x/μ) u_x."""
    return grid.d2(u, order) - grid.d1(mu, order) / mu * grid.d1(u, order)


def base_laplacian(grid: FlowGrid, mu, u, order: int = 2) -> np.ndarray:
    return base_hessian(grid, mu, u, order) / mu**2


def base_grad_sq(grid: FlowGrid, mu, u, order: int = 2) -> np.ndarray:
    return (grid.d1(u, order) / mu) ** 2


def base_inner(grid: FlowGrid, mu, u, v, order: int = 2) -> np.ndarray:
    return grid.d1(u, order) * grid.d1(v, order) / mu**2


def product_laplacian(grid: FlowGrid, mu, lam, n: int, u, order: int = 2) -> np.ndarray:
    """Laplacian of the warped product on functions of x alone."""
    return base_laplacian(grid, mu, u, order) + (n / lam) * base_inner(grid, mu, lam, u, order)


# -- state --------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowState:
    grid: FlowGrid
    mu: np.ndarray
    lam: np.ndarray
    mu_vel: Optional[np.ndarray] = None
    lam_vel: Optional[np.ndarray] = None
    t: float = 0.0
    coeffs: tuple = (0.0, 1.0, 0.0)
    n: int = 2
    fiber_einstein_c: Optional[float] = None
    lam_min: float = 1e-6
    K_max: float = 1e8

    def __post_init__(self):
        N = self.grid.n_points
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "lam", _frozen(self.lam))
        for name in ("mu", "lam"):
            if getattr(self, name).shape != (N,):
                raise ValueError(f"{name} must have shape ({N},)")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.n < 2:
            raise ValueError("fiber dimension n must be >= 2")
        if self.fiber_einstein_c is None:
            object.__setattr__(self, "fiber_einstein_c", float(self.n - 1))
        alpha = self.coeffs[0]
        has_vel = self.mu_vel is not None and self.lam_vel is not None
        if alpha != 0.0 and not has_vel:
            raise MissingVelocities("second-order flow (alpha != 0) needs mu_vel and lam_vel")
        if alpha == 0.0 and (self.mu_vel is not None or self.lam_vel is not None):
            raise ValueError("first-order flow (alpha == 0) takes no velocities")
        if has_vel:
            object.__setattr__(self, "mu_vel", _frozen(self.mu_vel))
            object.__setattr__(self, "lam_vel", _frozen(self.lam_vel))
        if np.any(self.mu <= 0):
            raise ValueError("mu must be positive")

    @property
    def second_order(self) -> bool:
        return self.coeffs[0] != 0.0

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


def _check_floor(state: FlowState):
    lam_lo = float(np.min(state.lam))
    if not lam_lo > state.lam_min:
        raise SingularityReached(
            f"warping function fell to {lam_lo:.3e} (floor {state.lam_min:g}) at t={state.t:.6g}", state
        )


def arc_derivatives(state: FlowState):
    """(λ_s, λ_ss) with λ_ss = (λ_xx μ − λ_x μ_x)/μ³."""
    g = state.grid
    lam_x = g.d1(state.lam)
    lam_s = lam_x / state.mu
    lam_ss = base_laplacian(g, state.mu, state.lam)
    return lam_s, lam_ss


def sectional_curvatures(state: FlowState):
    """K_rad = −λ_ss/λ and K_sph = (c/(n−1) − λ_s²)/λ²."""
    _check_floor(state)
    lam_s, lam_ss = arc_derivatives(state)
    lam = state.lam
    k_rad = -lam_ss / lam
    k_sph = (state.fiber_einstein_c / (state.n - 1) - lam_s**2) / lam**2
    worst = max(float(np.max(np.abs(k_rad))), float(np.max(np.abs(k_sph))))
    if not worst <= state.K_max:
        raise SingularityReached(f"curvature {worst:.3e} exceeds K_max at t={state.t:.6g}", state)
    return k_rad, k_sph


def ricci_components(state: FlowState):
    """Ricci coefficients (Ric_xx, Ric_sph) with Ric = Ric_xx dx² + Ric_sph g_fiber."""
    k_rad, k_sph = sectional_curvatures(state)
    n = state.n
    return n * k_rad * state.mu**2, (k_rad + (n - 1) * k_sph) * state.lam**2


def rf_rhs(state: FlowState):
    """(∂ₜμ, ∂ₜλ) under Ricci flow."""
    k_rad, k_sph = sectional_curvatures(state)
    n = state.n
    return -n * state.mu * k_rad, -state.lam * (k_rad + (n - 1) * k_sph)


def hgf_rhs(state: FlowState):
    """(∂²ₜμ, ∂²ₜλ) under the hyperbolic geometric flow."""
    if state.mu_vel is None or state.lam_vel is None:
        raise MissingVelocities("hyperbolic flow needs velocities")
    k_rad, k_sph = sectional_curvatures(state)
    n, mu, lam = state.n, state.mu, state.lam
    lam_tt = (-(lam**2) * (k_rad + (n - 1) * k_sph) - state.lam_vel**2) / lam
    mu_tt = (-n * mu**2 * k_rad - state.mu_vel**2) / mu
    return mu_tt, lam_tt


def unified_rhs(state: FlowState):
    """Highest time derivative of (μ, λ) under α G_tt + β G_t + γ G + 2 Ric_G = 0.

    Returns first derivatives when α = 0 and second derivatives otherwise.
    """
    alpha, beta, gamma = state.coeffs
    if alpha == 0.0 and beta == 0.0:
        raise InvalidCoefficients("alpha = beta = 0 is the static Einstein equation; use check_einstein")
    ric_x, ric_s = ricci_components(state)
    mu, lam = state.mu, state.lam
    if alpha == 0.0:
        mu_t = -(gamma * mu**2 + 2.0 * ric_x) / (2.0 * beta * mu)
        lam_t = -(gamma * lam**2 + 2.0 * ric_s) / (2.0 * beta * lam)
        return mu_t, lam_t
    mv, lv = state.mu_vel, state.lam_vel
    G_tt_mu = -(beta * 2.0 * mu * mv + gamma * mu**2 + 2.0 * ric_x) / alpha
    G_tt_lam = -(beta * 2.0 * lam * lv + gamma * lam**2 + 2.0 * ric_s) / alpha
    return (0.5 * G_tt_mu - mv**2) / mu, (0.5 * G_tt_lam - lv**2) / lam


def check_einstein(state: FlowState) -> ResidualReport:
    """γ ḡ + 2 Ric(ḡ) on both blocks, normalised by the metric coefficient."""
    gamma = state.coeffs[2]
    k_rad, k_sph = sectional_curvatures(state)
    n = state.n
    rep = ResidualReport(t=state.t)
    rep.add("einstein_base", gamma + 2.0 * n * k_rad)
    rep.add("einstein_fiber", gamma + 2.0 * (k_rad + (n - 1) * k_sph))
    return rep


# -- time stepping ------------------------------------------------------------------

def stable_dt(state: FlowState) -> float:
    dx = state.grid.dx
    mu_min = float(np.min(state.mu))
    alpha, beta, _ = state.coeffs
    if alpha != 0.0:
        return SIGMA_HYPERBOLIC * dx * mu_min
    return SIGMA_PARABOLIC * abs(beta) * dx**2 * mu_min**2


def _pack(state: FlowState) -> np.ndarray:
    if state.second_order:
        return np.concatenate([state.mu, state.lam, state.mu_vel, state.lam_vel])
    return np.concatenate([state.mu, state.lam])


def _unpack(state: FlowState, y: np.ndarray, t: float) -> FlowState:
    N = state.grid.n_points
    if not np.all(np.isfinite(y)):
        raise UnstableStep(f"non-finite values produced near t={t:.6g}", state)
    mu = y[:N]
    if np.any(mu <= 0):
        raise SingularityReached(f"base factor mu reached {mu.min():.3e} at t={t:.6g}", state)
    kw = dict(mu=mu, lam=y[N : 2 * N], t=t)
    if state.second_order:
        kw.update(mu_vel=y[2 * N : 3 * N], lam_vel=y[3 * N :])
    return replace(state, **kw)


def _derivative(state: FlowState) -> np.ndarray:
    a, b = unified_rhs(state)
    if state.second_order:
        return np.concatenate([state.mu_vel, state.lam_vel, a, b])
    return np.concatenate([a, b])


def step(state: FlowState, dt: float, scheme: str = "rk4", check_stability: bool = True) -> FlowState:
    """Advance one explicit step; HGF-type flows are stepped as first-order systems."""
    if scheme not in ("rk4", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if check_stability:
        bound = stable_dt(state)
        if dt > bound * (1 + 1e-12):
            raise UnstableStep(f"dt={dt:g} exceeds stability bound {bound:.3e}", state)
    try:
        return _advance(state, dt, scheme)
    except (SingularityReached, UnstableStep) as exc:
        # report the last complete state, not an intermediate stage
        raise type(exc)(str(exc), state) from None


def _advance(state: FlowState, dt: float, scheme: str) -> FlowState:
    y0 = _pack(state)
    k1 = _derivative(state)
    if scheme == "euler":
        return _checked(_unpack(state, y0 + dt * k1, state.t + dt))
    k2 = _derivative(_unpack(state, y0 + 0.5 * dt * k1, state.t + 0.5 * dt))
    k3 = _derivative(_unpack(state, y0 + 0.5 * dt * k2, state.t + 0.5 * dt))
    k4 = _derivative(_unpack(state, y0 + dt * k3, state.t + dt))
    y1 = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _checked(_unpack(state, y1, state.t + dt))


def _checked(state: FlowState) -> FlowState:
    _check_floor(state)
    return state


@dataclass
class RunResult:
    snapshots: List[FlowState]
    dt: float
    snapshot_dt: float
    status: str = "ok"
    error: Optional[Exception] = None

    @property
    def final(self) -> FlowState:
        return self.snapshots[-1]


def integrate(
    state: FlowState,
    t_end: float,
    dt: Optional[float] = None,
    snapshot_dt: Optional[float] = None,
    scheme: str = "rk4",
    on_snapshot: Optional[Callable[[FlowState], None]] = None,
    stop_on_singularity: bool = False,
) -> RunResult:
    """Integrate to ``t_end`` recording snapshots every ``snapshot_dt``.

    Without ``dt`` the sub-step is the largest stable step that divides the
    snapshot spacing evenly.  Times are accumulated as ``t0 + k*dt`` so
    snapshot times carry no drift.  On a singularity the run either re-raises
    (default, with ``.result`` attached) or returns with ``status="singular"``.
    """
    total = t_end - state.t
    if total < 0:
        raise ValueError("t_end lies before the initial time")
    if snapshot_dt is None:
        snapshot_dt = dt if dt is not None else total
    n_snap = max(1, round(total / snapshot_dt))
    if abs(n_snap * snapshot_dt - total) > 1e-9 * max(total, snapshot_dt):
        raise ValueError("t_end - t0 must be a multiple of snapshot_dt")
    sub = None
    if dt is not None:
        sub = max(1, round(snapshot_dt / dt))
        if abs(sub * dt - snapshot_dt) > 1e-9 * snapshot_dt:
            raise ValueError("snapshot_dt must be a multiple of dt")
    t0 = state.t
    snaps = [state]
    if on_snapshot:
        on_snapshot(state)
    result = RunResult(snaps, dt if dt is not None else float("nan"), snapshot_dt)
    cur = state
    try:
        for j in range(n_snap):
            if dt is None:
                # the bound tightens as μ shrinks, so re-pick the sub-step per interval
                m = max(1, math.ceil(snapshot_dt / (0.9 * stable_dt(cur))))
                h = snapshot_dt / m
                result.dt = h if math.isnan(result.dt) else min(result.dt, h)
            else:
                m, h = sub, dt
            t_start = t0 + j * snapshot_dt
            for k in range(1, m + 1):
                cur = step(cur, h, scheme)
                cur = replace(cur, t=t_start + k * h)
            cur = replace(cur, t=t0 + (j + 1) * snapshot_dt)
            snaps.append(cur)
            if on_snapshot:
                on_snapshot(cur)
    except SingularityReached as exc:
        result.status = "singular"
        result.error = exc
        if exc.state is not None and exc.state is not snaps[-1]:
            snaps.append(exc.state)
        if not stop_on_singularity:
            exc.result = result
            raise
    return result


# -- characterization residuals ----------------------------------------------------------

def _fiber_scalar(state: FlowState, fiber=None) -> float:
    if fiber is None:
        return state.n * state.fiber_einstein_c
    from .manifold import curvature_direct

    centre = np.array([(lo + hi) / 2 for lo, hi in zip(fiber.domain.lo, fiber.domain.hi)])
    return curvature_direct(fiber, centre).scalar


def check_rf_characterization(state: FlowState, dlam_dt=None, fiber=None) -> ResidualReport:
    """Residual of the scalar equation a warping function must satisfy for the
    product to move by Ricci flow, plus ‖Hess λ‖∞ which must vanish as well.

    ``dlam_dt`` defaults to the Ricci-flow velocity.  The fiber scalar curvature
    is n·c unless a fiber metric is passed, in which case it is evaluated at the
    centre of the fiber box (it must be constant for the equation to make sense).
    """
    if dlam_dt is None:
        dlam_dt = rf_rhs(state)[1]
    g, mu, lam = state.grid, state.mu, state.lam
    m1, m2 = 1, state.n
    scal2 = _fiber_scalar(state, fiber)
    lap = base_laplacian(g, mu, lam)
    res = (
        np.asarray(dlam_dt)
        - (1.0 + m2 / (m1 * lam**2)) * lap
        - ((m2 - 1) / lam) * base_grad_sq(g, mu, lam)
        - ((lam**2 - 1.0) / (m2 * lam)) * scal2
    )
    rep = ResidualReport(t=state.t)
    rep.add("rf_char", res)
    rep.add("rf_char_hess", base_hessian(g, mu, lam))
    return rep


def check_hgf_characterization(state: FlowState, fiber=None, lam_tt=None) -> ResidualReport:
    """Hyperbolic-flow analogue of :func:`check_rf_characterization`, with the
    fiber held fixed in time.  ``lam_tt`` defaults to the HGF acceleration."""
    if state.lam_vel is None:
        raise MissingVelocities("hyperbolic characterization needs λ_t")
    if lam_tt is None:
        lam_tt = hgf_rhs(state)[1]
    g, mu, lam = state.grid, state.mu, state.lam
    m2 = state.n
    scal2 = _fiber_scalar(state, fiber)
    lap = base_laplacian(g, mu, lam)
    lam2_tt = 2.0 * (lam * np.asarray(lam_tt) + state.lam_vel**2)
    res = (
        0.5 * m2 * lam2_tt
        - ((lam**2 + m2) * m2 / lam) * lap
        - m2 * (m2 - 1) * base_grad_sq(g, mu, lam)
        - (lam**2 - 1.0) * scal2
    )
    rep = ResidualReport(t=state.t)
    rep.add("hgf_char", res)
    rep.add("hgf_char_offdiag", m2 * lap / lam)
    return rep


# -- initial data --------------------------------------------------------------------

def initial_state(
    grid: FlowGrid,
    lam,
    mu=None,
    lam_vel=None,
    mu_vel=None,
    coeffs=(0.0, 1.0, 0.0),
    n: int = 2,
    fiber_einstein_c: Optional[float] = None,
    lam_min: float = 1e-6,
    K_max: float = 1e8,
) -> FlowState:
    """Build a state from callables of x (or constants / arrays)."""
    x = grid.x

    def ev(f, default=None):
        if f is None:
            return default
        if callable(f):
            return np.asarray(f(x), dtype=float) * np.ones_like(x)
        return np.asarray(f, dtype=float) * np.ones_like(x)

    second = float(coeffs[0]) != 0.0
    zeros = np.zeros_like(x)
    return FlowState(
        grid=grid,
        mu=ev(mu, np.ones_like(x)),
        lam=ev(lam),
        mu_vel=ev(mu_vel, zeros) if second else None,
        lam_vel=ev(lam_vel, zeros) if second else None,
        coeffs=tuple(coeffs),
        n=n,
        fiber_einstein_c=fiber_einstein_c,
        lam_min=lam_min,
        K_max=K_max,
    )
