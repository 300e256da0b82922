"""Warped products M1 ×_λ M2 with metric g1 ⊕ λ² g2.

The unified formulas evaluate the connection, (0,4) curvature, Ricci tensor and
scalar curvature of the product from base quantities (Hess λ, Δλ, |grad λ|²
taken with respect to g1) and fiber curvature.  :func:`oracle_compare` checks
them against brute-force curvature of the assembled product metric.

Vectors on the product are :class:`LiftVector` pairs ``(X1, X2)``; product
coordinates are ordered base first, then fiber.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidSpec, SingularMetric
from .manifold import (
    CurvatureBundle,
    MetricField,
    ScalarField,
    _fd_jet,
    christoffel,
    curvature_direct,
    hessian,
)
from .report import ResidualReport


@dataclass(frozen=True)
class WarpedProductSpec:
    base: MetricField
    fiber: MetricField
    warp: ScalarField
    einstein_c: Optional[float] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.fiber.dim < 2:
            raise InvalidSpec(
                f"fiber dimension m2={self.fiber.dim} not allowed: the unified warped-product "
                "curvature formulas require m2 >= 2"
            )
        if self.warp.domain.dim != self.base.dim:
            raise InvalidSpec("warping function must live on the base")

    @property
    def m1(self) -> int:
        return self.base.dim

    @property
    def m2(self) -> int:
        return self.fiber.dim

    @property
    def dim(self) -> int:
        return self.m1 + self.m2

    def split(self, point) -> tuple:
        p = np.asarray(point, dtype=float)
        if p.size != self.dim:
            raise ValueError(f"point has {p.size} coordinates, expected {self.dim}")
        return p[: self.m1], p[self.m1 :]

    def scaled(self, c: float) -> "WarpedProductSpec":
        """Same product metric with (λ, g2) replaced by (λ/c, c² g2)."""
        fiber, warp = self.fiber, self.warp
        scaled_fiber = MetricField(
            fiber.dim,
            fiber.domain,
            lambda y: c * c * fiber(y),
            None
            if fiber.analytic_derivs is None
            else (lambda y: tuple(c * c * np.asarray(a) for a in fiber.analytic_derivs(y))),
            name=f"{c:g}^2*{fiber.name}",
        )
        scaled_warp = ScalarField(
            warp.domain,
            lambda x: warp.eval(x) / c,
            None if warp.gradient is None else (lambda x: np.asarray(warp.gradient(x)) / c),
            None if warp.partial_hessian is None else (lambda x: np.asarray(warp.partial_hessian(x)) / c),
            name=f"({warp.name})/{c:g}",
        )
        # Ric(c² g2) = Ric(g2), so relative to the new fiber metric the constant is c_E / c²
        einstein = None if self.einstein_c is None else self.einstein_c / (c * c)
        return WarpedProductSpec(self.base, scaled_fiber, scaled_warp, einstein, name=f"{self.name}*{c:g}")


@dataclass(frozen=True)
class LiftVector:
    base_part: np.ndarray
    fiber_part: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_part", np.asarray(self.base_part, dtype=float))
        object.__setattr__(self, "fiber_part", np.asarray(self.fiber_part, dtype=float))

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.base_part, self.fiber_part])

    @classmethod
    def from_full(cls, v, m1: int) -> "LiftVector":
        v = np.asarray(v, dtype=float)
        return cls(v[:m1], v[m1:])


LiftField = Union[LiftVector, Callable[[np.ndarray], LiftVector]]


# -- assembled metric ----------------------------------------------------------

def product_metric(wp: WarpedProductSpec) -> MetricField:
    """ḡ = g1(x) ⊕ λ(x)² g2(y) as a metric on the product coordinate box."""
    m1, m2, d = wp.m1, wp.m2, wp.dim
    base, fiber, warp = wp.base, wp.fiber, wp.warp

    def components(p):
        x, y = p[:m1], p[m1:]
        g = np.zeros((d, d))
        g[:m1, :m1] = base(x)
        g[m1:, m1:] = warp(x) ** 2 * fiber(y)
        return g

    derivs = None
    if base.analytic_derivs is not None and fiber.analytic_derivs is not None and warp.has_analytic_derivs:

        def derivs(p):
            x, y = p[:m1], p[m1:]
            _, dg1, ddg1 = base.jet(x)
            g2, dg2, ddg2 = fiber.jet(y)
            lam, dlam, ddlam = warp.jet(x)
            dl2 = 2.0 * lam * dlam
            ddl2 = 2.0 * (np.outer(dlam, dlam) + lam * ddlam)
            dg = np.zeros((d, d, d))
            ddg = np.zeros((d, d, d, d))
            dg[:m1, :m1, :m1] = dg1
            dg[:m1, m1:, m1:] = np.einsum("k,ab->kab", dl2, g2)
            dg[m1:, m1:, m1:] = lam**2 * dg2
            ddg[:m1, :m1, :m1, :m1] = ddg1
            ddg[:m1, :m1, m1:, m1:] = np.einsum("kl,ab->klab", ddl2, g2)
            mixed = np.einsum("k,lab->klab", dl2, dg2)
            ddg[:m1, m1:, m1:, m1:] = mixed
            ddg[m1:, :m1, m1:, m1:] = mixed.transpose(1, 0, 2, 3)
            ddg[m1:, m1:, m1:, m1:] = lam**2 * ddg2
            return dg, ddg

    return MetricField(d, base.domain.product(fiber.domain), components, derivs, name=f"warped({wp.name})")


# -- base and fiber ingredients ------------------------------------------------

@dataclass(frozen=True)
class _Ingredients:
    lam: float
    dlam: np.ndarray        # ∂_i λ
    hess: np.ndarray        # covariant Hess(λ) on (M1, g1)
    lap: float              # Δ_{M1} λ
    grad_sq: float          # |grad λ|²_{g1}
    base: CurvatureBundle
    g2: np.ndarray
    fiber_ricci: np.ndarray
    fiber_rm: np.ndarray
    fiber_scalar: float


def _ingredients(wp: WarpedProductSpec, point, h: Optional[float]) -> _Ingredients:
    x, y = wp.split(point)
    lam, dlam, _ = wp.warp.jet(x, h)
    if not lam > 0.0:
        raise SingularMetric(f"warping function must be positive, got λ={lam:g} at x={x}")
    base = curvature_direct(wp.base, x, h)
    hess = hessian(wp.warp, wp.base, x, h)
    lap = float(np.einsum("ij,ij->", base.metric_inv, hess))
    grad_sq = float(dlam @ base.metric_inv @ dlam)
    fib = curvature_direct(wp.fiber, y, h)
    if wp.einstein_c is not None:
        fric = wp.einstein_c * fib.metric
        fscal = wp.einstein_c * wp.m2
    else:
        fric, fscal = fib.ricci, fib.scalar
    return _Ingredients(lam, dlam, hess, lap, grad_sq, base, fib.metric, fric, fib.riemann04, fscal)


def _embed(wp, base_block=None, fiber_block=None):
    m1, d = wp.m1, wp.dim
    out = np.zeros((d, d))
    if base_block is not None:
        out[:m1, :m1] = base_block
    if fiber_block is not None:
        out[m1:, m1:] = fiber_block
    return out


# -- unified formulas ------------------------------------------------------------

def _as_field(v: LiftField) -> Callable[[np.ndarray], LiftVector]:
    if isinstance(v, LiftVector):
        return lambda p: v
    return v


def warped_connection(wp: WarpedProductSpec, X: LiftField, Y: LiftField, point, h: Optional[float] = None) -> LiftVector:
    """∇̄_X Y from the product connection plus the warping corrections.

    ``X`` and ``Y`` may be constant :class:`LiftVector` s (coordinate lifts) or
    callables ``point -> LiftVector``; the directional derivative X(Y) of a
    callable field is taken by central differences.
    """
    m1 = wp.m1
    p = np.asarray(point, dtype=float)
    x, y = wp.split(p)
    Xf, Yf = _as_field(X), _as_field(Y)
    Xv, Yv = Xf(p), Yf(p)
    X1, X2, Y1, Y2 = Xv.base_part, Xv.fiber_part, Yv.base_part, Yv.fiber_part

    gam1 = christoffel(wp.base, x, h)
    gam2 = christoffel(wp.fiber, y, h)
    if isinstance(Y, LiftVector):
        dY = np.zeros(wp.dim)
    else:
        step = h if h is not None else wp.base.domain.default_step()
        _, jac, _ = _fd_jet(lambda q: Yf(q).full, p, step)
        dY = Xv.full @ jac
    base_part = dY[:m1] + np.einsum("kij,i,j->k", gam1, X1, Y1)
    fiber_part = dY[m1:] + np.einsum("kij,i,j->k", gam2, X2, Y2)

    lam, dlam, _ = wp.warp.jet(x, h)
    if not lam > 0.0:
        raise SingularMetric(f"warping function must be positive, got λ={lam:g}")
    g1 = wp.base(x)
    g2 = wp.fiber(y)
    dl2 = 2.0 * lam * dlam                      # d(λ²)
    grad_l2 = np.linalg.solve(g1, dl2)          # grad_{g1} λ²
    inv2 = 1.0 / (2.0 * lam**2)
    base_part = base_part - 0.5 * (X2 @ g2 @ Y2) * grad_l2
    fiber_part = fiber_part + inv2 * (X1 @ dl2) * Y2 + inv2 * (Y1 @ dl2) * X2
    return LiftVector(base_part, fiber_part)


def riemann_unified_tensor(wp: WarpedProductSpec, point, h: Optional[float] = None) -> np.ndarray:
    """Full (0,4) tensor Rm̄[w, z, x, y] = Rm̄(∂_w, ∂_z, ∂_x, ∂_y) on coordinate lifts."""
    q = _ingredients(wp, point, h)
    m1, d = wp.m1, wp.dim
    rm = np.zeros((d, d, d, d))
    rm[:m1, :m1, :m1, :m1] = q.base.riemann04
    rm[m1:, m1:, m1:, m1:] = q.lam**2 * q.fiber_rm
    H = _embed(wp, base_block=q.hess)
    G2 = _embed(wp, fiber_block=q.g2)
    lam = q.lam
    # indices: w z x y
    rm += lam * np.einsum("yw,xz->wzxy", H, G2)
    rm -= lam * np.einsum("xw,yz->wzxy", H, G2)
    rm += lam * np.einsum("xz,wy->wzxy", H, G2)
    rm -= lam * np.einsum("yz,wx->wzxy", H, G2)
    rm += lam**2 * q.grad_sq * (np.einsum("xz,wy->wzxy", G2, G2) - np.einsum("yz,wx->wzxy", G2, G2))
    return rm


def riemann_unified(wp, W: LiftVector, Z: LiftVector, X: LiftVector, Y: LiftVector, point, h=None) -> float:
    rm = riemann_unified_tensor(wp, point, h)
    return float(np.einsum("wzxy,w,z,x,y->", rm, W.full, Z.full, X.full, Y.full))


def ricci_unified_tensor(wp: WarpedProductSpec, point, h: Optional[float] = None) -> np.ndarray:
    """Ric̄ on coordinate lifts as a (m1+m2)² matrix."""
    q = _ingredients(wp, point, h)
    return _ricci_from(wp, q)


def _ricci_from(wp, q: _Ingredients) -> np.ndarray:
    m2 = wp.m2
    base_block = q.base.ricci - (m2 / q.lam) * q.hess
    fiber_block = q.fiber_ricci - (q.lam * q.lap + (m2 - 1) * q.grad_sq) * q.g2
    return _embed(wp, base_block, fiber_block)


def ricci_unified(wp, X: LiftVector, Y: LiftVector, point, h=None) -> float:
    return float(X.full @ ricci_unified_tensor(wp, point, h) @ Y.full)


def scalar_unified(wp: WarpedProductSpec, point, h: Optional[float] = None) -> float:
    q = _ingredients(wp, point, h)
    m2, lam = wp.m2, q.lam
    return (
        q.base.scalar
        + q.fiber_scalar / lam**2
        - (2.0 * m2 / lam) * q.lap
        - (m2 * (m2 - 1) / lam**2) * q.grad_sq
    )


# -- cross-validation ------------------------------------------------------------

def oracle_compare(wp: WarpedProductSpec, sample_points: Sequence, h: Optional[float] = None) -> ResidualReport:
    """Unified vs brute-force curvature of :func:`product_metric` over ``sample_points``.

    The oracle uses the product metric's analytic 2-jet when every factor has
    one, otherwise central differences with step ``h``.
    """
    metric = product_metric(wp)
    m1 = wp.m1
    diffs = {"ricci": [], "scalar": [], "riemann": [], "cross_ricci": []}
    oracle_scalars = []
    for p in sample_points:
        p = np.asarray(p, dtype=float)
        direct = curvature_direct(metric, p, h)
        q = _ingredients(wp, p, h)
        ric_u = _ricci_from(wp, q)
        rm_u = riemann_unified_tensor(wp, p, h)
        scal_u = scalar_unified(wp, p, h)
        diffs["ricci"].append(np.abs(ric_u - direct.ricci).ravel())
        diffs["riemann"].append(np.abs(rm_u - direct.riemann04).ravel())
        diffs["scalar"].append(np.array([abs(scal_u - direct.scalar)]))
        diffs["cross_ricci"].append(np.abs(direct.ricci[:m1, m1:]).ravel())
        oracle_scalars.append(direct.scalar)
    report = ResidualReport(t=None)
    for key, chunks in diffs.items():
        report.add(key, np.concatenate(chunks))
    report.extra["oracle_scalar_min"] = float(np.min(oracle_scalars))
    report.extra["oracle_scalar_max"] = float(np.max(oracle_scalars))
    return report


def default_samples(wp: WarpedProductSpec, count: int = 5, margin: float = 0.15) -> list:
    """Deterministic interior sample points, away from non-periodic edges."""
    dom = wp.base.domain.product(wp.fiber.domain)
    fr = np.linspace(margin, 1.0 - margin, count)
    pts = []
    for k, s in enumerate(fr):
        p = []
        for a in range(dom.dim):
            frac = (s + 0.37 * a * (k + 1)) % 1.0
            frac = margin + (1.0 - 2 * margin) * frac
            p.append(dom.lo[a] + frac * (dom.hi[a] - dom.lo[a]))
        pts.append(np.array(p))
    return pts
