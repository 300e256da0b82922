"""Coordinate-chart metrics and brute-force connection/curvature.

Everything here works pointwise from the metric components and their first and
second coordinate derivatives (the "2-jet").  The jet is either supplied
analytically or estimated with central differences; both routes then go through
the same algebra in :func:`curvature_from_jet`.

Index conventions
-----------------
``gamma[k, i, j]``      = Γ^k_{ij}
``riemann04[l, k, i, j]`` = R_{lkij} = g(∂_l, R(∂_i, ∂_j) ∂_k), with
                          R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y].
``ricci[j, k]``          = R^i_{ijk}; the unit sphere has Ric = (n-1) g.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import OutOfDomain, SingularMetric

Jet = tuple  # (g, dg, ddg) with dg[k,i,j] = ∂_k g_ij, ddg[k,l,i,j] = ∂_k∂_l g_ij


@dataclass(frozen=True)
class Domain:
    """Axis-aligned coordinate box; each axis is periodic or not."""

    lo: tuple
    hi: tuple
    periodic: tuple

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.periodic)):
            raise ValueError("domain bounds and periodic flags must have equal length")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty domain box lo={self.lo} hi={self.hi}")

    @classmethod
    def box(cls, bounds: Sequence[Sequence[float]], periodic: Optional[Sequence[bool]] = None) -> "Domain":
        lo = tuple(float(b[0]) for b in bounds)
        hi = tuple(float(b[1]) for b in bounds)
        per = tuple(bool(p) for p in (periodic or [False] * len(lo)))
        return cls(lo, hi, per)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def extent(self) -> float:
        return max(h - l for l, h in zip(self.lo, self.hi))

    def default_step(self) -> float:
        return 5e-4 * self.extent

    def wrap(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float)
        for a in range(self.dim):
            if self.periodic[a]:
                period = self.hi[a] - self.lo[a]
                x[a] = self.lo[a] + np.mod(x[a] - self.lo[a], period)
        return x

    def require_stencil(self, x: np.ndarray, reach: float) -> None:
        """Raise OutOfDomain unless ``x ± reach`` stays inside every non-periodic axis."""
        for a in range(self.dim):
            if self.periodic[a]:
                continue
            if x[a] - reach < self.lo[a] or x[a] + reach > self.hi[a]:
                raise OutOfDomain(
                    f"stencil of reach {reach:g} around x[{a}]={x[a]:g} leaves "
                    f"[{self.lo[a]:g}, {self.hi[a]:g}]"
                )

    def contains(self, x: np.ndarray) -> bool:
        return all(
            self.periodic[a] or self.lo[a] <= x[a] <= self.hi[a] for a in range(self.dim)
        )

    def product(self, other: "Domain") -> "Domain":
        return Domain(self.lo + other.lo, self.hi + other.hi, self.periodic + other.periodic)


@dataclass(frozen=True)
class MetricField:
    """A Riemannian metric on a coordinate box.

    ``components(x)`` returns the symmetric ``dim x dim`` matrix g_ij(x).
    ``analytic_derivs(x)``, when given, returns ``(dg, ddg)`` with
    ``dg[k, i, j] = ∂_k g_ij`` and ``ddg[k, l, i, j] = ∂_k ∂_l g_ij``.
    """

    dim: int
    domain: Domain
    components: Callable[[np.ndarray], np.ndarray]
    analytic_derivs: Optional[Callable[[np.ndarray], tuple]] = None
    name: str = field(default="", compare=False)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.components(self.domain.wrap(x)), dtype=float)

    def jet(self, x, h: Optional[float] = None) -> Jet:
        """Metric 2-jet at ``x``: analytic when available, else central differences."""
        x = np.asarray(x, dtype=float)
        if self.analytic_derivs is not None:
            xw = self.domain.wrap(x)
            dg, ddg = self.analytic_derivs(xw)
            return self(xw), np.asarray(dg, float), np.asarray(ddg, float)
        h = self.domain.default_step() if h is None else h
        self.domain.require_stencil(x, 2 * h)
        g, dg, ddg = _fd_jet(self, x, h)
        return g, dg, ddg


@dataclass(frozen=True)
class ScalarField:
    """A real function on a coordinate box, optionally with analytic partials.

    ``gradient(x)`` returns ∂_i f and ``hessian(x)`` returns ∂_i∂_j f (plain
    partial derivatives; the covariant Hessian is :func:`hessian`).
    """

    domain: Domain
    eval: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    partial_hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = field(default="", compare=False)

    def __call__(self, x) -> float:
        return float(self.eval(self.domain.wrap(x)))

    @property
    def has_analytic_derivs(self) -> bool:
        return self.gradient is not None and self.partial_hessian is not None

    def jet(self, x, h: Optional[float] = None) -> tuple:
        """Return ``(f, ∂f, ∂∂f)`` at ``x``."""
        x = np.asarray(x, dtype=float)
        if self.has_analytic_derivs:
            xw = self.domain.wrap(x)
            return (
                float(self.eval(xw)),
                np.asarray(self.gradient(xw), float),
                np.asarray(self.partial_hessian(xw), float),
            )
        h = self.domain.default_step() if h is None else h
        self.domain.require_stencil(x, 2 * h)
        return _fd_jet(lambda p: np.array(self(p)), x, h)


def _fd_jet(func, x, h):
    """4th-order first derivatives, 2nd-order second/mixed derivatives."""
    d = x.size
    f0 = np.asarray(func(x), dtype=float)
    df = np.empty((d,) + f0.shape)
    ddf = np.empty((d, d) + f0.shape)
    e = np.eye(d) * h
    plus = [np.asarray(func(x + e[k]), float) for k in range(d)]
    minus = [np.asarray(func(x - e[k]), float) for k in range(d)]
    for k in range(d):
        p2 = np.asarray(func(x + 2 * e[k]), float)
        m2 = np.asarray(func(x - 2 * e[k]), float)
        df[k] = (-p2 + 8.0 * plus[k] - 8.0 * minus[k] + m2) / (12.0 * h)
        ddf[k, k] = (plus[k] - 2.0 * f0 + minus[k]) / h**2
    for k in range(d):
        for l in range(k + 1, d):
            pp = np.asarray(func(x + e[k] + e[l]), float)
            pm = np.asarray(func(x + e[k] - e[l]), float)
            mp = np.asarray(func(x - e[k] + e[l]), float)
            mm = np.asarray(func(x - e[k] - e[l]), float)
            ddf[k, l] = ddf[l, k] = (pp - pm - mp + mm) / (4.0 * h * h)
    return f0, df, ddf


def check_positive_definite(g: np.ndarray) -> None:
    if not np.all(np.isfinite(g)):
        raise SingularMetric("metric has non-finite components")
    try:
        np.linalg.cholesky(0.5 * (g + g.T))
    except np.linalg.LinAlgError:
        raise SingularMetric(f"metric is not positive definite: eigenvalues {np.linalg.eigvalsh(0.5 * (g + g.T))}") from None


def christoffel_from_jet(g, dg):
    check_positive_definite(g)
    ginv = np.linalg.inv(g)
    # S[l, i, j] = ∂_i g_jl + ∂_j g_il - ∂_l g_ij
    s = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, s), ginv


@dataclass(frozen=True)
class CurvatureBundle:
    """Connection and curvature of a metric at one point."""

    gamma: np.ndarray
    riemann04: np.ndarray
    ricci: np.ndarray
    scalar: float
    metric: np.ndarray
    metric_inv: np.ndarray

    def symmetry_residuals(self) -> dict:
        """L∞ violations of the algebraic symmetries and the first Bianchi identity."""
        r = self.riemann04
        return {
            "gamma_sym": float(np.max(np.abs(self.gamma - self.gamma.transpose(0, 2, 1)), initial=0.0)),
            "antisym_12": float(np.max(np.abs(r + r.transpose(1, 0, 2, 3)), initial=0.0)),
            "antisym_34": float(np.max(np.abs(r + r.transpose(0, 1, 3, 2)), initial=0.0)),
            "pair_sym": float(np.max(np.abs(r - r.transpose(2, 3, 0, 1)), initial=0.0)),
            # R_{lkij} + R_{lijk} + R_{ljki}
            "bianchi": float(
                np.max(
                    np.abs(r + r.transpose(0, 2, 3, 1) + r.transpose(0, 3, 1, 2)),
                    initial=0.0,
                )
            ),
            "scalar_trace": abs(float(np.einsum("jk,jk->", self.metric_inv, self.ricci)) - self.scalar),
        }


def curvature_from_jet(g, dg, ddg) -> CurvatureBundle:
    gamma, ginv = christoffel_from_jet(g, dg)
    s = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    # ∂_m S[l, i, j] from ddg[m, a, b, c] = ∂_m ∂_a g_bc
    ds = np.einsum("mijl->mlij", ddg) + np.einsum("mjil->mlij", ddg) - ddg
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    # dgamma[m, k, i, j] = ∂_m Γ^k_ij
    dgamma = 0.5 * (np.einsum("mkl,lij->mkij", dginv, s) + np.einsum("kl,mlij->mkij", ginv, ds))
    # R^l_{ijk} = ∂_i Γ^l_jk - ∂_j Γ^l_ik + Γ^l_ip Γ^p_jk - Γ^l_jp Γ^p_ik, stored as up[l, i, j, k]
    up = (
        np.einsum("iljk->lijk", dgamma)
        - np.einsum("jlik->lijk", dgamma)
        + np.einsum("lip,pjk->lijk", gamma, gamma)
        - np.einsum("ljp,pik->lijk", gamma, gamma)
    )
    riemann04 = np.einsum("lm,mijk->lkij", g, up)
    ricci = np.einsum("iijk->jk", up)
    ricci = 0.5 * (ricci + ricci.T)
    scalar = float(np.einsum("jk,jk->", ginv, ricci))
    return CurvatureBundle(gamma, riemann04, ricci, scalar, g, ginv)


def christoffel(metric: MetricField, x, h: Optional[float] = None) -> np.ndarray:
    """Γ^k_{ij} at ``x`` (analytic derivatives if the metric has them)."""
    g, dg, _ = metric.jet(x, h)
    return christoffel_from_jet(g, dg)[0]


def curvature_direct(metric: MetricField, x, h: Optional[float] = None) -> CurvatureBundle:
    """Brute-force Christoffels, (0,4) Riemann, Ricci and scalar curvature at ``x``."""
    return curvature_from_jet(*metric.jet(x, h))


def hessian(f: ScalarField, metric: MetricField, x, h: Optional[float] = None) -> np.ndarray:
    """Covariant Hessian ∂_i∂_j f − Γ^k_ij ∂_k f."""
    _, df, ddf = f.jet(x, h)
    gamma = christoffel(metric, x, h)
    hess = ddf - np.einsum("kij,k->ij", gamma, df)
    return 0.5 * (hess + hess.T)


def laplacian(f: ScalarField, metric: MetricField, x, h: Optional[float] = None) -> float:
    """Δf = trace of the Hessian with g⁻¹ (so Δ(½|x|²) = d on flat ℝ^d)."""
    ginv = np.linalg.inv(metric(x))
    return float(np.einsum("ij,ij->", ginv, hessian(f, metric, x, h)))


def grad_norm_sq(f: ScalarField, metric: MetricField, x, h: Optional[float] = None) -> float:
    _, df, _ = f.jet(x, h)
    g = metric(x)
    check_positive_definite(g)
    return float(df @ np.linalg.solve(g, df))


def check_metric(metric: MetricField, samples: Sequence) -> None:
    """Assert symmetry and positive-definiteness at every sample point."""
    for x in samples:
        g = metric(x)
        if not np.allclose(g, g.T, rtol=0, atol=1e-14 * max(1.0, np.abs(g).max())):
            raise SingularMetric(f"metric not symmetric at {x}")
        check_positive_definite(g)
