"""Named metrics, scalar fields and warped-product specs.

Metric names:   ``euclidean:d``, ``sphere:n``, ``hyperbolic:2``, ``diag:e1,e2,...``
Warped names:   ``cylinder:n,r0``, ``sphere-split:m2``, ``bump-warp:n``,
                ``direct-product:n``
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidSpec
from .expr import ExpressionError, compile_expr
from .manifold import Domain, MetricField, ScalarField


def euclidean(d: int, bounds=None, periodic=None) -> MetricField:
    bounds = bounds or [(-1.0, 1.0)] * d
    eye = np.eye(d)
    zeros = (np.zeros((d, d, d)), np.zeros((d, d, d, d)))
    return MetricField(
        dim=d,
        domain=Domain.box(bounds, periodic),
        components=lambda x: eye.copy(),
        analytic_derivs=lambda x: zeros,
        name=f"euclidean:{d}",
    )


def round_sphere(n: int) -> MetricField:
    """Unit S^n in polar angles θ_1..θ_n: g_kk = Π_{j<k} sin²θ_j.

    θ_1..θ_{n-1} ∈ (0, π), θ_n ∈ [0, 2π) periodic.
    """
    if n < 1:
        raise InvalidSpec("sphere dimension must be >= 1")
    bounds = [(0.0, math.pi)] * (n - 1) + [(0.0, 2 * math.pi)]
    periodic = [False] * (n - 1) + [True]

    def diag(x):
        s2 = np.sin(x[: n - 1]) ** 2
        return np.concatenate(([1.0], np.cumprod(s2)))

    def components(x):
        return np.diag(diag(x))

    def derivs(x):
        gk = diag(x)
        ang = x[: n - 1]
        cot = np.cos(ang) / np.sin(ang)
        # ∂²(sin²θ)/sin²θ = 2 cos 2θ / sin²θ
        second = 2.0 * np.cos(2 * ang) / np.sin(ang) ** 2
        dg = np.zeros((n, n, n))
        ddg = np.zeros((n, n, n, n))
        for k in range(n):
            for i in range(k):
                dg[i, k, k] = gk[k] * 2.0 * cot[i]
                for l in range(k):
                    if l == i:
                        ddg[i, i, k, k] = gk[k] * second[i]
                    else:
                        ddg[i, l, k, k] = gk[k] * 4.0 * cot[i] * cot[l]
        return dg, ddg

    return MetricField(n, Domain.box(bounds, periodic), components, derivs, name=f"sphere:{n}")


def hyperbolic_plane(bounds=None) -> MetricField:
    """g = diag(1, e^{2x}); sectional curvature -1."""
    bounds = bounds or [(-1.0, 1.0), (-1.0, 1.0)]

    def components(x):
        return np.diag([1.0, math.exp(2 * x[0])])

    def derivs(x):
        e2 = math.exp(2 * x[0])
        dg = np.zeros((2, 2, 2))
        ddg = np.zeros((2, 2, 2, 2))
        dg[0, 1, 1] = 2 * e2
        ddg[0, 0, 1, 1] = 4 * e2
        return dg, ddg

    return MetricField(2, Domain.box(bounds, [False, True]), components, derivs, name="hyperbolic:2")


def diag_metric(exprs: Sequence[str], bounds=None, periodic=None) -> MetricField:
    """Diagonal metric from expression strings; derivatives by finite differences."""
    d = len(exprs)
    try:
        funcs = [compile_expr(e.strip(), d) for e in exprs]
    except ExpressionError as exc:
        raise InvalidSpec(str(exc)) from None
    bounds = bounds or [(-1.0, 1.0)] * d

    def components(x):
        return np.diag([float(f(x)) for f in funcs])

    return MetricField(d, Domain.box(bounds, periodic), components, None, name="diag:" + ",".join(exprs))


def metric_from_name(name: str, bounds=None, periodic=None) -> MetricField:
    kind, _, arg = name.partition(":")
    try:
        if kind == "euclidean":
            return euclidean(int(arg), bounds, periodic)
        if kind == "sphere":
            return round_sphere(int(arg))
        if kind == "hyperbolic":
            if arg not in ("", "2"):
                raise InvalidSpec("only hyperbolic:2 is available")
            return hyperbolic_plane(bounds)
        if kind == "diag":
            return diag_metric(arg.split(","), bounds, periodic)
    except ValueError as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(f"bad metric name {name!r}: {exc}") from None
    raise InvalidSpec(f"unknown metric {name!r}")


# -- scalar fields -----------------------------------------------------------

def constant_scalar(domain: Domain, value: float) -> ScalarField:
    d = domain.dim
    return ScalarField(
        domain,
        lambda x: value,
        lambda x: np.zeros(d),
        lambda x: np.zeros((d, d)),
        name=f"const:{value:g}",
    )


def scalar_from_expr(text: str, domain: Domain) -> ScalarField:
    try:
        f = compile_expr(text, domain.dim)
    except ExpressionError as exc:
        raise InvalidSpec(str(exc)) from None
    return ScalarField(domain, lambda x: float(f(x)), name=text)


def sin_warp(domain: Domain) -> ScalarField:
    return ScalarField(
        domain,
        lambda x: math.sin(x[0]),
        lambda x: np.array([math.cos(x[0])]),
        lambda x: np.array([[-math.sin(x[0])]]),
        name="sin(x1)",
    )


def bump_warp(domain: Domain) -> ScalarField:
    """λ = 2 + cos x on the circle."""
    return ScalarField(
        domain,
        lambda x: 2.0 + math.cos(x[0]),
        lambda x: np.array([-math.sin(x[0])]),
        lambda x: np.array([[-math.cos(x[0])]]),
        name="2+cos(x1)",
    )


# -- warped-product specs -----------------------------------------------------

def _parse_args(arg: str, count: int, name: str):
    parts = [p for p in arg.split(",") if p]
    if len(parts) != count:
        raise InvalidSpec(f"{name!r} expects {count} comma-separated parameter(s)")
    return parts


def warped_from_name(name: str):
    """Build a :class:`~warpflow.warped.WarpedProductSpec` from a catalog name."""
    from .warped import WarpedProductSpec

    kind, _, arg = name.partition(":")
    try:
        if kind == "cylinder":
            n_s, r0_s = _parse_args(arg, 2, name)
            n, r0 = int(n_s), float(r0_s)
            base = euclidean(1, [(-1.0, 1.0)])
            return WarpedProductSpec(base, round_sphere(n), constant_scalar(base.domain, r0), einstein_c=n - 1.0, name=name)
        if kind == "sphere-split":
            (m2_s,) = _parse_args(arg, 1, name)
            m2 = int(m2_s)
            base = euclidean(1, [(0.0, math.pi)])
            return WarpedProductSpec(base, round_sphere(m2), sin_warp(base.domain), einstein_c=m2 - 1.0, name=name)
        if kind == "bump-warp":
            (n_s,) = _parse_args(arg, 1, name)
            n = int(n_s)
            base = euclidean(1, [(0.0, 2 * math.pi)], [True])
            return WarpedProductSpec(base, round_sphere(n), bump_warp(base.domain), einstein_c=n - 1.0, name=name)
        if kind == "direct-product":
            (n_s,) = _parse_args(arg, 1, name)
            n = int(n_s)
            base = euclidean(2)
            return WarpedProductSpec(base, round_sphere(n), constant_scalar(base.domain, 1.0), einstein_c=n - 1.0, name=name)
    except ValueError as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(f"bad warped-product name {name!r}: {exc}") from None
    raise InvalidSpec(f"unknown warped-product spec {name!r}")


def warped_from_definition(defn: dict):
    """Inline definition: ``{"base": ..., "fiber": ..., "warp": expr, ...}``.

    Optional keys: ``base_domain``, ``base_periodic``, ``fiber_domain``,
    ``fiber_periodic``, ``einstein_c``.
    """
    from .warped import WarpedProductSpec

    allowed = {"base", "fiber", "warp", "base_domain", "base_periodic", "fiber_domain", "fiber_periodic", "einstein_c"}
    unknown = set(defn) - allowed
    if unknown:
        raise InvalidSpec(f"unknown keys in inline spec: {sorted(unknown)}")
    for key in ("base", "fiber", "warp"):
        if key not in defn:
            raise InvalidSpec(f"inline spec needs {key!r}")
    base = metric_from_name(defn["base"], defn.get("base_domain"), defn.get("base_periodic"))
    fiber = metric_from_name(defn["fiber"], defn.get("fiber_domain"), defn.get("fiber_periodic"))
    warp_text = str(defn["warp"])
    try:
        value = float(warp_text)
    except ValueError:
        warp = scalar_from_expr(warp_text, base.domain)
    else:
        warp = constant_scalar(base.domain, value)
    c: Optional[float] = defn.get("einstein_c")
    return WarpedProductSpec(base, fiber, warp, einstein_c=c, name="inline")
