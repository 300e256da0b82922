import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpflow.catalog import diag_metric, euclidean, hyperbolic_plane, round_sphere, scalar_from_expr
from warpflow.errors import OutOfDomain, SingularMetric
from warpflow.manifold import (
    Domain,
    MetricField,
    check_positive_definite,
    christoffel,
    curvature_direct,
    grad_norm_sq,
    hessian,
    laplacian,
)


def strip(metric):
    return MetricField(metric.dim, metric.domain, metric.components, None, name=metric.name)


def constant_curvature_tensor(g, K):
    """K (g_yz g_wx − g_xz g_wy) in the [w, z, x, y] layout."""
    return K * (np.einsum("yz,wx->wzxy", g, g) - np.einsum("xz,wy->wzxy", g, g))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_unit_sphere_is_einstein(n):
    s = round_sphere(n)
    p = np.array([1.1, 0.9, 0.7, 2.0][:n])
    cb = curvature_direct(s, p)
    np.testing.assert_allclose(cb.ricci, (n - 1) * cb.metric, atol=1e-12)
    assert cb.scalar == pytest.approx(n * (n - 1), abs=1e-12)
    np.testing.assert_allclose(cb.riemann04, constant_curvature_tensor(cb.metric, 1.0), atol=1e-12)


def test_hyperbolic_plane_has_curvature_minus_one():
    cb = curvature_direct(hyperbolic_plane(), np.array([0.3, 1.2]))
    assert cb.scalar == pytest.approx(-2.0, abs=1e-12)
    np.testing.assert_allclose(cb.riemann04, constant_curvature_tensor(cb.metric, -1.0), atol=1e-12)


def test_flat_metric_has_zero_curvature():
    cb = curvature_direct(euclidean(3), np.array([0.1, 0.2, 0.3]))
    assert np.max(np.abs(cb.riemann04)) == 0.0
    assert np.max(np.abs(cb.gamma)) == 0.0


def test_polar_christoffels():
    # dr² + r² dθ²: Γ^r_θθ = −r, Γ^θ_rθ = 1/r
    m = diag_metric(["1", "x1**2"], bounds=[(0.5, 2.0), (0.0, 2 * math.pi)])
    r = 1.3
    gam = christoffel(m, np.array([r, 0.4]))
    assert gam[0, 1, 1] == pytest.approx(-r, rel=1e-8)
    assert gam[1, 0, 1] == pytest.approx(1 / r, rel=1e-8)
    assert gam[1, 1, 0] == pytest.approx(1 / r, rel=1e-8)


@pytest.mark.parametrize("n", [2, 3])
def test_finite_differences_match_analytic(n):
    s = round_sphere(n)
    p = np.array([1.0, 1.4, 0.5][:n])
    exact = curvature_direct(s, p)
    approx = curvature_direct(strip(s), p)
    np.testing.assert_allclose(approx.ricci, exact.ricci, atol=1e-4)
    np.testing.assert_allclose(approx.gamma, exact.gamma, atol=1e-8)


def test_finite_difference_error_is_second_order():
    s = round_sphere(2)
    p = np.array([0.8, 1.0])
    exact = curvature_direct(s, p).ricci
    errs = [np.max(np.abs(curvature_direct(strip(s), p, h).ricci - exact)) for h in (4e-2, 2e-2, 1e-2)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2))


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(0.5, 2.0),
    b=st.floats(-0.4, 0.4),
    x=st.floats(0.2, 0.8),
    y=st.floats(0.2, 0.8),
)
def test_symmetries_of_fd_curvature(a, b, x, y):
    m = diag_metric([f"{a} + {b}*x2**2", f"1 + x1**2 + {a}*x2"], bounds=[(0, 1), (0, 1)])
    cb = curvature_direct(m, np.array([x, y]))
    res = cb.symmetry_residuals()
    for key in ("gamma_sym", "antisym_12", "antisym_34", "pair_sym", "bianchi"):
        assert res[key] < 1e-6, key
    assert res["scalar_trace"] < 1e-10


def test_hessian_laplacian_on_sphere():
    # f = cos θ on S²: Δf = −2f, Hess f = −f g
    s = round_sphere(2)
    f = scalar_from_expr("cos(x1)", s.domain)
    p = np.array([1.0, 0.3])
    g = s.components(p)
    np.testing.assert_allclose(hessian(f, s, p), -math.cos(1.0) * g, atol=1e-5)
    assert laplacian(f, s, p) == pytest.approx(-2 * math.cos(1.0), abs=1e-5)
    assert grad_norm_sq(f, s, p) == pytest.approx(math.sin(1.0) ** 2, abs=1e-8)


def test_singular_metric_rejected():
    with pytest.raises(SingularMetric):
        check_positive_definite(np.diag([1.0, 0.0]))
    with pytest.raises(SingularMetric):
        check_positive_definite(np.diag([1.0, -2.0]))


def test_stencil_leaving_domain():
    m = strip(euclidean(1, [(0.0, 1.0)]))
    with pytest.raises(OutOfDomain):
        curvature_direct(m, np.array([1e-6]))


def test_periodic_axis_wraps():
    d = Domain.box([(0.0, 1.0)], [True])
    assert d.wrap(np.array([1.25]))[0] == pytest.approx(0.25)
    d.require_stencil(np.array([0.0]), 0.1)


def test_empty_box_rejected():
    with pytest.raises(ValueError):
        Domain.box([(1.0, 1.0)])
