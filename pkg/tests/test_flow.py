import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpflow.catalog import warped_from_definition
from warpflow.errors import InvalidCoefficients, MissingVelocities, SingularityReached, UnstableStep
from warpflow.flow import (
    FlowGrid,
    FlowState,
    base_hessian,
    check_einstein,
    check_hgf_characterization,
    check_rf_characterization,
    hgf_rhs,
    initial_state,
    integrate,
    rf_rhs,
    ricci_components,
    sectional_curvatures,
    stable_dt,
    step,
    unified_rhs,
)
from warpflow.warped import ricci_unified_tensor


def cylinder(N=21, n=2, r0=1.0, coeffs=(0.0, 1.0, 0.0), v0=0.0):
    grid = FlowGrid(N, -1.0, 1.0)
    vel = v0 if coeffs[0] else None
    return initial_state(grid, r0, lam_vel=vel, coeffs=coeffs, n=n)


# -- grid operators ------------------------------------------------------------

@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("mode", ["periodic", "neumann"])
def test_derivative_convergence(order, mode):
    errs = []
    for N in (40, 80, 160):
        if mode == "periodic":
            g = FlowGrid(N, 0.0, 2 * math.pi, "periodic")
        else:
            g = FlowGrid(N + 1, 0.0, math.pi, "neumann")
        u = np.cos(g.x)  # even about both ends of [0, π]
        e1 = np.max(np.abs(g.d1(u, order) + np.sin(g.x)))
        e2 = np.max(np.abs(g.d2(u, order) + np.cos(g.x)))
        errs.append(max(e1, e2))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > order - 0.2), orders


def test_bad_grid_arguments():
    with pytest.raises(ValueError):
        FlowGrid(3, 0, 1)
    with pytest.raises(ValueError):
        FlowGrid(11, 1, 0)
    with pytest.raises(ValueError):
        FlowGrid(11, 0, 1, "dirichlet")
    with pytest.raises(ValueError):
        FlowGrid(11, 0, 1).d1(np.zeros(11), order=3)


# -- curvature of the profile metric ----------------------------------------------

def test_round_sphere_profile_has_unit_curvature():
    g = FlowGrid(201, 0.3, math.pi - 0.3)
    s = initial_state(g, np.sin, n=3)
    k_rad, k_sph = sectional_curvatures(s)
    inner = g.interior(0.05)
    assert np.max(np.abs(k_rad[inner] - 1)) < 1e-4
    # mirror ghosts force λ_s = 0 at the cut ends, so only the interior is round
    assert np.max(np.abs(k_sph[inner] - 1)) < 1e-3


def test_ricci_components_match_warped_oracle():
    # μ(x) = 1 + 0.2 x², λ(x) = 1.5 + 0.3 sin x, fiber unit S² (c = 1)
    wp = warped_from_definition(
        {"base": "diag:(1+0.2*x1**2)**2", "fiber": "sphere:2", "warp": "1.5+0.3*sin(x1)",
         "base_domain": [[-1.2, 1.2]], "einstein_c": 1.0}
    )
    errs = []
    for N in (41, 81, 161):
        g = FlowGrid(N, -1.2, 1.2)
        s = initial_state(g, lambda x: 1.5 + 0.3 * np.sin(x), mu=lambda x: 1 + 0.2 * x**2)
        ric_x, ric_s = ricci_components(s)
        k = np.flatnonzero(np.isclose(g.x, [[-0.6], [0.0], [0.6]]).any(axis=0))
        ref = [ricci_unified_tensor(wp, np.array([g.x[i], 1.0, 0.5])) for i in k]
        e = max(abs(ric_x[i] - r[0, 0]) for i, r in zip(k, ref))
        e = max(e, max(abs(ric_s[i] - r[1, 1] / 1.0) for i, r in zip(k, ref)))  # g_S² θθ = 1
        errs.append(e)
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert errs[-1] < 1e-3
    assert np.all(orders > 1.8), (errs, orders)


# -- exact solutions ---------------------------------------------------------------------

@pytest.mark.parametrize("n, r0", [(2, 1.0), (3, 1.5), (4, 2.0)])
def test_cylinder_ricci_flow_exact(n, r0):
    s = cylinder(N=11, n=n, r0=r0)
    run = integrate(s, 0.1, dt=1e-4, snapshot_dt=0.05)
    exact = r0**2 - 2 * (n - 1) * 0.1
    assert np.max(np.abs(run.final.lam**2 - exact)) < 1e-8
    assert np.all(run.final.mu == 1.0)
    np.testing.assert_allclose([x.t for x in run.snapshots], [0.0, 0.05, 0.1], atol=1e-15)


def test_cylinder_singularity_time():
    dt = 1e-4
    with pytest.raises(SingularityReached) as info:
        integrate(cylinder(N=11), 0.6, dt=dt, snapshot_dt=1e-3)
    exc = info.value
    assert abs(exc.state.t - 0.5) <= 2 * dt
    assert exc.result.status == "singular"
    assert np.all(exc.state.lam > 0)


def test_singularity_without_raising():
    run = integrate(cylinder(N=11), 0.6, dt=1e-4, snapshot_dt=1e-3, stop_on_singularity=True)
    assert run.status == "singular"
    assert abs(run.final.t - 0.5) <= 2e-4


@pytest.mark.parametrize("v0", [0.0, 0.3, -0.2])
def test_cylinder_hyperbolic_flow_exact(v0):
    s = cylinder(N=11, coeffs=(1.0, 0.0, 0.0), v0=v0)
    run = integrate(s, 0.5, dt=1e-3, snapshot_dt=0.1)
    exact = 1.0 + 2 * v0 * 0.5 - 0.25
    assert np.max(np.abs(run.final.lam**2 - exact)) < 1e-6


def test_rk4_fourth_order_in_time():
    errs = []
    for dt in (4e-4, 2e-4, 1e-4):
        run = integrate(cylinder(N=9), 0.49, dt=dt, snapshot_dt=0.49)
        errs.append(np.max(np.abs(run.final.lam**2 - (1 - 2 * 0.49))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.5), (errs, orders)


def test_euler_first_order_in_time():
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        run = integrate(cylinder(N=9), 0.4, dt=dt, snapshot_dt=0.4, scheme="euler")
        errs.append(np.max(np.abs(run.final.lam**2 - 0.2)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 1) < 0.15), orders


def test_default_substeps_respect_stability():
    g = FlowGrid(81, 0.2, math.pi - 0.2)
    s = initial_state(g, np.sin, n=2)
    run = integrate(s, 0.01, snapshot_dt=0.002)
    assert run.dt <= stable_dt(s)
    assert len(run.snapshots) == 6


def test_unstable_step_rejected():
    s = cylinder(N=41)
    with pytest.raises(UnstableStep) as info:
        step(s, 10 * stable_dt(s))
    assert info.value.state is s


def test_zero_rhs_state_is_fixed():
    g = FlowGrid(21, 0.0, 1.0)
    s = initial_state(g, 1.0, fiber_einstein_c=0.0)
    out = step(s, 1e-4)
    assert np.array_equal(out.lam, s.lam) and np.array_equal(out.mu, s.mu)


def test_snapshot_spacing_must_divide():
    with pytest.raises(ValueError):
        integrate(cylinder(), 0.1, dt=3e-4, snapshot_dt=1e-3)


# -- state validation -----------------------------------------------------------------------

def test_state_validation():
    g = FlowGrid(11, 0, 1)
    with pytest.raises(MissingVelocities):
        FlowState(g, np.ones(11), np.ones(11), coeffs=(1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        FlowState(g, np.ones(11), np.ones(11), np.zeros(11), np.zeros(11))
    with pytest.raises(ValueError):
        FlowState(g, np.ones(10), np.ones(11))
    with pytest.raises(ValueError):
        FlowState(g, -np.ones(11), np.ones(11))
    with pytest.raises(MissingVelocities):
        hgf_rhs(cylinder())
    s = initial_state(g, 1.0, coeffs=(0.0, 0.0, -2.0))
    with pytest.raises(InvalidCoefficients):
        unified_rhs(s)


def test_state_arrays_are_read_only():
    s = cylinder()
    with pytest.raises(ValueError):
        s.lam[0] = 2.0


# -- unified family -------------------------------------------------------------------------

def random_state(seed, coeffs):
    r = np.random.default_rng(seed)
    g = FlowGrid(33, 0.0, 2 * math.pi, "periodic")
    a, b = r.uniform(-0.3, 0.3, 2)
    lam = 2.0 + a * np.cos(g.x) + b * np.sin(2 * g.x)
    mu = 1.0 + 0.2 * r.uniform(-1, 1) * np.sin(g.x)
    kw = {}
    if coeffs[0]:
        kw = dict(lam_vel=r.normal(size=33) * 0.1, mu_vel=r.normal(size=33) * 0.1)
    return initial_state(g, lam, mu=mu, coeffs=coeffs, n=int(r.integers(2, 5)), **kw)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_unified_reduces_to_ricci_flow(seed):
    s = random_state(seed, (0.0, 1.0, 0.0))
    for u, r in zip(unified_rhs(s), rf_rhs(s)):
        assert np.max(np.abs(u - r)) <= 1e-14 * np.max(np.abs(r))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_unified_reduces_to_hyperbolic_flow(seed):
    s = random_state(seed, (1.0, 0.0, 0.0))
    for u, r in zip(unified_rhs(s), hgf_rhs(s)):
        assert np.max(np.abs(u - r)) <= 1e-14 * np.max(np.abs(r))


def test_normalised_flow_keeps_round_cylinder_radius():
    # γ = −2(n−1)/r0² balances the fiber Ricci term for a cylinder of radius r0
    s = initial_state(FlowGrid(11, -1, 1), 1.0, coeffs=(0.0, 1.0, -2.0), n=2)
    _, lam_t = unified_rhs(s)
    assert np.max(np.abs(lam_t)) < 1e-15


def test_static_einstein_check():
    flat = initial_state(FlowGrid(11, 0, 1), 1.0, coeffs=(0.0, 0.0, 0.0), fiber_einstein_c=0.0)
    assert check_einstein(flat).worst() == 0.0
    cyl = initial_state(FlowGrid(11, 0, 1), 1.0, coeffs=(0.0, 0.0, 0.0), n=2)
    assert check_einstein(cyl).linf("einstein_fiber") == pytest.approx(2.0)


# -- characterization residuals --------------------------------------------------------------

def test_static_direct_product_characterization_is_zero():
    g = FlowGrid(11, 0, 1)
    s = initial_state(g, 1.0, fiber_einstein_c=0.0)
    rep = check_rf_characterization(s, np.zeros(11))
    assert rep.linf("rf_char") == 0.0 and rep.linf("rf_char_hess") == 0.0
    h = initial_state(g, 1.0, coeffs=(1.0, 0.0, 0.0), fiber_einstein_c=0.0)
    rep = check_hgf_characterization(h, lam_tt=np.zeros(11))
    assert rep.linf("hgf_char") == 0.0 and rep.linf("hgf_char_offdiag") == 0.0


@pytest.mark.parametrize("n, r0", [(2, 1.0), (3, 0.8)])
def test_cylinder_characterization_residual_closed_form(n, r0):
    s = cylinder(N=11, n=n, r0=r0)
    rep = check_rf_characterization(s)
    # λ_t = −(n−1)/λ against ((λ²−1)/(nλ))·n(n−1): residual −(n−1)λ
    np.testing.assert_allclose(rep.fields["rf_char"], -(n - 1) * r0, rtol=1e-14)
    assert rep.linf("rf_char_hess") == 0.0
    h = cylinder(N=11, n=n, r0=r0, coeffs=(1.0, 0.0, 0.0))
    rep = check_hgf_characterization(h)
    # (n/2)(λ²)_tt − (λ²−1)n(n−1) with (λ²)_tt = −2(n−1)
    np.testing.assert_allclose(rep.fields["hgf_char"], -n * (n - 1) * r0**2, rtol=1e-13)


def test_hessian_flags_nonconstant_warp():
    g = FlowGrid(41, 0, 1)
    assert np.max(np.abs(base_hessian(g, np.ones(41), g.x**2))) > 1.0
    assert np.max(np.abs(base_hessian(g, np.ones(41), np.full(41, 3.0)))) == 0.0
