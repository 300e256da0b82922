import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpflow.catalog import round_sphere
from warpflow.errors import InsufficientSnapshots, NotEinsteinFiber
from warpflow.flow import FlowGrid, initial_state, integrate
from warpflow.verify import (
    EinsteinFiberContext,
    FlowTrajectory,
    compute_f,
    fiber_frame,
    rough_laplacian_split,
    time_derivative,
    verify_characterization,
    verify_f_consistency,
    verify_f_evolution,
    verify_metric_evolution,
    verify_proportionality,
    verify_ricci_evolution,
    verify_warp_evolution,
)


def bump_run(N, snap, t_end, coeffs=(0.0, 1.0, 0.0)):
    g = FlowGrid(N, 0.0, 2 * math.pi, "periodic")
    kw = {"lam_vel": 0.0, "mu_vel": 0.0} if coeffs[0] else {}
    s = initial_state(g, lambda x: 2.0 + np.cos(x), coeffs=coeffs, n=2, **kw)
    return FlowTrajectory.from_run(integrate(s, t_end, snapshot_dt=snap))


def cylinder_run(N=11, snap=1e-3, t_end=0.01, n=2):
    s = initial_state(FlowGrid(N, -1.0, 1.0), 1.0, n=n)
    return FlowTrajectory.from_run(integrate(s, t_end, snapshot_dt=snap))


# -- time differences --------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(coef=st.lists(st.floats(-2, 2), min_size=5, max_size=5), dt=st.floats(0.01, 0.5))
def test_central4_exact_on_quartics(coef, dt):
    t = dt * np.arange(7)
    vals = [np.array([np.polyval(coef, tk)]) for tk in t]
    d1c = np.polyder(coef)
    d2c = np.polyder(coef, 2)
    idx, d1 = time_derivative(vals, dt, "central4", 1)
    _, d2 = time_derivative(vals, dt, "central4", 2)
    scale = 1 + max(abs(c) for c in coef) / dt**2
    for k, a, b in zip(idx, d1, d2):
        assert a[0] == pytest.approx(np.polyval(d1c, t[k]), abs=1e-9 * scale)
        assert b[0] == pytest.approx(np.polyval(d2c, t[k]), abs=1e-9 * scale)


def test_central_exact_on_quadratics():
    vals = [np.array([3 * t * t - t + 1]) for t in 0.1 * np.arange(4)]
    idx, d1 = time_derivative(vals, 0.1)
    _, d2 = time_derivative(vals, 0.1, order=2)
    assert idx == [1, 2]
    assert d1[0][0] == pytest.approx(6 * 0.1 - 1)
    assert d2[1][0] == pytest.approx(6.0)


def test_time_derivative_needs_enough_snapshots():
    with pytest.raises(InsufficientSnapshots):
        time_derivative([np.zeros(2)] * 4, 0.1, "central4")
    with pytest.raises(ValueError):
        time_derivative([np.zeros(2)] * 4, 0.1, "upwind")


def test_trajectory_validation():
    run = integrate(initial_state(FlowGrid(11, -1, 1), 1.0), 0.001, dt=1e-4, snapshot_dt=1e-3)
    with pytest.raises(InsufficientSnapshots):
        FlowTrajectory(run.snapshots)
    snaps = cylinder_run().snapshots
    with pytest.raises(ValueError):
        FlowTrajectory([snaps[0], snaps[1], snaps[3]])


# -- Einstein fiber requirements ------------------------------------------------------------

def test_einstein_only_checks_need_context():
    traj = cylinder_run()
    with pytest.raises(NotEinsteinFiber):
        verify_warp_evolution(traj, None)
    with pytest.raises(NotEinsteinFiber):
        verify_f_evolution(traj, None)
    rep = verify_ricci_evolution(traj, None)
    assert "ricci_fiber" in rep and "ricci_fiber_einstein" not in rep


def test_fiber_frame_matches_round_sphere():
    g2, ric2, rm2 = fiber_frame(3, 2.0, round_sphere(3))
    g2c, ric2c, rm2c = fiber_frame(3, 2.0)
    np.testing.assert_allclose(np.linalg.solve(g2, ric2), 2.0 * np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.einsum("wzxy,xw->zy", rm2c, np.linalg.inv(g2c)), ric2c, atol=1e-14)


# -- the cylinder: everything spatially constant ------------------------------------------------

def test_cylinder_residuals_are_small():
    traj = cylinder_run(snap=1e-3, t_end=0.01)
    ctx = EinsteinFiberContext(1.0, 2)
    reps = [
        verify_metric_evolution(traj, scheme="central4"),
        verify_warp_evolution(traj, ctx, scheme="central4"),
        verify_ricci_evolution(traj, ctx, scheme="central4"),
        verify_f_evolution(traj, ctx, scheme="central4"),
    ]
    for r in reps:
        assert r.worst() < 1e-9, r.as_dict()
    f = verify_f_evolution(traj, ctx)
    np.testing.assert_array_equal(f.fields["f_evolution"], f.fields["f_evolution_complete"])


def test_f_identities_on_cylinder_states():
    traj = cylinder_run(n=3)
    ctx = EinsteinFiberContext(2.0, 3)
    for s in traj.snapshots:
        assert verify_f_consistency(ctx, s).worst() < 1e-12
        assert verify_proportionality(ctx, s, round_sphere(3)).worst() < 1e-12
        closed, _ = compute_f(ctx, s)
        np.testing.assert_allclose(closed, 2.0 / s.lam**2, rtol=1e-14)


def test_f_consistency_on_varying_warp():
    g = FlowGrid(400, 0, 2 * math.pi, "periodic")
    s = initial_state(g, lambda x: 2 + np.cos(x))
    assert verify_f_consistency(EinsteinFiberContext(1.0, 2), s).worst() < 1e-6


def test_rough_laplacian_of_metric_is_zero():
    # ∇ḡ = 0, so ḡ itself (a = b = 1) must have vanishing rough Laplacian
    g = FlowGrid(64, 0, 2 * math.pi, "periodic")
    s = initial_state(g, lambda x: 2 + np.cos(x), mu=lambda x: 1 + 0.1 * np.sin(x))
    base, fib = rough_laplacian_split(s, np.ones(64), np.ones(64))
    assert np.max(np.abs(base)) < 1e-12 and np.max(np.abs(fib)) < 1e-12


# -- convergence on the bump-warped circle ---------------------------------------------------------

@pytest.fixture(scope="module")
def bump_reports():
    ctx = EinsteinFiberContext(1.0, 2)
    out = []
    for N, snap in ((50, 8e-4), (100, 4e-4), (200, 2e-4)):
        traj = bump_run(N, snap, 0.0048)
        rep = verify_metric_evolution(traj, round_sphere(2))
        rep.merge(verify_warp_evolution(traj, ctx))
        rep.merge(verify_ricci_evolution(traj, ctx, round_sphere(2)))
        rep.merge(verify_f_evolution(traj, ctx))
        out.append(rep)
    return out


@pytest.mark.parametrize(
    "name",
    ["metric_base", "metric_fiber", "warp_rf", "ricci_base", "ricci_fiber", "ricci_fiber_einstein",
     "f_evolution_complete"],
)
def test_second_order_convergence(bump_reports, name):
    errs = np.array([r.linf(name) for r in bump_reports])
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all((orders > 1.7) & (orders < 2.4)), (errs, orders)


def test_uncoupled_f_equation_does_not_converge_on_varying_warp(bump_reports):
    # the uncoupled right-hand side misses the 2|grad λ|²/λ² (a − f) coupling
    errs = np.array([r.linf("f_evolution") for r in bump_reports])
    assert errs[-1] > 0.1
    assert abs(errs[-1] - errs[0]) < 0.1 * errs[0]


def test_collapsed_forms_match_general():
    traj = bump_run(40, 1e-3, 0.004)
    ctx = EinsteinFiberContext(1.0, 2)
    for fn in (verify_ricci_evolution, verify_f_evolution):
        a = fn(traj, ctx, collapsed=False)
        b = fn(traj, ctx, collapsed=True)
        for name in a.names():
            np.testing.assert_array_equal(a.fields[name], b.fields[name])


def test_hyperbolic_metric_and_warp_residuals_converge():
    ctx = EinsteinFiberContext(1.0, 2)
    errs = []
    for N, snap in ((50, 1e-3), (100, 5e-4), (200, 2.5e-4)):
        traj = bump_run(N, snap, 0.01, coeffs=(1.0, 0.0, 0.0))
        rep = verify_metric_evolution(traj, flow="hgf")
        rep.merge(verify_warp_evolution(traj, ctx, flow="hgf"))
        errs.append([rep.linf("metric_base_hgf"), rep.linf("warp_hgf")])
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders > 1.7), (errs, orders)


def test_perturbed_snapshot_is_flagged():
    traj = bump_run(100, 4e-4, 0.004)
    ctx = EinsteinFiberContext(1.0, 2)
    clean = verify_warp_evolution(traj, ctx).linf("warp_rf")
    snaps = list(traj.snapshots)
    snaps[5] = replace(snaps[5], lam=snaps[5].lam * 1.01)
    dirty = verify_warp_evolution(FlowTrajectory(snaps, traj.dt_snap), ctx).linf("warp_rf")
    assert clean < 1e-2 < dirty


def test_characterization_along_static_direct_product():
    g = FlowGrid(11, 0, 1)
    s = initial_state(g, 1.0, fiber_einstein_c=0.0)
    traj = FlowTrajectory.from_run(integrate(s, 0.004, dt=1e-4, snapshot_dt=1e-3))
    rep = verify_characterization(traj, "rf")
    rep.merge(verify_characterization(traj, "hgf"))
    assert rep.worst() == 0.0
    assert len(rep.per_time("rf_char")) == 3


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), m2=st.integers(2, 6))
def test_rhs_index_collapse_is_bitwise(seed, m2):
    from warpflow.verify import f_rhs, f_rhs_1d, ricci_base_rhs, ricci_base_rhs_1d, ricci_fiber_rhs, ricci_fiber_rhs_1d

    r = np.random.default_rng(seed)
    gi, ric, lap, tr, fib, gb, f = (r.normal(size=17) for _ in range(7))
    gi = np.abs(gi) + 0.1
    T = lambda v: v[:, None, None]  # noqa: E731
    zero = np.zeros((17, 1, 1))
    np.testing.assert_array_equal(ricci_base_rhs(T(gi), T(ric), zero, T(lap), tr, m2)[:, 0, 0],
                                  ricci_base_rhs_1d(gi, ric, lap, tr, m2))
    np.testing.assert_array_equal(ricci_fiber_rhs(T(gi), T(ric), zero, lap, fib, gb, m2),
                                  ricci_fiber_rhs_1d(gi, ric, lap, fib, gb, m2))
    np.testing.assert_array_equal(f_rhs(T(gi), T(ric), zero, lap, f, m2), f_rhs_1d(gi, ric, lap, f, m2))
