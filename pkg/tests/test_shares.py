import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gnepkit import (
    InfeasibleShareSetError,
    MasterConfig,
    NepConfig,
    master_map,
    master_residual,
    project_shares,
    recover_multipliers,
    solve_master,
    solve_nash,
)


def brute_force_capped_projection(v, total, lo, hi):
    """Projection onto {w : sum w = total, lo <= w <= hi} by KKT enumeration.

    Tries every split of coordinates into at-lower / free / at-upper, solves
    the equality-constrained projection on the free part, and returns the
    first split whose primal values and bound multipliers check out.
    """
    n = len(v)
    for states in itertools.product((0, 1, 2), repeat=n):
        w = np.empty(n)
        free = [k for k, s in enumerate(states) if s == 0]
        pinned = 0.0
        for k, s in enumerate(states):
            if s == 1:
                w[k] = lo
                pinned += lo
            elif s == 2:
                w[k] = hi
                pinned += hi
        if free:
            theta = (sum(v[k] for k in free) - (total - pinned)) / len(free)
        else:
            if abs(pinned - total) > 1e-12:
                continue
            # any theta in the interval forced by the pinned multipliers works
            theta_lo = max((v[k] - lo for k, s in enumerate(states) if s == 1),
                           default=-np.inf)
            theta_hi = min((v[k] - hi for k, s in enumerate(states) if s == 2),
                           default=np.inf)
            if theta_lo > theta_hi + 1e-12:
                continue
            theta = min(max(0.0, theta_lo), theta_hi)
        ok = True
        for k, s in enumerate(states):
            if s == 0:
                w[k] = v[k] - theta
                ok &= lo - 1e-12 <= w[k] <= hi + 1e-12
            elif s == 1:
                ok &= theta - v[k] + lo >= -1e-12
            else:
                ok &= v[k] - hi - theta >= -1e-12
        if ok:
            return w
    raise AssertionError("no KKT split found")


def test_hyperplane_projection_examples():
    assert_allclose(project_shares([[0.7], [0.7]], [1.0]), [[0.5], [0.5]])
    assert_allclose(project_shares([[0.5], [0.5]], [1.0]), [[0.5], [0.5]])


def test_simplex_projection_example():
    out = project_shares([[1.2], [0.4], [-0.6]], [1.0], nonneg=True)
    assert_allclose(out.ravel(), [0.9, 0.1, 0.0])
    expected = brute_force_capped_projection(
        np.array([1.2, 0.4, -0.6]), 1.0, 0.0, np.inf
    )
    assert_allclose(out.ravel(), expected)


def test_capped_projection_against_brute_force(rng):
    for _ in range(50):
        l = int(rng.integers(2, 5))
        v = rng.normal(0.0, 2.0, size=l)
        b = float(rng.uniform(0.2, 3.0))
        for nonneg, cap in ((True, True), (False, True)):
            got = project_shares(v.reshape(l, 1), [b], nonneg=nonneg, cap=cap)
            lo = 0.0 if nonneg else -np.inf
            want = brute_force_capped_projection(v, b, lo, b)
            assert_allclose(got.ravel(), want, atol=1e-9)
            assert abs(got.sum() - b) <= 1e-10


def test_capped_projection_example():
    out = project_shares([[2.0], [0.5]], [1.0], cap=True)
    assert_allclose(out.ravel(), [1.0, 0.0], atol=1e-10)
    out = project_shares([[-1.0], [0.6], [2.0]], [1.0], nonneg=True, cap=True)
    assert_allclose(out.ravel(), [0.0, 0.0, 1.0], atol=1e-10)


def test_infeasible_flags_raise():
    with pytest.raises(InfeasibleShareSetError):
        project_shares([[0.5], [0.5]], [-1.0], nonneg=True)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-20, 20), min_size=2, max_size=5),
    st.floats(0.1, 5.0),
    st.booleans(),
    st.booleans(),
)
def test_projection_idempotent_and_row_sums(raw, b, nonneg, cap):
    u = project_shares(np.array(raw).reshape(-1, 1), [b], nonneg=nonneg, cap=cap)
    assert abs(u.sum() - b) <= 1e-10
    again = project_shares(u, [b], nonneg=nonneg, cap=cap)
    assert np.allclose(again, u, atol=1e-9)


def test_projection_nonexpansive(rng):
    for _ in range(50):
        v1, v2 = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        b = [1.0, 0.5]
        p1 = project_shares(v1, b, nonneg=True)
        p2 = project_shares(v2, b, nonneg=True)
        assert np.linalg.norm(p1 - p2) <= np.linalg.norm(v1 - v2) + 1e-12


def test_solve_master_fixed_point(s1, penalty):
    res = solve_master(s1, penalty, 1.0, [[0.5], [0.5]])
    assert res.converged and res.iters == 1
    assert_allclose(res.u, [[0.5], [0.5]])
    assert_allclose(res.x, [0.75, 0.75], atol=1e-8)
    assert_allclose(res.g, [[-0.25], [-0.25]], atol=1e-8)


def test_solve_master_slack(s0, penalty):
    res = solve_master(s0, penalty, 1.0, [[2.0], [2.0]])
    assert res.converged
    assert_allclose(res.g, [[0.0], [0.0]], atol=1e-10)
    assert_allclose(res.x, [1.0, 1.0], atol=1e-8)


def scalar_inner_map(c, tau, u):
    """Closed-form subgame solution and master map for scalar players on [0, 10]."""
    u = u.ravel()
    x = np.where(c <= u, c, (c + tau * u) / (1.0 + tau))
    x = np.clip(x, 0.0, 10.0)
    return x, -np.maximum(x - u, 0.0).reshape(-1, 1)


def test_solve_master_from_uneven_start_matches_scalar_oracle(s1, penalty):
    res = solve_master(s1, penalty, 1.0, [[1.0], [0.0]])
    assert res.converged and res.residual_u <= 1e-8

    c = np.array([p.c[0] for p in s1.players])
    u = np.array([[1.0], [0.0]])
    for _ in range(200):
        _, g = scalar_inner_map(c, 1.0, u)
        u = project_shares(u - g, s1.joint.b)
    assert_allclose(res.u, u, atol=1e-7)
    assert_allclose(res.u.ravel(), [0.5, 0.5], atol=1e-7)


def test_master_residual_examples(s0, s1, penalty):
    assert master_residual(s1, penalty, 1.0, [[0.5], [0.5]]) <= 1e-8
    assert master_residual(s0, penalty, 1.0, [[2.0], [2.0]]) <= 1e-12
    # hand value: g = (0, -0.5), projected step moves u by (-0.25, +0.25)
    r = master_residual(s1, penalty, 1.0, [[1.0], [0.0]])
    assert r == pytest.approx(0.25 * np.sqrt(2.0), abs=1e-7)


def test_recover_multipliers(s0, s1, penalty):
    mult, spread = recover_multipliers(penalty, 1.0, [[-0.25], [-0.25]])
    assert_allclose(mult, [[0.25], [0.25]])
    assert spread == 0.0
    mult, spread = recover_multipliers(penalty, 1.0, [[0.0], [0.0]])
    assert_allclose(mult, [[0.0], [0.0]])
    assert spread == 0.0


def test_multiplier_limit_law(s1, penalty):
    """At the symmetric fixed point the multiplier is tau/2 / (1 + tau)."""
    for tau in (1.0, 10.0, 100.0):
        res = solve_master(s1, penalty, tau, [[0.5], [0.5]])
        mult, spread = recover_multipliers(penalty, tau, res.g)
        assert_allclose(mult, np.full((2, 1), 0.5 * tau / (1.0 + tau)), atol=1e-7)
        assert spread <= 1e-7


def test_fejer_monotone_distances(s1, penalty):
    """Plain projection iterates do not move away from the known solution."""
    u_star = np.array([[0.5], [0.5]])
    u = np.array([[1.0], [0.0]])
    cfg = NepConfig()
    dist = np.linalg.norm(u - u_star)
    x0 = None
    for _ in range(30):
        nep = solve_nash(s1, penalty, 1.0, u, x0, cfg)
        assert nep.converged
        x0 = nep.x
        g = master_map(s1, penalty, u, nep.x)
        u = project_shares(u - g, s1.joint.b)
        new_dist = np.linalg.norm(u - u_star)
        assert new_dist <= dist + 1e-7
        dist = new_dist
    assert dist <= 1e-6


def test_inner_failure_aborts_with_diagnostics(s1, penalty):
    cfg = MasterConfig(nep_cfg=NepConfig(tol=1e-15, max_iter=2))
    res = solve_master(s1, penalty, 1.0, [[1.0], [0.0]], cfg)
    assert not res.converged
    assert "subgame solve failed" in res.failure


def test_master_budget_exhaustion(s1, penalty):
    cfg = MasterConfig(max_iter=2, extrapolate=False)
    res = solve_master(s1, penalty, 1.0, [[1.0], [0.0]], cfg)
    assert not res.converged and res.failure == ""
    assert res.iters == 2


def test_step_bound_enforced(s1, penalty):
    with pytest.raises(ValueError):
        solve_master(s1, penalty, 1.0, [[0.5], [0.5]], MasterConfig(lam=2.0))
