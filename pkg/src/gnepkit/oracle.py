"""Ground-truth oracle and property-check batteries.

The oracle enumerates KKT active sets for a normalized equilibrium (one
multiplier vector shared by all players) of a quadratic game with affine
joint constraints.  At desk scale this is exact: every combination of tight
joint constraints and box faces yields a linear system; candidates passing
feasibility, sign, and complementarity checks are collected and deduplicated,
and the oracle insists on a unique survivor.

The batteries sample, with a fixed seed, the structural properties the
solvers rely on: monotonicity of the game's bifunction, co-coercivity of the
master map, and agreement of every analytic gradient with central finite
differences.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    OracleBudgetError,
    OracleNoSolutionError,
    OracleNonUniqueError,
)
from .model import (
    ORACLE_MAX_DIM,
    ORACLE_MAX_JOINT,
    check_profile,
    constraint_values,
    joint_violation,
    nikaido_isoda,
    payoff,
    pseudo_gradient,
    pseudo_gradient_affine,
)
from .nash import NepConfig, solve_nash
from .penalty import master_map, player_penalty, player_penalty_grad
from .shares import project_shares

EPS_KKT = 1e-10
TIGHT_TOL = 1e-8


@dataclass(frozen=True)
class GroundTruth:
    """Normalized equilibrium certificate from the enumeration oracle."""

    x: np.ndarray
    lam: np.ndarray
    active_joint: tuple
    active_lower: tuple
    active_upper: tuple
    residual: float


def _require_budget(game):
    if game.n > ORACLE_MAX_DIM or game.m > ORACLE_MAX_JOINT:
        raise OracleBudgetError(
            f"instance ({game.n} variables, {game.m} joint constraints) exceeds the "
            f"enumeration budget ({ORACLE_MAX_DIM}, {ORACLE_MAX_JOINT})"
        )
    if not game.joint.affine:
        raise OracleNoSolutionError("oracle requires affine joint constraints")


def _bound_options(lower, upper):
    """Per-coordinate candidate states: 0 free, 1 at lower, 2 at upper."""
    options = []
    for lo, up in zip(lower, upper):
        if lo == up:
            options.append((1,))
            continue
        opts = [0]
        if np.isfinite(lo):
            opts.append(1)
        if np.isfinite(up):
            opts.append(2)
        options.append(tuple(opts))
    return options


def _kkt_candidates(M, c, Ahat, tight_rhs, slack_offset, lower, upper):
    """Yield (x, lam, residual) for every consistent active-set combination.

    Solves the stationarity system M x - c + Ahat' lam = mu restricted to the
    chosen tight joint rows and box faces; candidates violating feasibility
    or multiplier signs beyond EPS_KKT are dropped.
    """
    n = c.shape[0]
    m = Ahat.shape[0]
    options = _bound_options(lower, upper)
    for mask in range(2**m):
        S = [j for j in range(m) if mask >> j & 1]
        AS = Ahat[S]
        for state in itertools.product(*options):
            act = [k for k, s in enumerate(state) if s != 0]
            free = [k for k, s in enumerate(state) if s == 0]
            v_act = np.array(
                [lower[k] if state[k] == 1 else upper[k] for k in act], dtype=float
            )
            size = len(free) + len(S)
            K = np.zeros((size, size))
            r = np.empty(size)
            nf = len(free)
            K[:nf, :nf] = M[np.ix_(free, free)]
            K[:nf, nf:] = AS[:, free].T
            K[nf:, :nf] = AS[:, free]
            r[:nf] = c[free] - M[np.ix_(free, act)] @ v_act
            r[nf:] = tight_rhs[S] - AS[:, act] @ v_act
            try:
                z = np.linalg.solve(K, r)
                z -= np.linalg.solve(K, K @ z - r)  # one refinement step
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(z)):
                continue
            x = np.empty(n)
            x[free] = z[:nf]
            x[act] = v_act
            lam = np.zeros(m)
            lam[S] = z[nf:]

            slack = Ahat @ x + slack_offset
            stat = M @ x - c + Ahat.T @ lam
            bad = max(
                float(np.max(lower - x, initial=0.0)),
                float(np.max(x - upper, initial=0.0)),
                float(np.max(slack, initial=0.0)),
                float(np.max(-lam[S], initial=0.0)) if S else 0.0,
                float(np.max(np.abs(stat[free]), initial=0.0)),
                float(np.max(np.abs(slack[S]), initial=0.0)) if S else 0.0,
            )
            for k in act:
                mu = stat[k] if state[k] == 1 else -stat[k]
                bad = max(bad, -float(mu))
            if bad > EPS_KKT:
                continue
            yield x, np.maximum(lam, 0.0), bad


def oracle_solve(game):
    """Exact normalized equilibrium of a desk-scale quadratic game.

    Raises OracleBudgetError beyond the enumeration budget,
    OracleNoSolutionError when no KKT candidate survives (typically an empty
    feasible set), and OracleNonUniqueError when several distinct candidates
    do.
    """
    _require_budget(game)
    M, c = pseudo_gradient_affine(game)
    Ahat = np.hstack([game.joint.A[i] for i in range(game.l)])
    a_sum = sum(game.joint.a)
    tight_rhs = game.joint.b - a_sum
    slack_offset = a_sum - game.joint.b

    unique = []
    for x, lam, bad in _kkt_candidates(
        M, c, Ahat, tight_rhs, slack_offset, game.lower, game.upper
    ):
        for xc, lamc, _ in unique:
            if np.allclose(x, xc, rtol=0.0, atol=1e-8) and np.allclose(
                lam, lamc, rtol=0.0, atol=1e-8
            ):
                break
        else:
            unique.append((x, lam, bad))
    if not unique:
        raise OracleNoSolutionError(
            "no KKT candidate passed the checks (feasible set empty or data degenerate)"
        )
    if len(unique) > 1:
        raise OracleNonUniqueError([(x, lam) for x, lam, _ in unique])

    x, lam, bad = unique[0]
    slack = Ahat @ x + slack_offset
    active_joint = tuple(j for j in range(game.m) if slack[j] >= -TIGHT_TOL)
    active_lower = []
    active_upper = []
    for i, p in enumerate(game.players):
        xi = x[game.block(i)]
        active_lower.append(tuple(k for k in range(p.n) if xi[k] - p.lower[k] <= TIGHT_TOL))
        active_upper.append(tuple(k for k in range(p.n) if p.upper[k] - xi[k] <= TIGHT_TOL))
    return GroundTruth(
        x=x, lam=lam, active_joint=active_joint,
        active_lower=tuple(active_lower), active_upper=tuple(active_upper),
        residual=bad,
    )


def _deviation_set_nonempty(A, rhs, lower, upper):
    """LP feasibility of {y in box : A y <= rhs}."""
    from scipy.optimize import linprog

    m, n = A.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([A, -np.ones((m, 1))])
    bounds = [
        (lo if np.isfinite(lo) else None, up if np.isfinite(up) else None)
        for lo, up in zip(lower, upper)
    ] + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=rhs, bounds=bounds, method="highs")
    return res.status == 0 and res.fun <= 1e-9


def check_is_gne(game, x, tol=1e-8):
    """Per-player best-response gain at x; entries <= tol certify that no
    player has a profitable feasible deviation.

    Each player's best response given the others is a box QP with the joint
    constraint rows, solved exactly by the same active-set enumeration.  A
    player whose deviation set is empty (x may sit slightly outside the
    common feasible set) trivially cannot improve and scores zero.
    """
    _require_budget(game)
    x = check_profile(game, x)
    h = constraint_values(game, x)
    violations = np.empty(game.l)
    for i, p in enumerate(game.players):
        c_eff = p.c.copy()
        for j, R in p.coupling.items():
            c_eff = c_eff + R @ x[game.block(j)]
        r_i = game.joint.b - (h.sum(axis=0) - h[i])  # room left for player i
        best = None
        for y, lam, bad in _kkt_candidates(
            p.Q, c_eff, game.joint.A[i], r_i - game.joint.a[i],
            game.joint.a[i] - r_i, p.lower, p.upper,
        ):
            val = float(c_eff @ y - 0.5 * y @ p.Q @ y)
            if best is None or val > best:
                best = val
        if best is None:
            if not _deviation_set_nonempty(
                game.joint.A[i], r_i - game.joint.a[i], p.lower, p.upper
            ):
                violations[i] = 0.0
                continue
            raise OracleNoSolutionError(
                f"player {i}: best-response problem has no KKT point"
            )
        xi = x[game.block(i)]
        violations[i] = best - float(c_eff @ xi - 0.5 * xi @ p.Q @ xi)
    return violations


def sample_box(game, rng, count, radius=10.0):
    """(count, n) points uniform in the box, infinite sides clipped to +-radius."""
    lo = np.where(np.isfinite(game.lower), game.lower, -radius)
    up = np.where(np.isfinite(game.upper), game.upper, radius)
    up = np.maximum(up, lo)
    return rng.uniform(lo, up, size=(count, game.n))


def sample_feasible(game, rng, count, radius=10.0, max_batches=500):
    """(count, n) box points satisfying the joint constraint, by rejection."""
    out = []
    b = game.joint.b
    for _ in range(max_batches):
        batch = sample_box(game, rng, 4096, radius)
        for x in batch:
            if np.all(constraint_values(game, x).sum(axis=0) <= b):
                out.append(x)
                if len(out) == count:
                    return np.array(out)
    raise RuntimeError(
        f"could not draw {count} feasible points in {max_batches} batches; "
        "the feasible set is too small for rejection sampling"
    )


def sample_allocations(game, rng, count, scale=None):
    """(count, l, m) share allocations around the even split, rows summing to b."""
    b = game.joint.b
    if scale is None:
        scale = (float(np.abs(b).max(initial=0.0)) + 1.0) / game.l
    base = np.tile(b / game.l, (game.l, 1))
    out = np.empty((count, game.l, game.m))
    for s in range(count):
        out[s] = project_shares(base + rng.normal(0.0, scale, size=(game.l, game.m)), b)
    return out


def check_bifunction_monotone(game, n_pairs=100, seed=0, radius=10.0):
    """Max of Phi(x', x'') + Phi(x'', x') over seeded box pairs; <= 0 is monotone."""
    rng = np.random.default_rng(seed)
    pts = sample_box(game, rng, 2 * n_pairs, radius)
    worst = -np.inf
    for k in range(n_pairs):
        xp, xq = pts[2 * k], pts[2 * k + 1]
        worst = max(worst, nikaido_isoda(game, xp, xq) + nikaido_isoda(game, xq, xp))
    return float(worst)


def check_master_map_cocoercive(game, penalty, tau, n_pairs=50, seed=0, nep_cfg=None):
    """Max violation of <du, dg> >= gamma * ||dg||^2 over seeded allocation pairs.

    Inner subgames are solved to nep_cfg accuracy; the reported violation can
    be slightly positive from that inexactness alone.
    """
    rng = np.random.default_rng(seed)
    nep_cfg = nep_cfg or NepConfig()
    us = sample_allocations(game, rng, 2 * n_pairs)
    worst = -np.inf
    for k in range(n_pairs):
        up_, uq = us[2 * k], us[2 * k + 1]
        rp = solve_nash(game, penalty, tau, up_, cfg=nep_cfg)
        rq = solve_nash(game, penalty, tau, uq, cfg=nep_cfg)
        if not (rp.converged and rq.converged):
            raise RuntimeError(f"inner solve failed at tau={tau:g} during sampling")
        dg = (master_map(game, penalty, up_, rp.x) - master_map(game, penalty, uq, rq.x)).ravel()
        du = (up_ - uq).ravel()
        worst = max(worst, penalty.gamma * float(dg @ dg) - float(du @ dg))
    return float(worst)


def gradient_check(game, penalty, tau, u, x, step=1e-6):
    """Max relative error of the analytic maps against central differences.

    Covers the pseudo-gradient, the per-player penalty gradients in x, and
    the penalty function's own gradient at the slack vectors h_i(x_i) - u_i;
    step must lie in [1e-8, 1e-4].
    """
    if not 1e-8 <= step <= 1e-4:
        raise ValueError("step must lie in [1e-8, 1e-4]")
    x = check_profile(game, x)
    u = np.asarray(u, dtype=float).reshape(game.l, game.m)
    worst = 0.0

    grad = pseudo_gradient(game, x)
    for i in range(game.l):
        blk = game.block(i)
        for k in range(game.players[i].n):
            zp, zm = x.copy(), x.copy()
            zp[blk.start + k] += step
            zm[blk.start + k] -= step
            fd = -(payoff(game, i, zp) - payoff(game, i, zm)) / (2.0 * step)
            an = grad[blk.start + k]
            worst = max(worst, abs(fd - an) / max(1.0, abs(an)))

        xi = x[blk]
        pgrad = player_penalty_grad(game, penalty, i, xi, u[i])
        for k in range(game.players[i].n):
            zp, zm = xi.copy(), xi.copy()
            zp[k] += step
            zm[k] -= step
            fd = (
                player_penalty(game, penalty, i, zp, u[i])
                - player_penalty(game, penalty, i, zm, u[i])
            ) / (2.0 * step)
            worst = max(worst, abs(fd - pgrad[k]) / max(1.0, abs(pgrad[k])))

        v = constraint_values(game, x)[i] - u[i]
        an_v = penalty.grad(v)
        for t in range(game.m):
            vp, vm = v.copy(), v.copy()
            vp[t] += step
            vm[t] -= step
            fd = (penalty.value(vp) - penalty.value(vm)) / (2.0 * step)
            worst = max(worst, abs(fd - an_v[t]) / max(1.0, abs(an_v[t])))
    return worst
