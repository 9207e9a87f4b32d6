"""Decomposable share penalties and the master allocation map.

A share allocation is an (l, m) array whose row i is player i's slice u_i of
the joint right-hand side b, with sum_i u_i = b.  Player i is penalized by
P_i(x_i, u_i) = phi(h_i(x_i) - u_i) for overshooting its slice, where phi
vanishes on the nonpositive orthant and is convex, differentiable and
isotone.  The master map g collects the (negated) penalty gradients in the
share variables; its variational inequality over the allocation set selects
optimal slices.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, InfeasibleShareSetError
from .model import check_profile, constraint_jacobian, constraint_values


class QuadraticPlusPenalty:
    """Half squared norm of the positive part: value 0.5*||[v]_+||^2.

    The gradient [v]_+ is 1-Lipschitz, hence co-coercive with constant
    gamma = 1; that constant bounds the admissible master step length.
    """

    kind = "quadratic_plus"
    gamma = 1.0

    @staticmethod
    def value(v):
        pos = np.maximum(np.asarray(v, dtype=float), 0.0)
        return 0.5 * float(pos @ pos)

    @staticmethod
    def grad(v):
        return np.maximum(np.asarray(v, dtype=float), 0.0)


PENALTY_KINDS = {QuadraticPlusPenalty.kind: QuadraticPlusPenalty}


def make_penalty(kind):
    try:
        return PENALTY_KINDS[kind]()
    except KeyError:
        raise ValueError(f"unknown penalty kind {kind!r}; known: {sorted(PENALTY_KINDS)}")


def _check_share(game, u_i, i):
    u_i = np.asarray(u_i, dtype=float).reshape(-1)
    if u_i.shape[0] != game.m:
        raise DimensionError(f"u[{i}]: expected length {game.m}, got {u_i.shape[0]}")
    return u_i


def check_allocation(game, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (game.l, game.m):
        raise DimensionError(f"shares: expected shape {(game.l, game.m)}, got {u.shape}")
    return u


def player_penalty(game, penalty, i, x_i, u_i):
    """P_i(x_i, u_i); zero exactly when h_i(x_i) <= u_i."""
    x_i = np.asarray(x_i, dtype=float).reshape(-1)
    if x_i.shape[0] != game.players[i].n:
        raise DimensionError(f"x[{i}]: expected length {game.players[i].n}, got {x_i.shape[0]}")
    u_i = _check_share(game, u_i, i)
    h = game.joint.a[i] + game.joint.A[i] @ x_i
    if game.joint.C is not None:
        h = h + np.array([x_i @ Cij @ x_i for Cij in game.joint.C[i]])
    return penalty.value(h - u_i)


def total_penalty(game, penalty, x, u):
    """Sum of the per-player share penalties at (x, u)."""
    x = check_profile(game, x)
    u = check_allocation(game, u)
    h = constraint_values(game, x)
    return float(sum(penalty.value(h[i] - u[i]) for i in range(game.l)))


def player_penalty_grad(game, penalty, i, x_i, u_i):
    """Gradient of P_i in x_i (chain rule through h_i)."""
    x_i = np.asarray(x_i, dtype=float).reshape(-1)
    if x_i.shape[0] != game.players[i].n:
        raise DimensionError(f"x[{i}]: expected length {game.players[i].n}, got {x_i.shape[0]}")
    u_i = _check_share(game, u_i, i)
    h = game.joint.a[i] + game.joint.A[i] @ x_i
    if game.joint.C is not None:
        h = h + np.array([x_i @ Cij @ x_i for Cij in game.joint.C[i]])
    return constraint_jacobian(game, i, x_i).T @ penalty.grad(h - u_i)


def master_map(game, penalty, u, x):
    """(l, m) master map value g at shares u, given the subgame solution x.

    Row i is -phi'(h_i(x_i) - u_i): nonpositive, and zero exactly where
    player i respects its share.  x must (approximately) solve the penalized
    subgame at u so that the value is meaningful for the master iteration.
    """
    x = check_profile(game, x)
    u = check_allocation(game, u)
    h = constraint_values(game, x)
    return np.vstack([-penalty.grad(h[i] - u[i]) for i in range(game.l)])


def _box_max_affine_row(game, i, t):
    """Max of h_i[t] over player i's box for affine h; +inf on unbounded sides."""
    row = game.joint.A[i][t]
    lo, up = game.players[i].lower, game.players[i].upper
    hi = game.joint.a[i][t]
    for k, coef in enumerate(row):
        if coef > 0:
            hi += coef * up[k] if np.isfinite(up[k]) else np.inf
        elif coef < 0:
            hi += coef * lo[k] if np.isfinite(lo[k]) else np.inf
    return hi


def validate_shares(game, nonneg=False, cap=False):
    """Check the share-set restrictions against the game.

    Raises InfeasibleShareSetError when a flag makes the allocation set
    empty (negative right-hand side component with nonneg or cap).  Returns
    warnings when restricted shares may fail to cover some feasible
    strategies, i.e. when a player's constraint can exceed every admissible
    slice; the unrestricted set always covers the feasible region.
    """
    b = game.joint.b
    if (nonneg or cap) and np.any(b < 0.0):
        raise InfeasibleShareSetError(
            "nonneg/cap share restrictions require a nonnegative right-hand side"
        )
    findings = []
    if not (nonneg or cap):
        return findings
    if not game.joint.affine:
        findings.append(
            "share coverage not checked: joint constraints have quadratic terms"
        )
        return findings
    for t in range(game.m):
        worst = 0.0
        for i in range(game.l):
            hi = _box_max_affine_row(game, i, t)
            if cap and hi > b[t]:
                findings.append(
                    f"player {i}, constraint {t}: demand can exceed the per-player cap"
                )
            worst += max(hi, 0.0) if nonneg else hi
        if nonneg and worst > b[t]:
            findings.append(
                f"constraint {t}: restricted shares may not cover all feasible strategies"
            )
    return findings
