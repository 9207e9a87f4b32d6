"""Desk-scale benchmark games.

Three canonical two-player instances with scalar strategies, box [0, 10] and
the single joint constraint x_1 + x_2 <= b:

  s0  slack constraint (b = 4): the unconstrained Nash point is feasible.
  s1  symmetric binding (b = 1): both players want x_i = 1 but must split.
  s2  asymmetric binding (b = 1): player 1 values the resource twice as much.

All three have closed-form equilibria, which makes them the reference
fixtures throughout the test suite.  A seeded generator for random binding
instances (positive-definite curvature, affine constraints, bounded boxes,
skew cross-couplings so the bifunction stays monotone) rounds out the set.
"""

from __future__ import annotations

import numpy as np

from .model import Game, JointConstraintSpec, PlayerSpec


def _scalar_two_player(name, c1, c2, b):
    players = (
        PlayerSpec(c=[c1], Q=[[1.0]], lower=[0.0], upper=[10.0]),
        PlayerSpec(c=[c2], Q=[[1.0]], lower=[0.0], upper=[10.0]),
    )
    joint = JointConstraintSpec(A=([[1.0]], [[1.0]]), a=([0.0], [0.0]), b=[b])
    return Game(players=players, joint=joint, name=name)


def slack_game():
    """s0: joint constraint never binds; equilibrium (1, 1) with zero multiplier."""
    return _scalar_two_player("s0", 1.0, 1.0, 4.0)


def symmetric_binding_game():
    """s1: equilibrium (0.5, 0.5) with shared multiplier 0.5."""
    return _scalar_two_player("s1", 1.0, 1.0, 1.0)


def asymmetric_binding_game():
    """s2: equilibrium (1, 0) with shared multiplier 1."""
    return _scalar_two_player("s2", 2.0, 1.0, 1.0)


def adversarial_coupling_game():
    """Strong symmetric cross-coupling that breaks bifunction monotonicity."""
    players = (
        PlayerSpec(c=[1.0], Q=[[1.0]], lower=[0.0], upper=[10.0],
                   coupling={1: [[3.0]]}),
        PlayerSpec(c=[1.0], Q=[[1.0]], lower=[0.0], upper=[10.0],
                   coupling={0: [[3.0]]}),
    )
    joint = JointConstraintSpec(A=([[1.0]], [[1.0]]), a=([0.0], [0.0]), b=[1.0])
    return Game(players=players, joint=joint, name="adversarial")


def benchmark_games():
    return {
        "s0": slack_game(),
        "s1": symmetric_binding_game(),
        "s2": asymmetric_binding_game(),
    }


def random_binding_game(rng, name=""):
    """Draw one random binding instance from a seeded generator.

    l in {2, 3} players with 1- or 2-dimensional strategies, m in {1, 2}
    affine joint constraints with nonnegative coefficients, positive-definite
    own curvature, boxes [0, 3..6], and (half the time) skew cross-couplings
    R_ji = -R_ij' that cancel in the monotonicity pairing.  The right-hand
    side is set to a fraction of the joint demand at the unconstrained Nash
    point, so the constraint binds while the origin stays feasible.
    """
    while True:
        l = int(rng.integers(2, 4))
        m = int(rng.integers(1, 3))
        dims = [int(rng.integers(1, 3)) for _ in range(l)]

        specs = []
        for n_i in dims:
            W = rng.normal(size=(n_i, n_i))
            Q = W @ W.T / n_i + 0.5 * np.eye(n_i)
            c = rng.uniform(0.5, 2.0, size=n_i)
            upper = rng.uniform(3.0, 6.0, size=n_i)
            specs.append(dict(c=c, Q=Q, lower=np.zeros(n_i), upper=upper, coupling={}))

        if rng.random() < 0.5:
            for i in range(l):
                for j in range(i + 1, l):
                    R = 0.1 * rng.normal(size=(dims[i], dims[j]))
                    specs[i]["coupling"][j] = R
                    specs[j]["coupling"][i] = -R.T

        players = tuple(PlayerSpec(**s) for s in specs)
        A = tuple(rng.uniform(0.2, 1.2, size=(m, n_i)) for n_i in dims)
        a = tuple(np.zeros(m) for _ in range(l))

        # joint demand at the (box-clipped) unconstrained Nash point
        game0 = Game(players=players,
                     joint=JointConstraintSpec(A=A, a=a, b=np.ones(m)), name="")
        from .model import pseudo_gradient_affine

        M, c_all = pseudo_gradient_affine(game0)
        x_hat = np.clip(np.linalg.solve(M, c_all), game0.lower, game0.upper)
        demand = sum(A[i] @ x_hat[game0.block(i)] for i in range(l))
        if np.min(demand) < 0.5:
            continue
        b = rng.uniform(0.4, 0.9, size=m) * demand
        joint = JointConstraintSpec(A=A, a=a, b=b)
        return Game(players=players, joint=joint, name=name)


def benchmark_document(key):
    """Full problem document (dict) for one of the shipped benchmarks."""
    game = benchmark_games()[key]
    doc = {
        "name": game.name,
        "players": [
            {
                "n": p.n,
                "c": p.c.tolist(),
                "Q": p.Q.tolist(),
                "lower": p.lower.tolist(),
                "upper": p.upper.tolist(),
            }
            for p in game.players
        ],
        "joint": {
            "m": game.m,
            "A": [Ai.tolist() for Ai in game.joint.A],
            "a": [ai.tolist() for ai in game.joint.a],
            "b": game.joint.b.tolist(),
        },
        "shares": {"nonneg": False, "cap": False},
        "penalty": {"kind": "quadratic_plus"},
        "schedule": {"tau0": 1.0, "rho": 10.0, "k_max": 5},
        "solver": {},
    }
    return doc
