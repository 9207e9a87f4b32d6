"""Quadratic game model with box strategy sets and joint resource constraints.

A game couples l players. Player i controls a block x_i in R^{n_i}, kept in a
box, and receives the concave-quadratic payoff

    f_i(x) = c_i.x_i - 0.5 x_i'Q_i x_i + sum_{j != i} x_i' R_ij x_j.

All players share a joint constraint sum_i h_i(x_i) <= b, where each row of
h_i is affine plus an optional convex-quadratic term:

    h_i(x_i)[t] = a_i[t] + (A_i x_i)[t] + x_i' C_i[t] x_i.

This module houses the data types, payoff/constraint evaluation, the
Nikaido-Isoda bifunction of the game, its pseudo-gradient map, and the box
projection used by the equilibrium solvers.  All evaluation functions are
pure; a Game is immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError, InvalidGameError

EPS_PSD = 1e-10  # eigenvalue slack for positive-semidefiniteness checks
EPS_NUM = 1e-9   # slack for exact-identity property checks

# Active-set enumeration budget shared with the verification oracle.
ORACLE_MAX_DIM = 12
ORACLE_MAX_JOINT = 4


def _as_vector(a, length=None, what="vector"):
    out = np.array(a, dtype=float).reshape(-1)
    if length is not None and out.shape[0] != length:
        raise DimensionError(f"{what}: expected length {length}, got {out.shape[0]}")
    return out


def _as_matrix(a, shape=None, what="matrix"):
    out = np.atleast_2d(np.array(a, dtype=float))
    if shape is not None and out.shape != shape:
        raise DimensionError(f"{what}: expected shape {shape}, got {out.shape}")
    return out


def _freeze(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PlayerSpec:
    """One player's payoff data and box strategy set.

    coupling maps the index j of another player to the cross matrix R_ij of
    shape (n_i, n_j); absent keys mean no coupling with that player.
    """

    c: np.ndarray
    Q: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    coupling: dict = field(default_factory=dict)

    def __post_init__(self):
        c = _freeze(_as_vector(self.c, what="c"))
        n = c.shape[0]
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "Q", _freeze(_as_matrix(self.Q, (n, n), "Q")))
        object.__setattr__(self, "lower", _freeze(_as_vector(self.lower, n, "lower")))
        object.__setattr__(self, "upper", _freeze(_as_vector(self.upper, n, "upper")))
        object.__setattr__(
            self,
            "coupling",
            {int(j): _freeze(np.array(R, dtype=float)) for j, R in self.coupling.items()},
        )

    @property
    def n(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class JointConstraintSpec:
    """Joint constraint sum_i h_i(x_i) <= b.

    A and a hold one (m, n_i) matrix / (m,) offset per player; C is either
    None (affine constraints) or one list of m PSD (n_i, n_i) matrices per
    player (all-zero matrices are allowed).
    """

    A: tuple
    a: tuple
    b: np.ndarray
    C: tuple | None = None

    def __post_init__(self):
        b = _freeze(_as_vector(self.b, what="b"))
        m = b.shape[0]
        A = tuple(_freeze(_as_matrix(Ai, what=f"A[{i}]")) for i, Ai in enumerate(self.A))
        for i, Ai in enumerate(A):
            if Ai.shape[0] != m:
                raise DimensionError(f"A[{i}]: expected {m} rows, got {Ai.shape[0]}")
        a = tuple(_freeze(_as_vector(ai, m, f"a[{i}]")) for i, ai in enumerate(self.a))
        if len(a) != len(A):
            raise DimensionError("a: need one offset vector per player")
        C = self.C
        if C is not None:
            C = tuple(
                tuple(_freeze(_as_matrix(Cij, what=f"C[{i}][{j}]")) for j, Cij in enumerate(Ci))
                for i, Ci in enumerate(C)
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "C", C)

    @property
    def m(self):
        return self.b.shape[0]

    @property
    def affine(self):
        return self.C is None or all(
            not np.any(Cij) for Ci in self.C for Cij in Ci
        )


@dataclass(frozen=True)
class Game:
    """Immutable game instance: players plus one joint constraint block."""

    players: tuple
    joint: JointConstraintSpec
    name: str = ""

    def __post_init__(self):
        players = tuple(self.players)
        object.__setattr__(self, "players", players)
        if len(players) < 1:
            raise InvalidGameError("need at least one player")
        if len(self.joint.A) != len(players):
            raise DimensionError("joint constraint maps: need one per player")
        for i, p in enumerate(players):
            if self.joint.A[i].shape[1] != p.n:
                raise DimensionError(
                    f"A[{i}]: expected {p.n} columns, got {self.joint.A[i].shape[1]}"
                )
            for j, R in p.coupling.items():
                if j < 0 or j >= len(players) or j == i:
                    raise InvalidGameError(f"player {i}: coupling index {j} out of range")
                want = (p.n, players[j].n)
                if R.shape != want:
                    raise DimensionError(f"R[{i}][{j}]: expected shape {want}, got {R.shape}")

    @property
    def l(self):
        return len(self.players)

    @property
    def m(self):
        return self.joint.m

    @cached_property
    def n(self):
        return sum(p.n for p in self.players)

    @cached_property
    def offsets(self):
        """Start offset of each player's block in a stacked strategy vector."""
        off = np.zeros(self.l + 1, dtype=int)
        for i, p in enumerate(self.players):
            off[i + 1] = off[i] + p.n
        return off

    def block(self, i):
        off = self.offsets
        return slice(int(off[i]), int(off[i + 1]))

    @cached_property
    def lower(self):
        return _freeze(np.concatenate([p.lower for p in self.players]))

    @cached_property
    def upper(self):
        return _freeze(np.concatenate([p.upper for p in self.players]))


def check_profile(game, x, what="x"):
    """Coerce x to a stacked strategy vector of the game's full dimension."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != game.n:
        raise DimensionError(f"{what}: expected length {game.n}, got {x.shape[0]}")
    return x


def split(game, x):
    """Views of x, one per player block."""
    return [x[game.block(i)] for i in range(game.l)]


def payoff(game, i, x):
    """Player i's payoff f_i at the full strategy profile x."""
    x = check_profile(game, x)
    p = game.players[i]
    xi = x[game.block(i)]
    val = p.c @ xi - 0.5 * xi @ p.Q @ xi
    for j, R in p.coupling.items():
        val += xi @ R @ x[game.block(j)]
    return float(val)


def nikaido_isoda(game, x, y):
    """Nikaido-Isoda bifunction of the game.

    Sum over players of the payoff drop when player i deviates from x_i to
    y_i while everyone else stays at x.  Zero on the diagonal, convex in y.
    """
    x = check_profile(game, x)
    y = check_profile(game, y, "y")
    total = 0.0
    for i, p in enumerate(game.players):
        xi = x[game.block(i)]
        yi = y[game.block(i)]
        d = xi - yi
        total += p.c @ d - 0.5 * (xi @ p.Q @ xi - yi @ p.Q @ yi)
        for j, R in p.coupling.items():
            total += d @ R @ x[game.block(j)]
    return float(total)


def pseudo_gradient(game, x):
    """Stacked map F(x) with blocks F_i(x) = -grad_{x_i} f_i(x).

    This is the monotone operator of the equilibrium variational inequality:
    it equals the y-gradient of the Nikaido-Isoda bifunction at y = x.
    """
    x = check_profile(game, x)
    out = np.empty_like(x)
    for i, p in enumerate(game.players):
        gi = p.Q @ x[game.block(i)] - p.c
        for j, R in p.coupling.items():
            gi -= R @ x[game.block(j)]
        out[game.block(i)] = gi
    return out


def pseudo_gradient_affine(game):
    """Matrices (M, c) with F(x) = M x - c; valid for the quadratic payoff class."""
    n = game.n
    M = np.zeros((n, n))
    c = np.empty(n)
    for i, p in enumerate(game.players):
        bi = game.block(i)
        M[bi, bi] = p.Q
        c[bi] = p.c
        for j, R in p.coupling.items():
            M[bi, game.block(j)] = -R
    return M, c


def constraint_values(game, x):
    """(l, m) array of per-player joint-constraint contributions h_i(x_i)."""
    x = check_profile(game, x)
    out = np.empty((game.l, game.m))
    for i in range(game.l):
        xi = x[game.block(i)]
        row = game.joint.a[i] + game.joint.A[i] @ xi
        if game.joint.C is not None:
            row = row + np.array([xi @ Cij @ xi for Cij in game.joint.C[i]])
        out[i] = row
    return out


def constraint_jacobian(game, i, x_i):
    """(m, n_i) Jacobian of h_i at x_i."""
    J = game.joint.A[i]
    if game.joint.C is not None:
        J = J + 2.0 * np.array([Cij @ x_i for Cij in game.joint.C[i]])
    return J


def joint_violation(game, x):
    """Componentwise positive part of sum_i h_i(x_i) - b."""
    return np.maximum(constraint_values(game, x).sum(axis=0) - game.joint.b, 0.0)


def project_box(game, z):
    """Euclidean projection onto the product of the players' boxes."""
    z = check_profile(game, z, "z")
    return np.clip(z, game.lower, game.upper)


def _check_sym_psd(Mat, label, findings, hard):
    if not np.allclose(Mat, Mat.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(Mat).max(initial=0.0)))):
        raise InvalidGameError(f"{label} is not symmetric")
    if Mat.size == 0:
        return
    w = np.linalg.eigvalsh(Mat)
    if w.min() < -EPS_PSD:
        raise InvalidGameError(f"{label} has negative eigenvalue {w.min():.3e}; {hard}")
    if w.min() <= EPS_PSD:
        findings.append(f"{label} is singular within tolerance")


def validate_game(game, feasibility_check=True):
    """Validate game data; raise InvalidGameError on hard violations.

    Returns a list of warning strings (empty for a clean instance):
    singular payoff curvature (equilibria of the penalized subgames may be
    non-unique) and unbounded strategy boxes without strict concavity
    (existence of those equilibria is then not guaranteed).  When the joint
    constraints are affine and the instance is within the enumeration budget,
    also verifies that the common feasible set is nonempty.
    """
    findings = []
    singular = []
    for i, p in enumerate(game.players):
        if np.any(p.lower > p.upper):
            raise InvalidGameError(f"player {i}: lower bound exceeds upper bound")
        sub = []
        _check_sym_psd(p.Q, f"player {i}: Q", sub, "payoff is not concave in own strategy")
        if sub:
            singular.append(i)
        for j, R in sorted(p.coupling.items()):
            if not np.all(np.isfinite(R)):
                raise InvalidGameError(f"player {i}: coupling R[{j}] has non-finite entries")
    if singular:
        findings.append(
            "singular payoff curvature for players "
            f"{singular}: equilibrium of the penalized subgames may be non-unique"
        )
    if game.joint.C is not None:
        for i, Ci in enumerate(game.joint.C):
            for t, Cij in enumerate(Ci):
                _check_sym_psd(Cij, f"C[{i}][{t}]", [], "joint constraint row is not convex")

    unbounded = not (np.all(np.isfinite(game.lower)) and np.all(np.isfinite(game.upper)))
    if unbounded and singular:
        findings.append(
            "unbounded strategy box without strictly concave payoffs: "
            "penalized subgames may have no solution"
        )

    if (
        feasibility_check
        and game.joint.affine
        and not unbounded
        and game.n <= ORACLE_MAX_DIM
        and game.m <= ORACLE_MAX_JOINT
    ):
        if not _common_set_nonempty(game):
            raise InvalidGameError("common feasible set is empty")
    return findings


def _common_set_nonempty(game):
    """LP feasibility check for {x in box : sum_i h_i(x_i) <= b}, affine h."""
    from scipy.optimize import linprog

    n, m = game.n, game.m
    Ahat = np.hstack([game.joint.A[i] for i in range(game.l)])
    rhs = game.joint.b - sum(game.joint.a)
    # minimize t subject to Ahat x - t <= rhs, x in box; D nonempty iff min t <= 0
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([Ahat, -np.ones((m, 1))])
    bounds = [
        (lo if np.isfinite(lo) else None, up if np.isfinite(up) else None)
        for lo, up in zip(game.lower, game.upper)
    ] + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=rhs, bounds=bounds, method="highs")
    return res.status == 0 and res.fun <= 1e-9
