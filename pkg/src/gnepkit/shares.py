"""Master variational inequality over share allocations.

The master problem picks shares u* in the allocation set U (rows summing to
the joint right-hand side b, optionally restricted to nonnegative or capped
slices) such that <g(u*), u - u*> >= 0 for all u in U, where g is the master
map assembled from the penalized subgame solution at u.  Because g is
co-coercive with the penalty gradient's constant gamma, the fixed-step
projection iteration u <- proj_U(u - lam * g(u)) converges for any step lam
in (0, 2*gamma); we stop on the natural residual in u, not on the norm of g,
since g need not vanish at solutions (it only has to lie in the normal cone).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleShareSetError
from .nash import NepConfig, solve_nash
from .penalty import check_allocation, master_map

log = logging.getLogger(__name__)

AFFINE_TOL = 1e-10  # allowed drift of the row sums from b


@dataclass
class MasterConfig:
    """Projection-method controls; lam must stay below twice the penalty's gamma.

    With extrapolate on (the default), the loop periodically fits the limit
    of the linearly converging share iterates and jumps there, keeping the
    jump only when it reduces the natural residual.  The projection step
    itself drags as the penalty weight grows (the master map flattens like
    1/tau), so plain iteration counts scale with tau; the safeguarded jumps
    remove that scaling without touching the converged certificate.
    """

    lam: float = 1.0
    tol_u: float = 1e-8
    max_iter: int = 1000
    nep_cfg: NepConfig = field(default_factory=NepConfig)
    nonneg: bool = False
    cap: bool = False
    extrapolate: bool = True

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")
        if self.tol_u <= 0.0:
            raise ValueError("tol_u must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class MasterResult:
    u: np.ndarray
    x: np.ndarray
    residual_u: float
    g: np.ndarray
    iters: int
    converged: bool
    total_nep_iters: int
    failure: str = ""


def _project_simplex(v, total):
    """Euclidean projection onto {w >= 0, sum w = total} by sort and threshold."""
    s = np.sort(v)[::-1]
    cumulative = np.cumsum(s) - total
    j = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(s > cumulative / j)[0][-1]
    theta = cumulative[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _project_clipped(v, total, lo, hi):
    """Bisection on the shift theta with w = clip(v - theta, lo, hi), sum w = total."""
    span = float(np.max(np.abs(v))) + abs(total) + 1.0
    t_lo, t_hi = -span, span
    while np.sum(np.clip(v - t_lo, lo, hi)) < total:
        t_lo = 2.0 * t_lo - span
    while np.sum(np.clip(v - t_hi, lo, hi)) > total:
        t_hi = 2.0 * t_hi + span
    for _ in range(200):
        mid = 0.5 * (t_lo + t_hi)
        if np.sum(np.clip(v - mid, lo, hi)) >= total:
            t_lo = mid
        else:
            t_hi = mid
    return np.clip(v - 0.5 * (t_lo + t_hi), lo, hi)


def project_shares(u_raw, b, nonneg=False, cap=False):
    """Euclidean projection of an (l, m) array onto the allocation set.

    Componentwise over the joint constraints: an equal shift onto the
    hyperplane by default, the sort-threshold simplex projection with the
    nonneg flag, and a bisection on the shift with clipping when slices are
    capped at b.  Idempotent; row sums match b within AFFINE_TOL.
    """
    u_raw = np.atleast_2d(np.asarray(u_raw, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    l, m = u_raw.shape
    if b.shape[0] != m:
        raise ValueError(f"b: expected length {m}, got {b.shape[0]}")
    if (nonneg or cap) and np.any(b < 0.0):
        raise InfeasibleShareSetError(
            "nonneg/cap share restrictions require a nonnegative right-hand side"
        )
    out = np.empty_like(u_raw)
    for t in range(m):
        v = u_raw[:, t]
        if not (nonneg or cap):
            out[:, t] = v - (v.sum() - b[t]) / l
        elif nonneg and not cap:
            out[:, t] = _project_simplex(v, b[t])
        else:
            lo = 0.0 if nonneg else -np.inf
            out[:, t] = _project_clipped(v, b[t], lo, b[t])
    return out


def _fixed_point_guess(history):
    """Limit estimate for a linearly converging vector sequence.

    Minimal-polynomial extrapolation over the stored window: pick affine
    weights c (summing to one) minimizing the combined difference, and blend
    the shifted iterates with them.  Returns None when the data is degenerate.
    """
    U = np.column_stack(history)
    D = np.diff(U, axis=1)
    Gm = D.T @ D
    Gm = Gm + (1e-14 * max(np.trace(Gm), 1e-300)) * np.eye(Gm.shape[0])
    try:
        y = np.linalg.solve(Gm, np.ones(Gm.shape[0]))
    except np.linalg.LinAlgError:
        return None
    total = y.sum()
    if not np.isfinite(total) or abs(total) < 1e-300:
        return None
    guess = U[:, 1:] @ (y / total)
    return guess if np.all(np.isfinite(guess)) else None


def solve_master(game, penalty, tau, u0, cfg=None, x0=None):
    """Fixed-step projection method for the master VI at penalty weight tau.

    Each iteration solves the penalized subgame at the current shares (warm
    started from the previous solution and its accepted step), evaluates the
    master map, and projects the stepped shares back onto the allocation set.
    Extrapolated jumps are evaluated like any other iterate and kept only
    when they shrink the natural residual.  A failed inner solve is retried
    once with a ten-fold budget before aborting.
    """
    cfg = cfg or MasterConfig()
    if cfg.lam >= 2.0 * penalty.gamma:
        raise ValueError(
            f"step {cfg.lam} outside (0, {2.0 * penalty.gamma}) admitted by the penalty"
        )
    b = game.joint.b
    u = project_shares(check_allocation(game, u0), b, cfg.nonneg, cfg.cap)
    state = {"x": x0, "hint": None, "nep_total": 0}

    def evaluate(u_at):
        """One projection step at u_at: (nep, g, next shares, natural residual)."""
        nep = solve_nash(game, penalty, tau, u_at, state["x"], cfg.nep_cfg,
                         step_hint=state["hint"])
        state["nep_total"] += nep.iters
        if not nep.converged:
            retry_cfg = NepConfig(tol=cfg.nep_cfg.tol, max_iter=10 * cfg.nep_cfg.max_iter)
            nep = solve_nash(game, penalty, tau, u_at, nep.x, retry_cfg)
            state["nep_total"] += nep.iters
        if not nep.converged:
            return nep, None, None, np.inf
        state["x"], state["hint"] = nep.x, nep.work_step
        g = master_map(game, penalty, u_at, nep.x)
        u_next = project_shares(u_at - cfg.lam * g, b, cfg.nonneg, cfg.cap)
        return nep, g, u_next, float(np.linalg.norm(u_at - u_next))

    window = min(max(game.m * (game.l - 1) + 1, 2), 6)
    history = []
    iters = 0
    u_eval = u
    while iters < cfg.max_iter:
        iters += 1
        u_eval = u
        nep, g, u_next, residual = evaluate(u)
        if not nep.converged:
            return MasterResult(
                u=u, x=nep.x, residual_u=np.inf,
                g=master_map(game, penalty, u, nep.x), iters=iters,
                converged=False, total_nep_iters=state["nep_total"],
                failure=f"subgame solve failed at tau={tau:g}: {nep.message}",
            )
        if residual <= cfg.tol_u:
            return MasterResult(
                u=u, x=nep.x, residual_u=residual, g=g, iters=iters,
                converged=True, total_nep_iters=state["nep_total"],
            )
        if iters % 100 == 0:
            log.debug("master tau=%g iter=%d residual_u=%.3e", tau, iters, residual)
        history.append(u.ravel().copy())
        if cfg.extrapolate and len(history) > window and iters < cfg.max_iter:
            guess = _fixed_point_guess(history[-(window + 1):])
            history = []
            if guess is not None:
                u_hat = project_shares(guess.reshape(game.l, game.m), b,
                                       cfg.nonneg, cfg.cap)
                iters += 1
                nep2, g2, u_hat_next, residual2 = evaluate(u_hat)
                if not nep2.converged:
                    return MasterResult(
                        u=u_hat, x=nep2.x, residual_u=np.inf,
                        g=master_map(game, penalty, u_hat, nep2.x), iters=iters,
                        converged=False, total_nep_iters=state["nep_total"],
                        failure=f"subgame solve failed at tau={tau:g}: {nep2.message}",
                    )
                if residual2 <= cfg.tol_u:
                    return MasterResult(
                        u=u_hat, x=nep2.x, residual_u=residual2, g=g2, iters=iters,
                        converged=True, total_nep_iters=state["nep_total"],
                    )
                if residual2 < residual:
                    history = [u_hat.ravel().copy()]
                    u, g, residual, u_eval = u_hat_next, g2, residual2, u_hat
                    continue
        u = u_next
    # budget exhausted: report the last coherent (u, x, g) triple
    return MasterResult(
        u=u_eval, x=state["x"], residual_u=residual, g=g, iters=iters,
        converged=False, total_nep_iters=state["nep_total"],
    )


def master_residual(game, penalty, tau, u, cfg=None, x0=None):
    """Natural residual of the master VI at shares u (inner solve included)."""
    cfg = cfg or MasterConfig()
    u = check_allocation(game, u)
    nep = solve_nash(game, penalty, tau, u, x0, cfg.nep_cfg)
    if not nep.converged:
        raise RuntimeError(f"subgame solve failed at tau={tau:g}: {nep.message}")
    g = master_map(game, penalty, u, nep.x)
    u_next = project_shares(u - cfg.lam * g, game.joint.b, cfg.nonneg, cfg.cap)
    return float(np.linalg.norm(u - u_next))


def recover_multipliers(penalty, tau, g):
    """Per-player multiplier estimates tau * |g| and their cross-player spread.

    At a converged master solve, tau * phi'(h_i - u_i) = -tau * g_i estimates
    the multiplier each player attaches to the joint constraint; a small
    spread (max minus min across players, worst over constraint components)
    certifies a normalized equilibrium with one shared multiplier.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    mult = -tau * g
    spread = float(np.max(mult.max(axis=0) - mult.min(axis=0)))
    return mult, spread
