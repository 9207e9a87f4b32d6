"""Penalized Nash subgame solver.

For fixed shares u and penalty weight tau, each player maximizes
f_i(x) - tau * P_i(x_i, u_i) over its box.  The equilibria of that game are
the solutions of the variational inequality over the box product with the
map F_tau(x) = F(x) + tau * stack_i(grad_x P_i), which stays monotone for
the concave-quadratic payoff class.

The solver is an extragradient method with per-iteration step adaptation:
a spectral trial step estimated from the last two map evaluations, run in a
diagonal curvature metric, with backtracking until the two map evaluations
differ by at most a fixed fraction of the trial displacement.  The penalty
stiffness grows with tau and is not known a priori, so nothing relies on a
global Lipschitz constant.  Convergence is certified by the plain natural
residual ||x - proj(x - step * F(x))|| measured at a stiffness-safe step,
which makes the residual track the distance to the solution.

Games with affine joint constraints and the quadratic-plus penalty run in a
compiled kernel when numba is available; the pure-numpy loop below is the
reference implementation and the fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    check_profile,
    constraint_jacobian,
    constraint_values,
    pseudo_gradient,
    pseudo_gradient_affine,
)
from .penalty import check_allocation

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@dataclass
class NepConfig:
    """Extragradient controls for one subgame solve."""

    tol: float = 1e-9
    max_iter: int = 50_000
    step0: float = 1.0
    shrink: float = 0.5
    accept: float = 0.9
    grow: float = 2.0

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0.0 < self.accept < 1.0:
            raise ValueError("accept must lie in (0, 1)")
        if self.step0 <= 0.0 or self.grow < 1.0:
            raise ValueError("step0 must be positive and grow >= 1")


@dataclass
class NepResult:
    x: np.ndarray
    residual: float
    iters: int
    converged: bool
    step: float
    work_step: float = 0.0  # metric-space step, reusable as a warm-start hint
    message: str = ""


def penalized_game_map(game, penalty, tau, u, x):
    """Map of the penalized subgame: F(x) plus tau times the penalty gradients."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    x = check_profile(game, x)
    u = check_allocation(game, u)
    out = pseudo_gradient(game, x)
    h = constraint_values(game, x)
    for i in range(game.l):
        slope = penalty.grad(h[i] - u[i])
        if np.any(slope):
            out[game.block(i)] += tau * (constraint_jacobian(game, i, x[game.block(i)]).T @ slope)
    return out


def nep_residual(game, penalty, tau, u, x, step):
    """Natural residual of the penalized subgame at x with the given step.

    Zero exactly at solutions of the box variational inequality, for any
    positive step.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    x = check_profile(game, x)
    fx = penalized_game_map(game, penalty, tau, u, x)
    moved = np.clip(x - step * fx, game.lower, game.upper)
    return float(np.linalg.norm(x - moved))


def _affine_data(game, penalty, tau, u, x_start):
    """Arrays for the fast map F(x) = M x - c + tau * Astack'[Astack x + off]_+.

    Also builds the diagonal curvature estimate (own quadratic terms plus
    tau-weighted squared constraint rows active at the warm start) used as
    the iteration metric.  A stale activity pattern only degrades the
    preconditioner, never correctness: backtracking guards every step.
    """
    M, c = pseudo_gradient_affine(game)
    Astack = np.zeros((game.l * game.m, game.n))
    off = np.empty(game.l * game.m)
    for i in range(game.l):
        rows = slice(i * game.m, (i + 1) * game.m)
        Astack[rows, game.block(i)] = game.joint.A[i]
        off[rows] = game.joint.a[i] - u[i]
    active = (Astack @ x_start + off) > 0.0
    diag = np.diag(M).copy()
    if np.any(active):
        diag = diag + tau * ((Astack[active] ** 2).sum(axis=0))
    return M, c, Astack, Astack.T.copy(), off, np.maximum(diag, 1e-12)


@njit(cache=True)
def _affine_kernel(M, c, Astack, off, tau, lower, upper, diag,
                   x, beta, tol, max_iter, shrink, accept, grow):
    n = x.shape[0]
    q = off.shape[0]
    inv_diag = 1.0 / diag
    inv_max = inv_diag.max()
    slack = np.empty(q)
    fx = np.empty(n)
    fy = np.empty(n)
    y = np.empty(n)
    x_prev = np.zeros(n)
    f_prev = np.zeros(n)

    def _eval(z, out):
        for r in range(q):
            s = off[r]
            for j in range(n):
                s += Astack[r, j] * z[j]
            slack[r] = s if s > 0.0 else 0.0
        for i in range(n):
            acc = -c[i]
            for j in range(n):
                acc += M[i, j] * z[j]
            for r in range(q):
                acc += tau * Astack[r, i] * slack[r]
            out[i] = acc

    lip = 0.0
    residual = np.inf
    step_cert = beta
    have_prev = False
    it = 0
    status = 0  # 0 budget, 1 converged, 2 step underflow
    while it < max_iter:
        it += 1
        _eval(x, fx)
        if have_prev:
            dfdf = 0.0
            dxdf = 0.0
            dxdx = 0.0
            dff = 0.0
            for i in range(n):
                dxi = x[i] - x_prev[i]
                dfi = fx[i] - f_prev[i]
                dfdf += dfi * inv_diag[i] * dfi
                dxdf += dxi * dfi
                dxdx += dxi * dxi
                dff += dfi * dfi
            if dxdx > 0.0:
                l_est = np.sqrt(dff / dxdx)
                if l_est > lip:
                    lip = l_est
            if dfdf > 0.0 and dxdf > 0.0:
                beta = min(dxdf / dfdf, 1e12)
            else:
                beta = min(beta * grow, 1e12)
        for i in range(n):
            x_prev[i] = x[i]
            f_prev[i] = fx[i]
        have_prev = True
        # stopping certificate at a stiffness-safe plain step
        step_cert = beta * inv_max
        if lip > 0.0 and accept / lip < step_cert:
            step_cert = accept / lip
        rr = 0.0
        for i in range(n):
            v = x[i] - step_cert * fx[i]
            if v < lower[i]:
                v = lower[i]
            elif v > upper[i]:
                v = upper[i]
            rr += (x[i] - v) * (x[i] - v)
        residual = np.sqrt(rr)
        if residual <= tol:
            status = 1
            break
        dn2 = 0.0
        for i in range(n):
            v = x[i] - beta * inv_diag[i] * fx[i]
            if v < lower[i]:
                v = lower[i]
            elif v > upper[i]:
                v = upper[i]
            y[i] = v
            dn2 += (x[i] - v) * diag[i] * (x[i] - v)
        if dn2 == 0.0:
            beta = min(beta * grow, 1e12)
            continue
        _eval(y, fy)
        while True:
            gap2 = 0.0
            for i in range(n):
                dfi = fx[i] - fy[i]
                gap2 += dfi * inv_diag[i] * dfi
            if beta * np.sqrt(gap2) <= accept * np.sqrt(dn2):
                break
            beta *= shrink
            if beta < 1e-16:
                status = 2
                break
            dn2 = 0.0
            for i in range(n):
                v = x[i] - beta * inv_diag[i] * fx[i]
                if v < lower[i]:
                    v = lower[i]
                elif v > upper[i]:
                    v = upper[i]
                y[i] = v
                dn2 += (x[i] - v) * diag[i] * (x[i] - v)
            _eval(y, fy)
        if status == 2:
            break
        dplain2 = 0.0
        dff2 = 0.0
        for i in range(n):
            dxi = x[i] - y[i]
            dfi = fx[i] - fy[i]
            dplain2 += dxi * dxi
            dff2 += dfi * dfi
        if dplain2 > 0.0:
            l_est = np.sqrt(dff2 / dplain2)
            if l_est > lip:
                lip = l_est
        for i in range(n):
            v = x[i] - beta * inv_diag[i] * fy[i]
            if v < lower[i]:
                v = lower[i]
            elif v > upper[i]:
                v = upper[i]
            x[i] = v
    return x, residual, it, status, step_cert, beta


def _python_loop(fmap, diag, x, beta, cfg, lower, upper):
    """Reference implementation of the adaptive extragradient loop."""
    inv_diag = 1.0 / diag
    inv_max = float(inv_diag.max())
    lip = 0.0
    residual = np.inf
    step_cert = beta
    x_prev = fx_prev = None
    for it in range(cfg.max_iter):
        fx = fmap(x)
        if x_prev is not None:
            dx = x - x_prev
            df = fx - fx_prev
            dfdf = float(df @ (inv_diag * df))
            dxdf = float(dx @ df)
            dn_prev = float(np.linalg.norm(dx))
            if dn_prev > 0.0:
                lip = max(lip, float(np.linalg.norm(df)) / dn_prev)
            if dfdf > 0.0 and dxdf > 0.0:
                beta = min(dxdf / dfdf, 1e12)
            else:
                beta = min(beta * cfg.grow, 1e12)
        x_prev, fx_prev = x, fx
        step_cert = min(beta * inv_max, cfg.accept / lip) if lip > 0.0 else beta * inv_max
        moved = np.clip(x - step_cert * fx, lower, upper)
        residual = float(np.linalg.norm(x - moved))
        if residual <= cfg.tol:
            return x, residual, it + 1, 1, step_cert, beta
        y = np.clip(x - beta * (inv_diag * fx), lower, upper)
        diff = x - y
        dn = float(diff @ (diag * diff)) ** 0.5
        if dn == 0.0:
            beta = min(beta * cfg.grow, 1e12)
            continue
        fy = fmap(y)
        while beta * float((fx - fy) @ (inv_diag * (fx - fy))) ** 0.5 > cfg.accept * dn:
            beta *= cfg.shrink
            if beta < 1e-16:
                return x, residual, it + 1, 2, step_cert, beta
            y = np.clip(x - beta * (inv_diag * fx), lower, upper)
            diff = x - y
            dn = float(diff @ (diag * diff)) ** 0.5
            fy = fmap(y)
        dplain = float(np.linalg.norm(diff))
        if dplain > 0.0:
            lip = max(lip, float(np.linalg.norm(fx - fy)) / dplain)
        x = np.clip(x - beta * (inv_diag * fy), lower, upper)
    return x, residual, cfg.max_iter, 0, step_cert, beta


_MESSAGES = {
    0: "no convergence within the iteration budget",
    1: "",
    2: "step underflow during backtracking",
}


def solve_nash(game, penalty, tau, u, x0=None, cfg=None, step_hint=None):
    """Solve the penalized subgame at shares u and weight tau.

    x0 is projected onto the box first; warm starts from a previous solve
    are the intended usage, and step_hint (that solve's work_step) skips the
    initial step adaptation.  Non-convergence is reported in the result,
    never raised, so callers can enlarge the budget or shrink their own step.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    cfg = cfg or NepConfig()
    u = check_allocation(game, u)
    lower, upper = game.lower, game.upper
    if x0 is None:
        x = np.clip(np.zeros(game.n), lower, upper)
    else:
        x = np.clip(check_profile(game, x0, "x0"), lower, upper)
    beta = float(step_hint) if step_hint is not None else cfg.step0

    if game.joint.affine and penalty.kind == "quadratic_plus":
        M, c, Astack, AstackT, off, diag = _affine_data(game, penalty, tau, u, x)
        if HAVE_NUMBA:
            x, residual, iters, status, step_cert, beta = _affine_kernel(
                M, c, Astack, off, tau, lower, upper, diag,
                x.copy(), beta, cfg.tol, cfg.max_iter, cfg.shrink, cfg.accept, cfg.grow,
            )
        else:
            def fmap(z):
                slack = Astack @ z
                slack += off
                np.maximum(slack, 0.0, out=slack)
                return M @ z - c + tau * (AstackT @ slack)

            x, residual, iters, status, step_cert, beta = _python_loop(
                fmap, diag, x, beta, cfg, lower, upper
            )
    else:
        fmap = lambda z: penalized_game_map(game, penalty, tau, u, z)
        x, residual, iters, status, step_cert, beta = _python_loop(
            fmap, np.ones(game.n), x, beta, cfg, lower, upper
        )
    message = _MESSAGES[status]
    if status == 0:
        message += f" ({cfg.max_iter} iterations, residual {residual:.3e})"
    return NepResult(
        x=x, residual=float(residual), iters=int(iters), converged=status == 1,
        step=float(step_cert), work_step=float(beta), message=message,
    )
