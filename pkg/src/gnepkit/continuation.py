"""Outer penalty continuation.

Drives the penalty weight through a strictly increasing geometric schedule,
solves the master/subgame pair at every stage (warm started in both the
strategies and the shares), and stops once the stage solution is feasible
within eps_feas, the per-player multiplier estimates agree within eps_eq,
and the master residual is below its tolerance.  Every completed stage is
recorded; an inner failure never discards the trace accumulated so far.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import joint_violation, project_box, validate_game
from .penalty import QuadraticPlusPenalty, total_penalty
from .shares import MasterConfig, MasterResult, project_shares, recover_multipliers, solve_master

log = logging.getLogger(__name__)

STATUS_CONVERGED = "converged"
STATUS_BUDGET = "budget-exhausted"
STATUS_INNER_FAILURE = "inner-failure"


@dataclass(frozen=True)
class PenaltySchedule:
    """Geometric penalty weights tau0 * growth**k for k = 0..k_max."""

    tau0: float = 1.0
    growth: float = 10.0
    k_max: int = 5

    def __post_init__(self):
        if self.tau0 <= 0.0:
            raise ValueError("tau0 must be positive")
        if self.growth <= 1.0:
            raise ValueError("growth must exceed 1 for a strictly increasing schedule")
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")

    def values(self):
        return [self.tau0 * self.growth**k for k in range(self.k_max + 1)]


@dataclass
class StageRecord:
    k: int
    tau: float
    master: MasterResult
    penalty_value: float
    joint_violation_inf: float
    multipliers: np.ndarray
    spread: float
    lambda_hat: np.ndarray


@dataclass
class GnepReport:
    """Continuation outcome.

    stages holds every completed stage in schedule order; the final point
    (x, shares, lambda_hat) is taken from the last stage whose master solve
    converged, since a budget-capped stage can stop mid-transient farther
    from the limit than its own warm start.  Unconverged stages stay in the
    trace for inspection.
    """

    stages: list
    x: np.ndarray
    shares: np.ndarray
    lambda_hat: np.ndarray
    status: str
    failure: str = ""


def solve_gnep(
    game,
    penalty=None,
    schedule=None,
    cfg=None,
    eps_feas=1e-6,
    eps_eq=1e-4,
    x0=None,
    u0=None,
):
    """Run the penalty continuation and return the full stage trace.

    Returns a GnepReport whose status is "converged" when some stage met all
    three stopping tests, "budget-exhausted" when the schedule ran out first,
    and "inner-failure" when a subgame solve failed (completed stages are
    kept either way).
    """
    penalty = penalty or QuadraticPlusPenalty()
    schedule = schedule or PenaltySchedule()
    cfg = cfg or MasterConfig()
    for finding in validate_game(game):
        log.debug("validate: %s", finding)

    x = project_box(game, np.zeros(game.n) if x0 is None else np.asarray(x0, dtype=float))
    if u0 is None:
        u0 = np.tile(game.joint.b / game.l, (game.l, 1))
    u = project_shares(np.asarray(u0, dtype=float).reshape(game.l, game.m),
                       game.joint.b, cfg.nonneg, cfg.cap)

    stages = []
    status = STATUS_BUDGET
    failure = ""
    lambda_hat = np.zeros(game.m)
    for k, tau in enumerate(schedule.values()):
        result = solve_master(game, penalty, tau, u, cfg, x0=x)
        if result.failure:
            status = STATUS_INNER_FAILURE
            failure = result.failure
            log.warning("stage k=%d tau=%g aborted: %s", k, tau, result.failure)
            break
        feas = total_penalty(game, penalty, result.x, result.u)
        violation = joint_violation(game, result.x)
        mult, spread = recover_multipliers(penalty, tau, result.g)
        lambda_hat = mult.mean(axis=0)
        stages.append(
            StageRecord(
                k=k, tau=tau, master=result, penalty_value=feas,
                joint_violation_inf=float(violation.max(initial=0.0)),
                multipliers=mult, spread=spread, lambda_hat=lambda_hat,
            )
        )
        log.info(
            "stage k=%d tau=%g: master_iters=%d nep_iters=%d P=%.3e spread=%.3e%s",
            k, tau, result.iters, result.total_nep_iters, feas, spread,
            "" if result.converged else " (master budget exhausted)",
        )
        x, u = result.x, result.u
        if result.converged and feas <= eps_feas and spread <= eps_eq:
            status = STATUS_CONVERGED
            break
    final = None
    for stage in stages:
        if stage.master.converged:
            final = stage
    if final is None and stages:
        final = stages[-1]
    if final is not None:
        x, u, lambda_hat = final.master.x, final.master.u, final.lambda_hat
    return GnepReport(
        stages=stages, x=x, shares=u, lambda_hat=lambda_hat, status=status, failure=failure,
    )


def feasibility_trace(report):
    """(tau, penalty value) pairs across the recorded stages."""
    if not report.stages:
        raise ValueError("report has no completed stages")
    return [(s.tau, s.penalty_value) for s in report.stages]
