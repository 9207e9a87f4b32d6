"""Convex-quadratic joint constraints (no oracle; hand-derived limits)."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gnepkit import (
    Game,
    InvalidGameError,
    JointConstraintSpec,
    PenaltySchedule,
    PlayerSpec,
    constraint_values,
    gradient_check,
    joint_violation,
    parse_document,
    solve_gnep,
    validate_game,
    validate_shares,
)
from gnepkit.benchmarks import benchmark_document


@pytest.fixture(scope="module")
def disc_game():
    """Two symmetric players sharing the disc x_1^2 + x_2^2 <= 1."""
    players = tuple(
        PlayerSpec(c=[1.0], Q=[[1.0]], lower=[0.0], upper=[10.0]) for _ in range(2)
    )
    joint = JointConstraintSpec(
        A=([[0.0]], [[0.0]]), a=([0.0], [0.0]), b=[1.0],
        C=(([[1.0]],), ([[1.0]],)),
    )
    return Game(players=players, joint=joint, name="disc")


def test_constraint_evaluation(disc_game):
    assert_allclose(constraint_values(disc_game, [0.6, 0.8]), [[0.36], [0.64]])
    assert_allclose(joint_violation(disc_game, [0.6, 0.8]), [0.0])
    assert_allclose(joint_violation(disc_game, [1.0, 1.0]), [1.0])


def test_gradient_check_covers_quadratic_rows(disc_game, penalty, rng):
    shares = np.full((2, 1), 0.5)
    from gnepkit.oracle import sample_box

    for x in sample_box(disc_game, rng, 20):
        assert gradient_check(disc_game, penalty, 1.0, shares, x) <= 1e-6


def test_continuation_reaches_hand_derived_limit(disc_game):
    # symmetric split: x_i^2 -> 1/2, shared multiplier (1 - x)/(2x)
    report = solve_gnep(disc_game, schedule=PenaltySchedule(1.0, 10.0, 3))
    assert report.status == "converged"
    x_star = 1.0 / np.sqrt(2.0)
    assert_allclose(report.x, [x_star, x_star], atol=1e-3)
    assert_allclose(report.lambda_hat, [(1.0 - x_star) / (2.0 * x_star)], atol=1e-3)


def test_nonconvex_constraint_rejected(disc_game):
    players = disc_game.players
    joint = JointConstraintSpec(
        A=([[0.0]], [[0.0]]), a=([0.0], [0.0]), b=[1.0],
        C=(([[-1.0]],), ([[1.0]],)),
    )
    with pytest.raises(InvalidGameError):
        validate_game(Game(players=players, joint=joint))


def test_share_coverage_check_skipped_with_warning(disc_game):
    findings = validate_shares(disc_game, nonneg=True)
    assert any("quadratic" in f for f in findings)


def test_document_with_quadratic_rows_round_trips():
    doc = benchmark_document("s1")
    doc["joint"]["C"] = [[[[0.5]]], [[[0.5]]]]
    spec = parse_document(doc)
    assert not spec.game.joint.affine
    assert_allclose(spec.game.joint.C[0][0], [[0.5]])
    from gnepkit import serialize_document

    doc2 = serialize_document(spec)
    assert doc2["joint"]["C"] == [[[[0.5]]], [[[0.5]]]]
