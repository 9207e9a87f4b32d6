"""Solver library for noncooperative games with joint binding constraints.

The joint right-hand side is split into per-player shares; for a growing
penalty weight, a fixed-step projection method over the share allocations
wraps an extragradient solver for the penalized Nash subgames.  The stage
solutions converge to a normalized equilibrium of the original game, which a
desk-scale KKT enumeration oracle verifies exactly.
"""

from .errors import (
    DimensionError,
    DocumentError,
    GnepError,
    InfeasibleShareSetError,
    InvalidGameError,
    OracleBudgetError,
    OracleNonUniqueError,
    OracleNoSolutionError,
)
from .model import (
    Game,
    JointConstraintSpec,
    PlayerSpec,
    constraint_values,
    joint_violation,
    nikaido_isoda,
    payoff,
    project_box,
    pseudo_gradient,
    validate_game,
)
from .penalty import (
    QuadraticPlusPenalty,
    make_penalty,
    master_map,
    player_penalty,
    player_penalty_grad,
    total_penalty,
    validate_shares,
)
from .nash import NepConfig, NepResult, nep_residual, penalized_game_map, solve_nash
from .shares import (
    MasterConfig,
    MasterResult,
    master_residual,
    project_shares,
    recover_multipliers,
    solve_master,
)
from .continuation import (
    GnepReport,
    PenaltySchedule,
    StageRecord,
    feasibility_trace,
    solve_gnep,
)
from .oracle import (
    GroundTruth,
    check_bifunction_monotone,
    check_is_gne,
    check_master_map_cocoercive,
    gradient_check,
    oracle_solve,
    sample_allocations,
    sample_box,
    sample_feasible,
)
from .documents import (
    RunSpec,
    apply_overrides,
    load_document,
    parse_document,
    serialize_document,
    solve_spec,
    summary_dict,
    write_trace,
)

__version__ = "0.1.0"
