"""Problem documents, run configuration, and trace emission.

A problem document is a strict JSON object (unknown keys are rejected) that
fully describes one run: the game data, optional share restrictions, the
penalty kind, the weight schedule, and solver tolerances.  Matrices are
row-major arrays of arrays; infinite box bounds are written as the strings
"inf" / "-inf" (null is also accepted on input, meaning unbounded on that
side).  Cross-coupling blocks are keyed by 1-based player index.

Traces are CSV files with one row per continuation stage; all floats are
serialized with 17 significant digits so parsing them back is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .continuation import GnepReport, PenaltySchedule, solve_gnep
from .errors import DocumentError
from .model import Game, JointConstraintSpec, PlayerSpec, validate_game
from .nash import NepConfig
from .penalty import PENALTY_KINDS, make_penalty, validate_shares
from .shares import MasterConfig

DEFAULT_SOLVER = {
    "tol_u": 1e-8,
    "eps_nep": None,  # tol_u / 10 unless given
    "lambda": 1.0,
    "eps_feas": 1e-6,
    "eps_eq": 1e-4,
    "max_iter_master": 1000,
    "max_iter_nep": 50_000,
    "seed": 0,
}

_TOP_KEYS = {"name", "players", "joint", "shares", "penalty", "schedule", "solver"}
_PLAYER_KEYS = {"n", "c", "Q", "R", "lower", "upper"}
_JOINT_KEYS = {"m", "A", "a", "C", "b"}
_SHARE_KEYS = {"nonneg", "cap"}
_PENALTY_KEYS = {"kind"}
_SCHEDULE_KEYS = {"tau0", "rho", "k_max"}
_SOLVER_KEYS = set(DEFAULT_SOLVER)


@dataclass
class RunSpec:
    """Everything needed to reproduce one solve."""

    name: str
    game: Game
    penalty: object
    schedule: PenaltySchedule
    master_cfg: MasterConfig
    eps_feas: float
    eps_eq: float
    seed: int
    warnings: list


def _strict(obj, path, known, required=()):
    if not isinstance(obj, dict):
        raise DocumentError(path, "expected an object")
    unknown = sorted(set(obj) - known)
    if unknown:
        raise DocumentError(path, f"unknown key(s) {unknown}")
    for key in required:
        if key not in obj:
            raise DocumentError(path, f"missing required key {key!r}")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DocumentError(path, "expected a number")
    return float(value)


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise DocumentError(path, "expected an integer")
    return value


def _bound(value, path, side):
    if value is None:
        return -np.inf if side == "lower" else np.inf
    if isinstance(value, str):
        token = value.strip().lower()
        if token in ("inf", "+inf"):
            return np.inf
        if token == "-inf":
            return -np.inf
        raise DocumentError(path, f"bad bound string {value!r}")
    return _number(value, path)


def _vector(value, length, path):
    if not isinstance(value, list) or len(value) != length:
        raise DocumentError(path, f"expected an array of {length} numbers")
    return np.array([_number(v, f"{path}[{k}]") for k, v in enumerate(value)])


def _matrix(value, rows, cols, path):
    if not isinstance(value, list) or len(value) != rows:
        raise DocumentError(path, f"expected {rows} rows")
    return np.vstack([_vector(row, cols, f"{path}[{r}]") for r, row in enumerate(value)])


def parse_document(doc):
    """Validate a problem document and build the RunSpec it describes.

    The constructed game is validated; hard violations raise, warnings are
    collected on the RunSpec together with share-coverage findings.
    """
    _strict(doc, "$", _TOP_KEYS, required=("name", "players", "joint"))
    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise DocumentError("$.name", "expected a nonempty string")

    raw_players = doc["players"]
    if not isinstance(raw_players, list) or not raw_players:
        raise DocumentError("$.players", "expected a nonempty array")
    dims = []
    for i, p in enumerate(raw_players):
        _strict(p, f"$.players[{i}]", _PLAYER_KEYS, required=("n", "c", "Q", "lower", "upper"))
        dims.append(_integer(p["n"], f"$.players[{i}].n"))

    players = []
    for i, p in enumerate(raw_players):
        path = f"$.players[{i}]"
        n = dims[i]
        if n < 1:
            raise DocumentError(f"{path}.n", "dimension must be at least 1")
        coupling = {}
        for key, mat in (p.get("R") or {}).items():
            try:
                j = int(key) - 1
            except (TypeError, ValueError):
                raise DocumentError(f"{path}.R", f"bad player index {key!r}")
            if j < 0 or j >= len(raw_players) or j == i:
                raise DocumentError(f"{path}.R", f"player index {key} out of range")
            coupling[j] = _matrix(mat, n, dims[j], f"{path}.R[{key}]")
        players.append(
            PlayerSpec(
                c=_vector(p["c"], n, f"{path}.c"),
                Q=_matrix(p["Q"], n, n, f"{path}.Q"),
                lower=np.array([_bound(v, f"{path}.lower[{k}]", "lower")
                                for k, v in enumerate(_aslist(p["lower"], n, f"{path}.lower"))]),
                upper=np.array([_bound(v, f"{path}.upper[{k}]", "upper")
                                for k, v in enumerate(_aslist(p["upper"], n, f"{path}.upper"))]),
                coupling=coupling,
            )
        )

    joint = doc["joint"]
    _strict(joint, "$.joint", _JOINT_KEYS, required=("m", "A", "a", "b"))
    m = _integer(joint["m"], "$.joint.m")
    if m < 1:
        raise DocumentError("$.joint.m", "need at least one joint constraint")
    if not isinstance(joint["A"], list) or len(joint["A"]) != len(players):
        raise DocumentError("$.joint.A", f"expected one matrix per player ({len(players)})")
    if not isinstance(joint["a"], list) or len(joint["a"]) != len(players):
        raise DocumentError("$.joint.a", f"expected one offset per player ({len(players)})")
    A = tuple(_matrix(joint["A"][i], m, dims[i], f"$.joint.A[{i}]") for i in range(len(players)))
    a = tuple(_vector(joint["a"][i], m, f"$.joint.a[{i}]") for i in range(len(players)))
    b = _vector(joint["b"], m, "$.joint.b")
    C = None
    if joint.get("C") is not None:
        raw_C = joint["C"]
        if not isinstance(raw_C, list) or len(raw_C) != len(players):
            raise DocumentError("$.joint.C", f"expected one matrix list per player")
        C = tuple(
            tuple(_matrix(raw_C[i][t], dims[i], dims[i], f"$.joint.C[{i}][{t}]")
                  for t in range(m))
            for i in range(len(players))
        )
        for i in range(len(players)):
            if len(raw_C[i]) != m:
                raise DocumentError(f"$.joint.C[{i}]", f"expected {m} matrices")

    game = Game(players=tuple(players), joint=JointConstraintSpec(A=A, a=a, b=b, C=C), name=name)
    warnings = validate_game(game)

    shares = doc.get("shares", {})
    _strict(shares, "$.shares", _SHARE_KEYS)
    nonneg = _flag(shares.get("nonneg", False), "$.shares.nonneg")
    cap = _flag(shares.get("cap", False), "$.shares.cap")
    warnings += validate_shares(game, nonneg=nonneg, cap=cap)

    pen = doc.get("penalty", {})
    _strict(pen, "$.penalty", _PENALTY_KEYS)
    kind = pen.get("kind", "quadratic_plus")
    if kind not in PENALTY_KINDS:
        raise DocumentError("$.penalty.kind", f"unknown kind {kind!r}")
    penalty = make_penalty(kind)

    sched = doc.get("schedule", {})
    _strict(sched, "$.schedule", _SCHEDULE_KEYS)
    try:
        schedule = PenaltySchedule(
            tau0=_number(sched.get("tau0", 1.0), "$.schedule.tau0"),
            growth=_number(sched.get("rho", 10.0), "$.schedule.rho"),
            k_max=_integer(sched.get("k_max", 5), "$.schedule.k_max"),
        )
    except ValueError as exc:
        raise DocumentError("$.schedule", str(exc))

    solver = dict(DEFAULT_SOLVER)
    raw_solver = doc.get("solver", {})
    _strict(raw_solver, "$.solver", _SOLVER_KEYS)
    solver.update(raw_solver)
    tol_u = _number(solver["tol_u"], "$.solver.tol_u")
    eps_nep = solver["eps_nep"]
    eps_nep = tol_u / 10.0 if eps_nep is None else _number(eps_nep, "$.solver.eps_nep")
    try:
        nep_cfg = NepConfig(tol=eps_nep, max_iter=_integer(solver["max_iter_nep"], "$.solver.max_iter_nep"))
        master_cfg = MasterConfig(
            lam=_number(solver["lambda"], "$.solver.lambda"),
            tol_u=tol_u,
            max_iter=_integer(solver["max_iter_master"], "$.solver.max_iter_master"),
            nep_cfg=nep_cfg,
            nonneg=nonneg,
            cap=cap,
        )
    except ValueError as exc:
        raise DocumentError("$.solver", str(exc))

    return RunSpec(
        name=name,
        game=game,
        penalty=penalty,
        schedule=schedule,
        master_cfg=master_cfg,
        eps_feas=_number(solver["eps_feas"], "$.solver.eps_feas"),
        eps_eq=_number(solver["eps_eq"], "$.solver.eps_eq"),
        seed=_integer(solver["seed"], "$.solver.seed"),
        warnings=warnings,
    )


def _aslist(value, length, path):
    if not isinstance(value, list) or len(value) != length:
        raise DocumentError(path, f"expected an array of length {length}")
    return value


def _flag(value, path):
    if not isinstance(value, bool):
        raise DocumentError(path, "expected a boolean")
    return value


def load_document(path):
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise DocumentError(str(path), f"cannot read: {exc}")
    except json.JSONDecodeError as exc:
        raise DocumentError(str(path), f"invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise DocumentError(str(path), "top level must be an object")
    return doc


def _bound_out(v):
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return float(v)


def serialize_document(spec):
    """Rebuild the problem document (dict) from a RunSpec; inverse of parse."""
    game = spec.game
    players = []
    for i, p in enumerate(game.players):
        entry = {
            "n": p.n,
            "c": p.c.tolist(),
            "Q": p.Q.tolist(),
            "lower": [_bound_out(v) for v in p.lower],
            "upper": [_bound_out(v) for v in p.upper],
        }
        if p.coupling:
            entry["R"] = {str(j + 1): R.tolist() for j, R in sorted(p.coupling.items())}
        players.append(entry)
    joint = {
        "m": game.m,
        "A": [Ai.tolist() for Ai in game.joint.A],
        "a": [ai.tolist() for ai in game.joint.a],
        "b": game.joint.b.tolist(),
    }
    if game.joint.C is not None:
        joint["C"] = [[Cij.tolist() for Cij in Ci] for Ci in game.joint.C]
    cfg = spec.master_cfg
    return {
        "name": spec.name,
        "players": players,
        "joint": joint,
        "shares": {"nonneg": cfg.nonneg, "cap": cfg.cap},
        "penalty": {"kind": spec.penalty.kind},
        "schedule": {
            "tau0": spec.schedule.tau0,
            "rho": spec.schedule.growth,
            "k_max": spec.schedule.k_max,
        },
        "solver": {
            "tol_u": cfg.tol_u,
            "eps_nep": cfg.nep_cfg.tol,
            "lambda": cfg.lam,
            "eps_feas": spec.eps_feas,
            "eps_eq": spec.eps_eq,
            "max_iter_master": cfg.max_iter,
            "max_iter_nep": cfg.nep_cfg.max_iter,
            "seed": spec.seed,
        },
    }


def apply_overrides(doc, assignments):
    """Apply dotted-path overrides like schedule.k_max=0; last writer wins."""
    for raw in assignments:
        if "=" not in raw:
            raise DocumentError(raw, "override must look like key.path=value")
        key, _, text = raw.partition("=")
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise DocumentError(raw, "empty override path")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = doc
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return doc


def solve_spec(spec):
    """Run the continuation described by a RunSpec."""
    return solve_gnep(
        spec.game,
        penalty=spec.penalty,
        schedule=spec.schedule,
        cfg=spec.master_cfg,
        eps_feas=spec.eps_feas,
        eps_eq=spec.eps_eq,
    )


def _g17(value):
    return format(float(value), ".17g")


def trace_header(game):
    cols = [
        "k", "tau", "master_iters", "nep_iters_total", "feas_P",
        "joint_residual_inf", "master_residual", "multiplier_spread",
    ]
    cols += [f"x_{k + 1}" for k in range(game.n)]
    cols += [f"u_{i + 1}{t + 1}" for i in range(game.l) for t in range(game.m)]
    cols += [f"lambda_{t + 1}" for t in range(game.m)]
    return cols


def write_trace(path, game, report):
    """Write one CSV row per continuation stage; floats round-trip exactly."""
    import csv

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(trace_header(game))
        for s in report.stages:
            row = [
                str(s.k),
                _g17(s.tau),
                str(s.master.iters),
                str(s.master.total_nep_iters),
                _g17(s.penalty_value),
                _g17(s.joint_violation_inf),
                _g17(s.master.residual_u),
                _g17(s.spread),
            ]
            row += [_g17(v) for v in s.master.x]
            row += [_g17(v) for v in s.master.u.ravel()]
            row += [_g17(v) for v in s.lambda_hat]
            writer.writerow(row)


def summary_dict(report):
    """JSON-ready run summary: status, final point, shares, multipliers, feasibility."""
    return {
        "status": report.status,
        "x": [float(v) for v in report.x],
        "u": [[float(v) for v in row] for row in report.shares],
        "lambda_hat": [float(v) for v in report.lambda_hat],
        "final_P": report.stages[-1].penalty_value if report.stages else None,
    }
