"""Momentum trajectory optimization over polynomial contact wrenches."""

from __future__ import annotations

import numpy as np

from src.logger import logger
from src.momentum_opt.layout import CHANNELS, DecisionLayout, DecisionVector, WindowPhase, layout_for
from src.momentum_opt.plan import ActiveWrench, Plan, extract_plan, load_plan, write_plan
from src.momentum_opt.problem import (
    NlpProblem,
    ReferenceTrajectory,
    RowLabel,
    assemble,
    knot_grid,
    objective_gradient,
)
from src.momentum_opt.receding import (
    WindowResult,
    receding_shift,
    receding_solve,
    transfer,
    warm_start_from,
)
from src.momentum_opt.solver import SolveDiagnostics, SolveResult, solve
from src.scenario import Scenario


def plan_motion(
    scenario: Scenario,
    refs: ReferenceTrajectory,
    x_init: np.ndarray | None = None,
) -> Plan:
    """Solve the whole-horizon problem and return the plan.

    Without an initial point the solve starts from zero, or from stitched
    receding-window solutions when the scenario asks for that warm start.
    """
    problem = assemble(scenario, refs)
    if x_init is None and scenario.optimizer.warm_start == "receding":
        x_init = warm_start_from(receding_solve(scenario, refs), problem.layout)
    result = solve(problem, x_init)
    logger.info(
        f"Planned {scenario.name}: {problem.layout.n_phases} phases, "
        f"objective {result.diagnostics.objective:.6e}"
    )
    return extract_plan(result, problem)


__all__ = [
    "CHANNELS",
    "ActiveWrench",
    "DecisionLayout",
    "DecisionVector",
    "NlpProblem",
    "Plan",
    "ReferenceTrajectory",
    "RowLabel",
    "SolveDiagnostics",
    "SolveResult",
    "WindowPhase",
    "WindowResult",
    "assemble",
    "extract_plan",
    "knot_grid",
    "layout_for",
    "load_plan",
    "objective_gradient",
    "plan_motion",
    "receding_shift",
    "receding_solve",
    "solve",
    "transfer",
    "warm_start_from",
    "write_plan",
]
