"""Receding-horizon windows and warm starts between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import InvalidArgumentError
from src.logger import logger
from src.momentum_opt.layout import N_CHANNELS, DecisionLayout, WindowPhase, layout_for
from src.momentum_opt.plan import Plan, extract_plan
from src.momentum_opt.problem import ReferenceTrajectory, assemble
from src.momentum_opt.solver import solve
from src.poly_traj import Poly
from src.scenario import Scenario


@dataclass
class WindowResult:
    t0: float
    t1: float
    plan: Plan
    cold_objective: float
    warm_objective: float | None
    iterations: int
    cold_iterations: int | None = None

    def to_document(self) -> dict:
        return {
            "window": [self.t0, self.t1],
            "cold_objective": self.cold_objective,
            "warm_objective": self.warm_objective,
            "iterations": self.iterations,
            "cold_iterations": self.cold_iterations,
            "objective": self.plan.diagnostics.objective,
            "success": self.plan.diagnostics.success,
        }


def _reparametrize(coeffs: np.ndarray, old: WindowPhase, new: WindowPhase) -> np.ndarray:
    """Coefficients on new's local time of the same polynomials defined on old's."""
    alpha = (new.t_a - old.t_a) / old.span
    beta = new.span / old.span
    n = coeffs.shape[-1]
    out = np.zeros_like(coeffs)
    for c in range(N_CHANNELS):
        composed = Poly(coeffs[c]).compose_affine(alpha, beta).coeffs[:n]
        out[c, : composed.size] = composed
    return out


def transfer(x: np.ndarray, source: DecisionLayout, target: DecisionLayout) -> np.ndarray:
    """Carry coefficients of phases present in both layouts; new phases start at zero."""
    src_coeffs, src_offsets = source.coeffs(x), source.offsets(x)
    coeffs = np.zeros((target.n_phases, N_CHANNELS, target.n_coeffs))
    offsets = np.zeros((target.n_phases, 2))
    for q, wp in enumerate(target.phases):
        p = source.position_of(wp.index)
        if p is None:
            continue
        if source.n_coeffs != target.n_coeffs:
            raise InvalidArgumentError("layouts differ in polynomial order")
        coeffs[q] = _reparametrize(src_coeffs[p], source.phases[p], wp)
        offsets[q] = src_offsets[p]
    return target.pack(coeffs, offsets)


def receding_shift(
    x: np.ndarray,
    layout: DecisionLayout,
    window: tuple[float, float],
    delta: float,
    scenario: Scenario,
) -> tuple[DecisionLayout, np.ndarray, tuple[float, float]]:
    """Warm start for the window shifted forward by delta.

    The shifted window keeps its length but is clipped at the horizon. A
    zero shift returns the same decision values.
    """
    if delta < 0:
        raise InvalidArgumentError(f"shift must be non-negative, got {delta}")
    t0, t1 = window
    if delta == 0:
        return layout, np.array(x, dtype=float), (t0, t1)
    new_t0 = t0 + delta
    new_t1 = min(t1 + delta, scenario.horizon)
    if not new_t1 > new_t0:
        raise InvalidArgumentError(f"shift {delta} leaves no window before the horizon")
    target = layout_for(scenario.schedule, new_t0, new_t1, layout.n_coeffs, layout.sole_offsets)
    return target, transfer(x, layout, target), (new_t0, new_t1)


def receding_solve(
    scenario: Scenario,
    refs: ReferenceTrajectory,
    window: float | None = None,
    stride: float | None = None,
    compare: bool = False,
) -> list[WindowResult]:
    """Solve overlapping windows across the horizon, each warm-started from the last.

    With compare=True every warm-started window is also solved from zero so
    the iteration counts can be compared.
    """
    opt = scenario.optimizer
    window = opt.receding_window if window is None else window
    stride = opt.receding_stride if stride is None else stride
    if not (window > 0 and stride > 0):
        raise InvalidArgumentError("window and stride must be positive")

    horizon = scenario.horizon
    results: list[WindowResult] = []
    t0, state = 0.0, scenario.initial_state
    prev: WindowResult | None = None
    while True:
        t1 = min(t0 + window, horizon)
        x_warm = None
        layout = None
        if prev is not None:
            layout, x_warm, _ = receding_shift(
                prev.plan.x, prev.plan.layout, (prev.t0, prev.t1), t0 - prev.t0, scenario
            )
        problem = assemble(scenario, refs, t0, t1, state, layout)
        cold_objective = problem.objective(problem.layout.zeros())
        warm_objective = None if x_warm is None else problem.objective(x_warm)
        result = solve(problem, x_warm)
        cold_iterations = None
        if compare and x_warm is not None:
            cold_iterations = solve(problem).diagnostics.iterations
        plan = extract_plan(result, problem)
        current = WindowResult(t0, t1, plan, cold_objective, warm_objective,
                               result.diagnostics.iterations, cold_iterations)
        results.append(current)
        logger.info(
            f"Window [{t0:.2f}, {t1:.2f}]: objective {result.diagnostics.objective:.4e}, "
            f"{result.diagnostics.iterations} iterations"
        )
        if t1 >= horizon - 1e-12:
            break
        next_t0 = min(t0 + stride, horizon)
        state = plan.state_at(next_t0)
        t0, prev = next_t0, current
    return results


def warm_start_from(windows: list[WindowResult], layout: DecisionLayout) -> np.ndarray:
    """Initial point for a full-horizon layout stitched from window solutions.

    Each phase takes its polynomials from the window that saw most of it.
    """
    coeffs = np.zeros((layout.n_phases, N_CHANNELS, layout.n_coeffs))
    offsets = np.zeros((layout.n_phases, 2))
    for q, wp in enumerate(layout.phases):
        best, best_span = None, 0.0
        for w in windows:
            p = w.plan.layout.position_of(wp.index)
            if p is not None and w.plan.layout.phases[p].span > best_span:
                best, best_span = (w, p), w.plan.layout.phases[p].span
        if best is None:
            continue
        w, p = best
        src = w.plan.layout
        coeffs[q] = _reparametrize(src.coeffs(w.plan.x)[p], src.phases[p], wp)
        offsets[q] = src.offsets(w.plan.x)[p]
    return layout.pack(coeffs, offsets)
