"""Kinematic seed: desired CoM and momenta from a point-mass limb model.

The first pass places the base above the feet. Later passes solve the base
from the last optimized CoM, rebuild the references and re-plan until the
optimized motion stops changing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from src.contact_plan import posture_at
from src.errors import InvalidArgumentError, SolverDivergedError
from src.logger import logger
from src.momentum_opt import Plan, ReferenceTrajectory, knot_grid, plan_motion
from src.momentum_opt.layout import window_phases
from src.scenario import Scenario


@dataclass
class PassRecord:
    index: int
    com_deviation: float
    ang_deviation: float
    objective: float
    iterations: int
    success: bool


@dataclass
class SeedReport:
    passes: list[PassRecord] = field(default_factory=list)
    converged: bool = False

    def to_document(self) -> dict:
        return {
            "converged": self.converged,
            "passes": [vars(p) for p in self.passes],
        }


def seed_times(scenario: Scenario) -> np.ndarray:
    phases = window_phases(scenario.schedule, 0.0, scenario.horizon)
    return knot_grid(phases, 0.0, scenario.horizon, scenario.optimizer.knots_per_phase)


def seed_references(
    scenario: Scenario,
    times: np.ndarray | None = None,
    com_of: Callable[[float], np.ndarray] | None = None,
) -> ReferenceTrajectory:
    """Reference CoM, linear and angular momentum sampled at times.

    Angular momentum sums the limb point masses about the CoM; rates come
    from finite differences over the sample grid.
    """
    times = seed_times(scenario) if times is None else np.asarray(times, dtype=float)
    mass = scenario.params.mass
    limbs = scenario.limbs
    h = scenario.seed.base_height
    postures = [
        posture_at(scenario.schedule, scenario.swings, limbs, mass, float(t), h,
                   None if com_of is None else com_of(float(t)))
        for t in times
    ]
    com = np.array([p.com for p in postures])
    lin = mass * np.gradient(com, times, axis=0)
    ang = np.zeros_like(com)
    for eff, lp in limbs.limbs.items():
        pos = np.array([p.limbs[eff] for p in postures])
        vel = np.gradient(pos, times, axis=0)
        ang += lp.mass * np.cross(pos - com, vel)
    return ReferenceTrajectory(times, com, lin, ang)


def _deviation(a_com, a_ang, b_com, b_ang) -> tuple[float, float]:
    return float(np.max(np.abs(a_com - b_com))), float(np.max(np.abs(a_ang - b_ang)))


def iterate(
    scenario: Scenario, max_passes: int | None = None
) -> tuple[Plan, ReferenceTrajectory, SeedReport]:
    """Alternate seeding and optimization until the plan settles.

    The first pass compares the optimized motion with its seed; later passes
    compare successive optimized motions. Each pass after the first starts
    the solver from the previous solution.
    """
    settings = scenario.seed
    max_passes = settings.max_passes if max_passes is None else max_passes
    if max_passes < 1:
        raise InvalidArgumentError(f"max_passes must be at least 1, got {max_passes}")
    report = SeedReport()
    times = seed_times(scenario)
    refs = seed_references(scenario, times)
    plan = None
    prev_states = None
    for n in range(1, max_passes + 1):
        try:
            plan = plan_motion(scenario, refs, None if plan is None else plan.x)
        except SolverDivergedError as e:
            raise SolverDivergedError(f"seed pass {n}: {e}", e.last_iterate) from e
        states = plan.knot_table()
        if prev_states is None:
            r_des, _, k_des = refs.sample(states["times"])
            dev_com, dev_ang = _deviation(states["r"], states["k"], r_des, k_des)
        else:
            dev_com, dev_ang = _deviation(states["r"], states["k"], prev_states["r"], prev_states["k"])
        diag = plan.diagnostics
        report.passes.append(PassRecord(n, dev_com, dev_ang, diag.objective, diag.iterations, diag.success))
        logger.info(f"Seed pass {n}: CoM deviation {dev_com:.3e} m, angular {dev_ang:.3e}")
        if dev_com <= settings.tol_com and dev_ang <= settings.tol_ang:
            report.converged = True
            break
        prev_states = states
        if n < max_passes:
            refs = seed_references(scenario, times, com_of=plan.states.r)
    if not report.converged:
        logger.warning(f"Seed iteration stopped after {len(report.passes)} passes without settling")
    return plan, refs, report
