"""Optimized plans: analytic state trajectories, contact wrenches and documents."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.centroidal_model import CentroidalState, ContactWrench
from src.config import FORMAT_VERSION
from src.contact_plan import ContactPhase
from src.errors import ContractViolation, TimeRangeError
from src.momentum_opt.layout import DecisionLayout, layout_for
from src.momentum_opt.problem import NlpProblem, ReferenceTrajectory, assemble
from src.momentum_opt.solver import SolveDiagnostics, SolveResult
from src.poly_traj import PhaseControl, Poly, PolyVec3, StatePolys, build_state_polys
from src.scenario import Scenario, scenario_document, scenario_from_document
from src.utils.documents import read_yaml, write_csv, write_yaml
from src.utils.plots import plot_series


@dataclass(frozen=True, eq=False)
class ActiveWrench:
    """Contact wrench of one active phase, expressed at its stationary pole."""

    index: int
    phase: ContactPhase
    pole: np.ndarray
    wrench: ContactWrench
    cop: np.ndarray


class Plan:
    """Optimal motion over a window: controls, analytic states and solver record."""

    def __init__(
        self,
        scenario: Scenario,
        layout: DecisionLayout,
        x: np.ndarray,
        x0: CentroidalState,
        refs: ReferenceTrajectory,
        diagnostics: SolveDiagnostics,
        t0: float,
        t1: float,
    ):
        self.scenario = scenario
        self.layout = layout
        self.x = np.asarray(x, dtype=float)
        self.x0 = x0
        self.refs = refs
        self.diagnostics = diagnostics
        self.t0, self.t1 = float(t0), float(t1)

        coeffs, offsets = layout.coeffs(self.x), layout.offsets(self.x)
        self.controls: dict[int, PhaseControl] = {}
        self.poles: dict[int, np.ndarray] = {}
        for p, wp in enumerate(layout.phases):
            ph = wp.phase
            c = coeffs[p]
            v = Poly(c[3])
            ux, uy = Poly(c[4]), Poly(c[5])
            pole = ph.center + offsets[p, 0] * ph.tangent_x + offsets[p, 1] * ph.tangent_y
            point = PolyVec3(*(
                Poly.const(pole[a]) + ux.scale(ph.tangent_x[a]) + uy.scale(ph.tangent_y[a])
                for a in range(3)
            ))
            self.controls[p] = PhaseControl(
                t_start=wp.t_a,
                t_end=wp.t_b,
                force=PolyVec3.from_coeffs(c[0], c[1], c[2]),
                torque=PolyVec3(*(v.scale(ph.normal[a]) for a in range(3))),
                point=point,
            )
            self.poles[p] = pole
        self.states: StatePolys = build_state_polys(
            [(wp.t_a, wp.t_b) for wp in layout.phases],
            self.controls, x0, scenario.params, self.t0, self.t1,
        )

    @property
    def success(self) -> bool:
        return self.diagnostics.success

    def _check(self, t: float) -> float:
        t = float(t)
        if t < self.t0 - 1e-12 or t > self.t1 + 1e-12:
            raise TimeRangeError(f"t={t} outside plan window [{self.t0}, {self.t1}]")
        return min(max(t, self.t0), self.t1)

    def state_at(self, t: float) -> CentroidalState:
        t = self._check(t)
        return CentroidalState(self.states.r(t), self.states.l(t), self.states.k(t))

    def rate_at(self, t: float) -> np.ndarray:
        """Momentum rate (l', k') of the plan at t."""
        t = self._check(t)
        return np.concatenate([self.states.l_dot(t), self.states.k_dot(t)])

    def active_positions(self, t: float) -> list[int]:
        return [
            p for p, wp in enumerate(self.layout.phases)
            if wp.t_a <= t < wp.t_b or (t == self.t1 and wp.t_b == self.t1)
        ]

    def wrenches_at(self, t: float) -> list[ActiveWrench]:
        """Planned contact wrenches at t, each moved to the phase pole."""
        t = self._check(t)
        out = []
        for p in self.active_positions(t):
            wp = self.layout.phases[p]
            ctl = self.controls[p]
            s = wp.local(t)
            force, torque, point = ctl.force(s), ctl.torque(s), ctl.point(s)
            pole = self.poles[p]
            out.append(ActiveWrench(
                index=wp.index,
                phase=wp.phase,
                pole=pole,
                wrench=ContactWrench(force, torque + np.cross(point - pole, force)),
                cop=point,
            ))
        return out

    def require_wrenches(self, t: float) -> list[ActiveWrench]:
        active = self.wrenches_at(t)
        if not active:
            raise ContractViolation(f"no active contact at t={t}")
        return active

    def knot_table(self) -> dict[str, np.ndarray]:
        problem = self.problem()
        return problem.knot_states(self.x)

    def problem(self) -> NlpProblem:
        return assemble(self.scenario, self.refs, self.t0, self.t1, self.x0, self.layout)

    def knot_document(self) -> dict:
        """States and momentum rates at the knots, as in plan.csv."""
        table = self.knot_table()
        return {
            "times": table["times"],
            "com": table["r"],
            "linear_momentum": table["l"],
            "angular_momentum": table["k"],
            "linear_momentum_rate": table["l_dot"],
            "angular_momentum_rate": table["k_dot"],
        }

    def to_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "plan",
            "scenario": scenario_document(self.scenario),
            "window": [self.t0, self.t1],
            "initial_state": {
                "com": self.x0.r,
                "linear_momentum": self.x0.l,
                "angular_momentum": self.x0.k,
            },
            "layout": self.layout.describe(),
            "decision": self.x,
            "knots": self.knot_document(),
            "references": self.refs.to_document(),
            "diagnostics": self.diagnostics.to_document(),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "Plan":
        if doc.get("kind") != "plan":
            raise ContractViolation("document is not a plan")
        scenario = scenario_from_document(doc["scenario"])
        t0, t1 = (float(v) for v in doc["window"])
        lay = doc["layout"]
        layout = layout_for(scenario.schedule, t0, t1, int(lay["n_coeffs"]), bool(lay["sole_offsets"]))
        init = doc["initial_state"]
        x0 = CentroidalState(init["com"], init["linear_momentum"], init["angular_momentum"])
        return cls(
            scenario=scenario,
            layout=layout,
            x=np.asarray(doc["decision"], dtype=float),
            x0=x0,
            refs=ReferenceTrajectory.from_document(doc["references"]),
            diagnostics=SolveDiagnostics.from_document(doc["diagnostics"]),
            t0=t0,
            t1=t1,
        )


def extract_plan(
    result: SolveResult | np.ndarray, problem: NlpProblem, diagnostics: SolveDiagnostics | None = None
) -> Plan:
    """Turn an optimal decision vector into a plan with analytic states."""
    if isinstance(result, SolveResult):
        x, diagnostics = result.x, result.diagnostics
    else:
        x = np.asarray(result, dtype=float)
    if diagnostics is None:
        raise ContractViolation("extract_plan needs solver diagnostics")
    return Plan(problem.scenario, problem.layout, x, problem.x0, problem.refs, diagnostics,
                problem.t0, problem.t1)


PLAN_CSV_HEADER_STATE = [
    "t", "com_x", "com_y", "com_z", "l_x", "l_y", "l_z", "k_x", "k_y", "k_z",
    "ldot_x", "ldot_y", "ldot_z", "kdot_x", "kdot_y", "kdot_z",
]


def plan_csv_rows(plan: Plan) -> tuple[list[str], list[list[float]]]:
    """One row per knot: states, rates and per-effector wrench, torque and CoP."""
    effectors = plan.scenario.schedule.effectors
    header = list(PLAN_CSV_HEADER_STATE)
    for eff in effectors:
        header += [f"{eff}_{q}_{a}" for q in ("f", "tau", "cop") for a in "xyz"]
    table = plan.knot_table()
    rows = []
    for i, t in enumerate(table["times"]):
        row = [float(t)]
        for key in ("r", "l", "k", "l_dot", "k_dot"):
            row += table[key][i].tolist()
        by_eff = {aw.phase.effector: aw for aw in plan.wrenches_at(t)}
        for eff in effectors:
            aw = by_eff.get(eff)
            if aw is None:
                row += [0.0] * 9
            else:
                s = plan.layout.phases[plan.layout.position_of(aw.index)].local(t)
                ctl = plan.controls[plan.layout.position_of(aw.index)]
                row += ctl.force(s).tolist() + ctl.torque(s).tolist() + aw.cop.tolist()
        rows.append(row)
    return header, rows


def write_plan(plan: Plan, directory: Path, plot: bool = True) -> list[Path]:
    directory = Path(directory)
    header, rows = plan_csv_rows(plan)
    paths = [
        write_yaml(directory / "plan.yaml", plan.to_document()),
        write_csv(directory / "plan.csv", header, rows),
    ]
    if plot:
        table = plan.knot_table()
        series = {f"{q}_{a}": table[key][:, i] for q, key in (("l", "l"), ("k", "k"))
                  for i, a in enumerate("xyz")}
        paths.append(plot_series(table["times"], series, directory / "momentum.svg", "momentum"))
    return paths


def load_plan(path: Path) -> Plan:
    path = Path(path)
    if path.is_dir():
        path = path / "plan.yaml"
    return Plan.from_document(read_yaml(path))
