"""Time-varying LQR tracking of an optimized momentum plan.

The dynamics are linearized about the plan with contact wrenches expressed
at each phase's stationary pole, discretized with explicit Euler, and a
backward Riccati sweep gives the feedback gains. Gains are recomputed over a
sliding window that starts at every stride and is cut at the plan end.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from src.centroidal_model import CentroidalState, skew, wrench_map
from src.config import FORMAT_VERSION, THREADS
from src.errors import ContractViolation, InvalidArgumentError, TimeRangeError
from src.logger import logger
from src.momentum_opt import Plan
from src.scenario import LqrSettings
from src.utils.documents import read_yaml, write_csv, write_yaml
from src.utils.plots import plot_series

STATE_DIM = 9
WRENCH_DIM = 6
# Slack when mapping a time onto the control grid
GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LqrWeights:
    Q: np.ndarray
    Qf: np.ndarray
    r_block: np.ndarray

    @classmethod
    def from_settings(cls, settings: LqrSettings) -> "LqrWeights":
        q = settings.q * np.eye(STATE_DIM)
        r = np.diag([settings.r_force] * 3 + [settings.r_torque] * 3)
        return cls(q, q.copy(), r)

    def input_weight(self, n_contacts: int) -> np.ndarray:
        return block_diag(*([self.r_block] * n_contacts))

    def describe(self) -> dict:
        return {"Q": self.Q, "Qf": self.Qf, "R_block": self.r_block}


@dataclass(frozen=True, eq=False)
class LinearizedStep:
    """Discrete dynamics and reference around the plan at one control step."""

    t: float
    x_ref: np.ndarray
    lam_ref: np.ndarray
    hdot_ref: np.ndarray
    poles: np.ndarray
    contacts: tuple[int, ...]
    effectors: tuple[str, ...]
    # dropped when a table is exported
    A: np.ndarray | None = None
    B: np.ndarray | None = None

    @property
    def n_contacts(self) -> int:
        return len(self.contacts)


def linearize(plan: Plan, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time Jacobians of the state derivative about the plan at t."""
    active = plan.require_wrenches(t)
    state = plan.state_at(t)
    mass = plan.scenario.params.mass
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[0:3, 3:6] = np.eye(3) / mass
    for aw in active:
        A[6:9, 0:3] += skew(aw.wrench.force)
    B = np.zeros((STATE_DIM, WRENCH_DIM * len(active)))
    B[3:9, :] = wrench_map([aw.pole for aw in active], state.r)
    return A, B


def discretize(A: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    return np.eye(A.shape[0]) + dt * A, dt * B


def linearize_step(plan: Plan, t: float, dt: float) -> LinearizedStep:
    A_c, B_c = linearize(plan, t)
    A, B = discretize(A_c, B_c, dt)
    active = plan.wrenches_at(t)
    return LinearizedStep(
        t=t,
        A=A,
        B=B,
        x_ref=plan.state_at(t).to_vector(),
        lam_ref=np.concatenate([aw.wrench.to_vector() for aw in active]),
        hdot_ref=plan.rate_at(t),
        poles=np.array([aw.pole for aw in active]),
        contacts=tuple(aw.index for aw in active),
        effectors=tuple(aw.phase.effector for aw in active),
    )


def backward_riccati(
    A: Sequence[np.ndarray],
    B: Sequence[np.ndarray],
    Q: np.ndarray,
    Qf: np.ndarray,
    R: Sequence[np.ndarray],
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Finite-horizon discrete Riccati recursion.

    Returns gains K_0..K_{N-1} and cost-to-go P_0..P_N with P_N = Qf.
    """
    n = len(A)
    if not (len(B) == len(R) == n):
        raise InvalidArgumentError(f"sequence lengths differ: A={n}, B={len(B)}, R={len(R)}")
    P = [np.zeros_like(Qf) for _ in range(n + 1)]
    K = [np.zeros((B[k].shape[1], A[k].shape[0])) for k in range(n)]
    P[n] = np.array(Qf, dtype=float)
    for k in range(n - 1, -1, -1):
        Ak, Bk, Pn = A[k], B[k], P[k + 1]
        BtP = Bk.T @ Pn
        K[k] = np.linalg.solve(R[k] + BtP @ Bk, BtP @ Ak)
        Pk = Q + Ak.T @ Pn @ (Ak - Bk @ K[k])
        P[k] = 0.5 * (Pk + Pk.T)
    return K, P


@dataclass
class GainSchedule:
    """Gains and references over consecutive control steps starting at t0."""

    t0: float
    dt: float
    steps: list[LinearizedStep]
    gains: list[np.ndarray]
    cost_to_go: list[np.ndarray] = field(default_factory=list)

    def index(self, t: float) -> int:
        k = int(np.floor((t - self.t0) / self.dt + GRID_TOL))
        if k < 0 or k > len(self.steps):
            raise TimeRangeError(f"t={t} outside gain window starting at {self.t0}")
        return min(k, len(self.steps) - 1)


def riccati(steps: list[LinearizedStep], weights: LqrWeights, dt: float | None = None) -> GainSchedule:
    """Gains for a window of linearized steps on a uniform grid."""
    if not steps:
        raise ContractViolation("riccati needs at least one step")
    K, P = backward_riccati(
        [s.A for s in steps], [s.B for s in steps], weights.Q, weights.Qf,
        [weights.input_weight(s.n_contacts) for s in steps],
    )
    if dt is None:
        dt = steps[1].t - steps[0].t if len(steps) > 1 else 1.0
    return GainSchedule(steps[0].t, dt, steps, K, P)


def _state_vector(x) -> np.ndarray:
    if isinstance(x, CentroidalState):
        return x.to_vector()
    return np.asarray(x, dtype=float).reshape(STATE_DIM)


def policy(gains: GainSchedule, x, t: float, k: int | None = None) -> np.ndarray:
    """Stacked pole wrenches lambda* - K (x - x*) at the control step holding t."""
    k = gains.index(t) if k is None else k
    step = gains.steps[k]
    return step.lam_ref - gains.gains[k] @ (_state_vector(x) - step.x_ref)


def momentum_rate_ref(gains: GainSchedule, x, t: float, k: int | None = None) -> np.ndarray:
    """Desired momentum rate implied by the policy at state x."""
    k = gains.index(t) if k is None else k
    step = gains.steps[k]
    lam = policy(gains, x, t, k)
    return step.hdot_ref + wrench_map(step.poles, step.x_ref[0:3]) @ (lam - step.lam_ref)


def momentum_gain(step: LinearizedStep, K: np.ndarray) -> np.ndarray:
    """6x9 gain from state error to momentum-rate correction."""
    return wrench_map(step.poles, step.x_ref[0:3]) @ K


BLOCK_NAMES = [f"{row}_{col}" for row in ("ldot", "kdot") for col in ("r", "l", "k")]


def block_norms(step: LinearizedStep, K: np.ndarray) -> list[float]:
    G = momentum_gain(step, K)
    return [
        float(np.linalg.norm(G[3 * i: 3 * i + 3, 3 * j: 3 * j + 3]))
        for i in range(2) for j in range(3)
    ]


@dataclass
class GainTable:
    """Applied gain per control step, as recorded for export and replay."""

    dt: float
    steps: list[LinearizedStep]
    gains: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def t0(self) -> float:
        return self.steps[0].t

    @property
    def t_end(self) -> float:
        return self.steps[-1].t + self.dt

    def gains_at(self, t: float) -> tuple[GainSchedule, int]:
        j = int(np.floor((t - self.t0) / self.dt + GRID_TOL))
        if j < 0 or t > self.t_end + GRID_TOL:
            raise TimeRangeError(f"t={t} outside gain table [{self.t0}, {self.t_end}]")
        j = min(j, len(self.steps) - 1)
        return GainSchedule(self.steps[j].t, self.dt, [self.steps[j]], [self.gains[j]]), 0

    def to_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "gains",
            "dt": self.dt,
            "meta": self.meta,
            "steps": [
                {
                    "t": s.t,
                    "contacts": list(s.contacts),
                    "effectors": list(s.effectors),
                    "poles": s.poles,
                    "x_ref": s.x_ref,
                    "lam_ref": s.lam_ref,
                    "hdot_ref": s.hdot_ref,
                    "K": K,
                }
                for s, K in zip(self.steps, self.gains)
            ],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "GainTable":
        if doc.get("kind") != "gains":
            raise ContractViolation("document is not a gain schedule")
        steps, gains = [], []
        for e in doc["steps"]:
            steps.append(LinearizedStep(
                t=float(e["t"]),
                x_ref=np.array(e["x_ref"], dtype=float),
                lam_ref=np.array(e["lam_ref"], dtype=float),
                hdot_ref=np.array(e["hdot_ref"], dtype=float),
                poles=np.array(e["poles"], dtype=float).reshape(-1, 3),
                contacts=tuple(int(c) for c in e["contacts"]),
                effectors=tuple(e["effectors"]),
            ))
            gains.append(np.array(e["K"], dtype=float).reshape(-1, STATE_DIM))
        return cls(float(doc["dt"]), steps, gains, dict(doc.get("meta") or {}))


class GainProvider:
    """Sliding-window gain synthesis along a plan.

    A window starts at every multiple of the stride and spans the gain
    horizon. Near the end of the plan the window is cut at the plan end, so
    the last windows are shorter. Linearizations are shared between windows
    on the global dt grid.
    """

    def __init__(self, plan: Plan, weights: LqrWeights, horizon: float, dt: float, stride: float):
        if not (dt > 0 and horizon > 0 and stride > 0):
            raise InvalidArgumentError("horizon, dt and stride must be positive")
        self.plan = plan
        self.weights = weights
        self.dt = dt
        self.stride = stride
        self.n_steps = int(round(horizon / dt))
        if abs(self.n_steps * dt - horizon) > GRID_TOL * max(1.0, horizon):
            raise InvalidArgumentError(f"dt {dt} does not divide the horizon {horizon}")
        self.horizon = self.n_steps * dt
        self.t0, self.t1 = plan.t0, plan.t1
        if self.t1 - self.t0 < self.horizon - GRID_TOL:
            raise ContractViolation(
                f"plan covers {self.t1 - self.t0:.3f} s, shorter than the {self.horizon:.3f} s gain horizon"
            )
        self._steps: dict[int, LinearizedStep] = {}
        self._windows: dict[int, GainSchedule] = {}
        self._lock = threading.Lock()

    @property
    def n_control_steps(self) -> int:
        return int(np.floor((self.t1 - self.t0) / self.dt + GRID_TOL))

    def _step(self, g: int) -> LinearizedStep:
        with self._lock:
            cached = self._steps.get(g)
        if cached is not None:
            return cached
        step = linearize_step(self.plan, self.t0 + g * self.dt, self.dt)
        with self._lock:
            self._steps.setdefault(g, step)
        return step

    def window_start(self, t: float) -> int:
        """Grid index of the latest window start at or before t."""
        if t < self.t0 - GRID_TOL or t > self.t1 + GRID_TOL:
            raise TimeRangeError(f"t={t} outside plan [{self.t0}, {self.t1}]")
        start = np.floor((t - self.t0) / self.stride + GRID_TOL) * self.stride
        g = int(np.floor(start / self.dt + GRID_TOL))
        return max(0, min(g, self.n_control_steps - 1))

    def window_length(self, g: int) -> int:
        """Control steps in the window starting at g, cut at the plan end."""
        return min(self.n_steps, self.n_control_steps - g)

    def _solve(self, g: int) -> GainSchedule:
        return riccati([self._step(g + k) for k in range(self.window_length(g))], self.weights, self.dt)

    def window(self, g: int) -> GainSchedule:
        with self._lock:
            cached = self._windows.get(g)
        if cached is not None:
            return cached
        schedule = self._solve(g)
        with self._lock:
            # windows are only kept while they are the current one
            self._windows = {g: schedule}
        return schedule

    def gains_at(self, t: float) -> tuple[GainSchedule, int]:
        schedule = self.window(self.window_start(t))
        return schedule, schedule.index(t)

    def table(self, workers: int = THREADS) -> GainTable:
        """Applied gain at every control step, windows solved on a thread pool."""
        owner = [self.window_start(self.t0 + j * self.dt) for j in range(self.n_control_steps)]
        starts = sorted(set(owner))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                solved = dict(zip(starts, pool.map(self._solve, starts)))
        else:
            solved = {g: self._solve(g) for g in starts}
        entries = [(solved[g].steps[j - g], solved[g].gains[j - g]) for j, g in enumerate(owner)]
        logger.info(
            f"Synthesized gains for {len(entries)} control steps from {len(starts)} windows ({workers} workers)"
        )
        return GainTable(
            dt=self.dt,
            steps=[s for s, _ in entries],
            gains=[K for _, K in entries],
            meta={
                "horizon": self.horizon,
                "stride": self.stride,
                "steps_per_window": self.n_steps,
                "weights": self.weights.describe(),
            },
        )


def sliding_recompute(
    plan: Plan,
    weights: LqrWeights | None = None,
    horizon: float | None = None,
    dt: float | None = None,
    stride: float | None = None,
) -> GainProvider:
    settings = plan.scenario.lqr
    return GainProvider(
        plan,
        weights or LqrWeights.from_settings(settings),
        settings.horizon if horizon is None else horizon,
        settings.dt if dt is None else dt,
        settings.stride if stride is None else stride,
    )


def write_gains(table: GainTable, directory: Path, plot: bool = True) -> list[Path]:
    directory = Path(directory)
    rows = [[s.t] + block_norms(s, K) for s, K in zip(table.steps, table.gains)]
    paths = [
        write_yaml(directory / "gains.yaml", table.to_document()),
        write_csv(directory / "gain_norms.csv", ["t"] + BLOCK_NAMES, rows),
    ]
    if plot and rows:
        norms = np.array(rows)
        series = {name: norms[:, i + 1] for i, name in enumerate(BLOCK_NAMES)}
        paths.append(plot_series(norms[:, 0], series, directory / "gain_norms.svg", "block norm"))
    return paths


def load_gains(path: Path) -> GainTable:
    path = Path(path)
    if path.is_dir():
        path = path / "gains.yaml"
    return GainTable.from_document(read_yaml(path))
