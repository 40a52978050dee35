"""Closed-loop simulation of the reduced model under the LQR policy."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from src.centroidal_model import CentroidalState, ContactWrench, rk4_step, state_derivative
from src.contact_plan import ContactPhase
from src.errors import InvalidArgumentError, ScenarioError, SimulationAborted
from src.logger import logger
from src.lqr_tracker import GainSchedule, policy
from src.momentum_opt import Plan
from src.utils.documents import read_yaml, write_csv, write_yaml
from src.utils.plots import plot_momentum_tracking, plot_tracking

DISTURBANCE_KINDS = ("offset", "impulse", "bias")
# Changes smaller than this do not count as clamping
CLAMP_TOL = 1e-9
# State columns of each tracked channel
CHANNELS = {"com": slice(0, 3), "lin_momentum": slice(3, 6), "ang_momentum": slice(6, 9)}


class GainSource(Protocol):
    def gains_at(self, t: float) -> tuple[GainSchedule, int]: ...


@dataclass(frozen=True, eq=False)
class Disturbance:
    """State offset at start, or a wrench on the CoM over [t_start, t_start + duration).

    An impulse vector is the integrated wrench (N s, N m s); a bias vector is
    the wrench itself.
    """

    kind: str
    vector: np.ndarray
    t_start: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise InvalidArgumentError(f"unknown disturbance kind {self.kind!r}")
        size = 9 if self.kind == "offset" else 6
        vec = np.asarray(self.vector, dtype=float).reshape(-1)
        if vec.size != size:
            raise InvalidArgumentError(f"{self.kind} disturbance needs {size} values, got {vec.size}")
        if self.kind != "offset" and not self.duration > 0:
            raise InvalidArgumentError(f"{self.kind} disturbance needs a positive duration")
        object.__setattr__(self, "vector", vec)

    def wrench_at(self, t: float) -> np.ndarray:
        if self.kind == "offset" or not (self.t_start <= t < self.t_start + self.duration):
            return np.zeros(6)
        if self.kind == "impulse":
            return self.vector / self.duration
        return self.vector

    def to_document(self) -> dict:
        return {"kind": self.kind, "vector": self.vector, "t_start": self.t_start,
                "duration": self.duration}

    @classmethod
    def from_document(cls, doc: dict) -> "Disturbance":
        return cls(doc["kind"], doc["vector"], float(doc.get("t_start", 0.0)),
                   float(doc.get("duration", 0.0)))


def load_disturbances(path: Path) -> list[Disturbance]:
    doc = read_yaml(path) or []
    if isinstance(doc, dict):
        doc = doc.get("disturbances", [])
    errors, out = [], []
    for i, entry in enumerate(doc):
        try:
            out.append(Disturbance.from_document(entry))
        except (InvalidArgumentError, KeyError, TypeError) as e:
            errors.append(f"disturbances[{i}]: {e}")
    if errors:
        raise ScenarioError(errors)
    return out


def _sole_form(wrench: ContactWrench, phase: ContactPhase):
    R = phase.rotation
    return R.T @ wrench.force, R.T @ wrench.torque


def clamp_wrench(wrench: ContactWrench, phase: ContactPhase) -> ContactWrench:
    """Nearest admissible wrench under the phase bounds, at the same pole.

    Pulling contacts give zero. Otherwise the normal force is capped, the
    tangential force scaled into the friction pyramid, and the CoP and
    normal torque clipped to their bounds.
    """
    f, tau = _sole_form(wrench, phase)
    fz = f[2]
    if not fz > 0:
        return ContactWrench(np.zeros(3), np.zeros(3))
    cx, cy = -tau[1] / fz, tau[0] / fz
    tau_n = tau[2] - (cx * f[1] - cy * f[0])

    fz = min(fz, phase.force_cap)
    ft = f[0:2]
    biggest = float(np.max(np.abs(ft)))
    limit = phase.friction * fz
    if biggest > limit:
        ft = ft * (limit / biggest)
    hx, hy = phase.cop_half_extents
    cx, cy = float(np.clip(cx, -hx, hx)), float(np.clip(cy, -hy, hy))
    tau_n = float(np.clip(tau_n, -phase.torque_bound, phase.torque_bound))

    f_s = np.array([ft[0], ft[1], fz])
    tau_s = np.cross([cx, cy, 0.0], f_s) + np.array([0.0, 0.0, tau_n])
    R = phase.rotation
    return ContactWrench(R @ f_s, R @ tau_s)


def wrench_violation(wrench: ContactWrench, phase: ContactPhase) -> float:
    """Largest bound violation of a pole wrench, zero when admissible."""
    f, tau = _sole_form(wrench, phase)
    fz = f[2]
    worst = max(0.0, -fz, fz - phase.force_cap)
    worst = max(worst, float(np.max(np.abs(f[0:2]))) - phase.friction * fz)
    # CoP bounds in torque form: |tau_y| <= hx fz, |tau_x| <= hy fz
    hx, hy = phase.cop_half_extents
    worst = max(worst, abs(tau[1]) - hx * max(fz, 0.0), abs(tau[0]) - hy * max(fz, 0.0))
    if fz > 0:
        cx, cy = -tau[1] / fz, tau[0] / fz
        tau_n = tau[2] - (cx * f[1] - cy * f[0])
        worst = max(worst, abs(tau_n) - phase.torque_bound)
    elif np.any(np.abs(tau) > CLAMP_TOL):
        worst = max(worst, float(np.max(np.abs(tau))))
    return max(worst, 0.0)


@dataclass
class RunLog:
    """Closed-loop record sampled at every control step."""

    effectors: tuple[str, ...]
    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    references: list[np.ndarray] = field(default_factory=list)
    commanded: list[np.ndarray] = field(default_factory=list)
    applied: list[np.ndarray] = field(default_factory=list)
    clamped: list[np.ndarray] = field(default_factory=list)
    aborted: bool = False
    abort_time: float | None = None
    clamp_events: int = 0
    max_violation: float = 0.0

    def record(self, t, x, x_ref, commanded, applied, clamped):
        self.times.append(float(t))
        self.states.append(np.array(x))
        self.references.append(np.array(x_ref))
        self.commanded.append(commanded)
        self.applied.append(applied)
        self.clamped.append(clamped)

    def channel_errors(self, channel: str) -> np.ndarray:
        """Euclidean tracking error of one channel (com, lin_momentum, ang_momentum) per step."""
        if not self.times:
            return np.zeros(0)
        cols = CHANNELS[channel]
        return np.linalg.norm(np.array(self.states)[:, cols] - np.array(self.references)[:, cols], axis=1)

    def metrics(self) -> dict:
        clamped = np.array(self.clamped) if self.clamped else np.zeros((0, len(self.effectors)), bool)
        out = {
            "steps": len(self.times),
            "aborted": self.aborted,
            "abort_time": self.abort_time,
        }
        for channel in CHANNELS:
            err = self.channel_errors(channel)
            out[f"max_{channel}_error"] = float(err.max()) if err.size else 0.0
            out[f"rms_{channel}_error"] = float(np.sqrt(np.mean(err ** 2))) if err.size else 0.0
            out[f"final_{channel}_error"] = float(err[-1]) if err.size else 0.0
        out.update({
            "clamped_steps": int(clamped.any(axis=1).sum()) if clamped.size else 0,
            "clamp_events": self.clamp_events,
            "max_applied_violation": self.max_violation,
        })
        return out

    def csv_rows(self) -> tuple[list[str], list[list[float]]]:
        header = ["t"]
        header += [f"{q}_{a}" for q in ("com", "l", "k") for a in "xyz"]
        header += [f"ref_{q}_{a}" for q in ("com", "l", "k") for a in "xyz"]
        for eff in self.effectors:
            for kind in ("cmd", "applied"):
                header += [f"{eff}_{kind}_{q}_{a}" for q in ("f", "tau") for a in "xyz"]
            header.append(f"{eff}_clamped")
        rows = []
        for i, t in enumerate(self.times):
            row = [t] + self.states[i].tolist() + self.references[i].tolist()
            for e in range(len(self.effectors)):
                row += self.commanded[i][e].tolist() + self.applied[i][e].tolist()
                row.append(int(self.clamped[i][e]))
            rows.append(row)
        return header, rows


def tracking_error(x: np.ndarray, x_ref: np.ndarray, mass: float) -> float:
    """Norm of the state error with momenta divided by the mass, so every block is in meters or m/s."""
    err = np.asarray(x, dtype=float) - np.asarray(x_ref, dtype=float)
    err[3:9] /= mass
    return float(np.linalg.norm(err))


def _deriv_with(params, poles, wrenches, disturbances):
    def deriv(t: float, x: np.ndarray) -> np.ndarray:
        dx = state_derivative(CentroidalState.from_vector(x), poles, wrenches, params)
        for d in disturbances:
            w = d.wrench_at(t)
            dx[3:9] += w
        return dx
    return deriv


def simulate(
    plan: Plan,
    gains: GainSource,
    disturbances: Sequence[Disturbance] = (),
    feedback: bool = True,
    dt: float | None = None,
    control_dt: float | None = None,
    divergence_bound: float | None = None,
    t_end: float | None = None,
) -> RunLog:
    """Integrate the reduced model from the plan's start under the tracking policy.

    The policy is evaluated every integration step with the gain of the
    control step holding it; each commanded wrench is clamped to its contact
    bounds before it is applied. Raises SimulationAborted, carrying the
    partial log, once tracking_error leaves the divergence bound.
    """
    settings = plan.scenario.simulation
    dt = settings.dt if dt is None else dt
    control_dt = plan.scenario.lqr.dt if control_dt is None else control_dt
    bound = settings.divergence_bound if divergence_bound is None else divergence_bound
    n_sub = int(round(control_dt / dt))
    if n_sub < 1 or abs(n_sub * dt - control_dt) > 1e-9 * max(1.0, control_dt):
        raise InvalidArgumentError(f"integration step {dt} does not divide the control step {control_dt}")
    t_end = plan.t1 if t_end is None else min(t_end, plan.t1)
    n_ctrl = int(np.floor((t_end - plan.t0) / control_dt + 1e-9))

    params = plan.scenario.params
    phases = plan.scenario.schedule.phases
    effectors = plan.scenario.schedule.effectors
    slot = {e: i for i, e in enumerate(effectors)}

    x = plan.state_at(plan.t0).to_vector()
    for d in disturbances:
        if d.kind == "offset":
            x = x + d.vector
    log = RunLog(effectors=effectors)
    logger.info(f"Simulating {n_ctrl} control steps ({n_sub} integration steps each), feedback={feedback}")

    for j in range(n_ctrl):
        for sub in range(n_sub):
            t = plan.t0 + j * control_dt + sub * dt
            schedule, k = gains.gains_at(t)
            step = schedule.steps[k]
            lam = policy(schedule, x, t, k) if feedback else step.lam_ref.copy()
            poles, applied = [], []
            cmd_row = np.zeros((len(effectors), 6))
            app_row = np.zeros((len(effectors), 6))
            clamp_row = np.zeros(len(effectors), dtype=bool)
            for i, idx in enumerate(step.contacts):
                phase = phases[idx]
                commanded = ContactWrench.from_vector(lam[6 * i: 6 * i + 6])
                admissible = clamp_wrench(commanded, phase)
                changed = not np.allclose(commanded.to_vector(), admissible.to_vector(),
                                          rtol=0.0, atol=CLAMP_TOL)
                log.max_violation = max(log.max_violation, wrench_violation(admissible, phase))
                e = slot[phase.effector]
                cmd_row[e], app_row[e], clamp_row[e] = commanded.to_vector(), admissible.to_vector(), changed
                log.clamp_events += int(changed)
                poles.append(step.poles[i])
                applied.append(admissible)
            if sub == 0:
                ref = plan.state_at(t).to_vector()
                log.record(t, x, ref, cmd_row, app_row, clamp_row)

            x = rk4_step(x, t, dt, _deriv_with(params, poles, applied, disturbances))
            t_next = t + dt
            ref = plan.state_at(min(t_next, plan.t1)).to_vector()
            if not np.all(np.isfinite(x)) or tracking_error(x, ref, params.mass) > bound:
                log.aborted = True
                log.abort_time = t_next
                logger.error(f"Simulation diverged at t={t_next:.3f}")
                raise SimulationAborted(
                    f"state left the {bound} bound around the plan at t={t_next:.3f}", log
                )
    if log.max_violation > 1e-6:
        logger.warning(f"Applied wrench violated bounds by {log.max_violation:.3e}")
    return log


def write_run(log: RunLog, directory: Path, plot: bool = True) -> list[Path]:
    directory = Path(directory)
    header, rows = log.csv_rows()
    paths = [
        write_csv(directory / "sim.csv", header, rows),
        write_yaml(directory / "summary.yaml", log.metrics()),
    ]
    if plot and log.times:
        paths.append(plot_tracking(log, directory / "tracking.svg"))
        paths.append(plot_momentum_tracking(log, directory / "momentum_tracking.svg"))
    return paths
