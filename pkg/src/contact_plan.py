"""Contact schedule: stationary sole frames, bounds, activation and swing splines."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from src.config import (
    DEFAULT_APEX_HEIGHT,
    DEFAULT_COP_HALF_EXTENTS,
    DEFAULT_FRICTION,
    DEFAULT_TORQUE_BOUND,
    LIMB_RATIO,
)
from src.errors import ScheduleError, TimeRangeError

# Tolerance for frame orthonormality checks and time comparisons
FRAME_TOL = 1e-9
TIME_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ContactPhase:
    effector: str
    t_start: float
    t_end: float
    center: np.ndarray
    normal: np.ndarray
    tangent_x: np.ndarray
    tangent_y: np.ndarray
    cop_half_extents: np.ndarray = field(
        default_factory=lambda: np.array(DEFAULT_COP_HALF_EXTENTS)
    )
    torque_bound: float = DEFAULT_TORQUE_BOUND
    friction: float = DEFAULT_FRICTION
    force_cap: float = float("inf")
    point_contact: bool = False

    def __post_init__(self):
        for name in ("center", "normal", "tangent_x", "tangent_y"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        object.__setattr__(
            self, "cop_half_extents", np.asarray(self.cop_half_extents, dtype=float).reshape(2)
        )

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def rotation(self) -> np.ndarray:
        """Columns are (t_x, t_y, n): sole frame to world."""
        return np.column_stack([self.tangent_x, self.tangent_y, self.normal])

    def to_sole(self, v) -> np.ndarray:
        return self.rotation.T @ np.asarray(v, dtype=float)

    def same_sole(self, other: "ContactPhase") -> bool:
        return (
            self.effector == other.effector
            and np.array_equal(self.center, other.center)
            and np.array_equal(self.rotation, other.rotation)
        )

    def violations(self, index: int) -> list[str]:
        """Invariant violations, each naming the field and phase index."""
        out = []
        where = f"phases[{index}]"
        if not self.t_end > self.t_start:
            out.append(f"{where}.t_end: must exceed t_start ({self.t_end} <= {self.t_start})")
        if abs(np.linalg.norm(self.normal) - 1.0) > FRAME_TOL:
            out.append(f"{where}.normal: not a unit vector")
        frame = self.rotation
        if not np.allclose(frame.T @ frame, np.eye(3), atol=FRAME_TOL):
            out.append(f"{where}.tangents: sole frame is not orthonormal")
        elif np.linalg.det(frame) < 0:
            out.append(f"{where}.tangents: sole frame is not right-handed")
        if not self.friction > 0:
            out.append(f"{where}.friction: must be positive")
        if np.any(self.cop_half_extents < 0):
            out.append(f"{where}.cop_half_extents: must be non-negative")
        if self.torque_bound < 0:
            out.append(f"{where}.torque_bound: must be non-negative")
        if not self.force_cap > 0:
            out.append(f"{where}.force_cap: must be positive")
        if self.point_contact and (self.torque_bound != 0 or np.any(self.cop_half_extents != 0)):
            out.append(f"{where}.point_contact: requires torque_bound = 0 and cop_half_extents = 0")
        return out


@dataclass(frozen=True, eq=False)
class ContactSchedule:
    phases: tuple[ContactPhase, ...]
    horizon: float
    allow_flight: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))

    @cached_property
    def effectors(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for p in self.phases:
            seen.setdefault(p.effector, None)
        return tuple(seen)

    @cached_property
    def switch_times(self) -> tuple[float, ...]:
        pts = {t for p in self.phases for t in (p.t_start, p.t_end) if 0 < t < self.horizon}
        return tuple(sorted(pts))

    def is_active(self, index: int, t: float, t_close: float | None = None) -> bool:
        """Half-open activity; a phase ending exactly at t_close counts as active there."""
        p = self.phases[index]
        if p.t_start <= t < p.t_end:
            return True
        close = self.horizon if t_close is None else t_close
        return t == close and p.t_end == close and p.t_start < t

    def active_indices(self, t: float, t_close: float | None = None) -> list[int]:
        return [i for i in range(len(self.phases)) if self.is_active(i, t, t_close)]

    def active_contacts(self, t: float) -> list[ContactPhase]:
        if t < -TIME_TOL or t > self.horizon + TIME_TOL:
            raise TimeRangeError(f"t={t} outside horizon [0, {self.horizon}]")
        return [self.phases[i] for i in self.active_indices(t)]

    def continuation(self, index: int) -> int | None:
        """Index of the phase that keeps the same sole right after `index` ends."""
        p = self.phases[index]
        for j, q in enumerate(self.phases):
            if j != index and abs(q.t_start - p.t_end) <= TIME_TOL and p.same_sole(q):
                return j
        return None

    def phases_of(self, effector: str) -> list[int]:
        idx = [i for i, p in enumerate(self.phases) if p.effector == effector]
        return sorted(idx, key=lambda i: self.phases[i].t_start)

    def violations(self) -> list[str]:
        out = []
        if not self.horizon > 0:
            out.append("schedule.horizon: must be positive")
        for i, p in enumerate(self.phases):
            out.extend(p.violations(i))
            if p.t_start < -TIME_TOL or p.t_end > self.horizon + TIME_TOL:
                out.append(f"phases[{i}]: interval outside [0, {self.horizon}]")
        for eff in self.effectors:
            idx = self.phases_of(eff)
            for a, b in zip(idx, idx[1:]):
                if self.phases[b].t_start < self.phases[a].t_end - TIME_TOL:
                    out.append(f"phases[{b}]: overlaps phases[{a}] of effector {eff}")
        if not self.allow_flight and self.horizon > 0:
            probes = sorted({0.0, *self.switch_times})
            for t in probes:
                if not self.active_indices(t):
                    out.append(f"schedule: no active contact at t={t} (flight phase)")
        return out


@dataclass(frozen=True, eq=False)
class SwingTrajectory:
    """Clamped cubic spline through lift-off, apex and touch-down positions."""

    effector: str
    t_start: float
    t_end: float
    start: np.ndarray
    end: np.ndarray
    apex_height: float = DEFAULT_APEX_HEIGHT

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float).reshape(3))
        object.__setattr__(self, "end", np.asarray(self.end, dtype=float).reshape(3))

    @cached_property
    def spline(self) -> CubicSpline:
        apex = 0.5 * (self.start + self.end)
        apex[2] = max(self.start[2], self.end[2]) + self.apex_height
        times = [self.t_start, 0.5 * (self.t_start + self.t_end), self.t_end]
        return CubicSpline(times, np.vstack([self.start, apex, self.end]), bc_type="clamped")

    def position(self, t: float) -> np.ndarray:
        return self.spline(np.clip(t, self.t_start, self.t_end))

    def velocity(self, t: float) -> np.ndarray:
        if t < self.t_start or t > self.t_end:
            return np.zeros(3)
        return self.spline(t, 1)


def build_swings(
    schedule: ContactSchedule, apex_heights: dict[tuple[str, int], float] | None = None
) -> list[SwingTrajectory]:
    """One swing per gap between consecutive phases of the same effector."""
    apex_heights = apex_heights or {}
    swings = []
    for eff in schedule.effectors:
        idx = schedule.phases_of(eff)
        n_gap = 0
        for a, b in zip(idx, idx[1:]):
            pa, pb = schedule.phases[a], schedule.phases[b]
            if pb.t_start - pa.t_end > TIME_TOL:
                swings.append(SwingTrajectory(
                    effector=eff,
                    t_start=pa.t_end,
                    t_end=pb.t_start,
                    start=pa.center,
                    end=pb.center,
                    apex_height=apex_heights.get((eff, n_gap), DEFAULT_APEX_HEIGHT),
                ))
                n_gap += 1
    return swings


def foot_position(
    schedule: ContactSchedule, swings: Sequence[SwingTrajectory], effector: str, t: float
) -> np.ndarray:
    """Sole center while in stance, swing spline in between."""
    for sw in swings:
        if sw.effector == effector and sw.t_start <= t <= sw.t_end:
            return sw.position(t)
    idx = schedule.phases_of(effector)
    if not idx:
        raise ScheduleError(f"unknown effector {effector!r}")
    for i in idx:
        p = schedule.phases[i]
        if p.t_start - TIME_TOL <= t <= p.t_end + TIME_TOL:
            return p.center.copy()
    first, last = schedule.phases[idx[0]], schedule.phases[idx[-1]]
    if t < first.t_start:
        return first.center.copy()
    if t > last.t_end:
        return last.center.copy()
    raise ScheduleError(f"t={t} falls outside the swing definition of {effector!r}")


@dataclass(frozen=True)
class LimbParams:
    """Point-mass limb: CoM at base + ratio * (foot - base)."""

    mass: float
    ratio: float = LIMB_RATIO


@dataclass(frozen=True, eq=False)
class LimbModel:
    limbs: dict[str, LimbParams]

    def base_mass(self, total_mass: float) -> float:
        return total_mass - sum(l.mass for l in self.limbs.values())

    def violations(self, total_mass: float) -> list[str]:
        out = []
        for eff, limb in self.limbs.items():
            if not limb.mass > 0:
                out.append(f"limbs.{eff}.mass: must be positive")
            if not 0.0 <= limb.ratio <= 1.0:
                out.append(f"limbs.{eff}.ratio: must lie in [0, 1]")
        if not self.base_mass(total_mass) > 0:
            out.append("limbs: total limb mass must be below the robot mass")
        return out


@dataclass(frozen=True, eq=False)
class Posture:
    base: np.ndarray
    limbs: dict[str, np.ndarray]
    com: np.ndarray


def posture_at(
    schedule: ContactSchedule,
    swings: Sequence[SwingTrajectory],
    limbs: LimbModel,
    total_mass: float,
    t: float,
    base_height: float,
    com: np.ndarray | None = None,
) -> Posture:
    """Point-mass posture at time t.

    Without `com` the base hovers base_height above the mean foot position.
    With `com` the base is solved so the whole-body CoM equals it.
    """
    feet = {e: foot_position(schedule, swings, e, t) for e in schedule.effectors}
    m_base = limbs.base_mass(total_mass)
    if com is None:
        base = np.mean(list(feet.values()), axis=0) + np.array([0.0, 0.0, base_height])
    else:
        weight = m_base + sum(lp.mass * (1.0 - lp.ratio) for lp in limbs.limbs.values())
        pull = sum(lp.mass * lp.ratio * feet[e] for e, lp in limbs.limbs.items())
        base = (total_mass * np.asarray(com, dtype=float) - pull) / weight
    limb_pos = {e: base + lp.ratio * (feet[e] - base) for e, lp in limbs.limbs.items()}
    center = (m_base * base + sum(limbs.limbs[e].mass * p for e, p in limb_pos.items())) / total_mass
    return Posture(base=base, limbs=limb_pos, com=center)
