"""Decision vector layout: phase-local control coefficients and sole offsets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.contact_plan import TIME_TOL, ContactPhase, ContactSchedule
from src.errors import InvalidArgumentError, ScheduleError

# Per-phase control channels. Forces are world-frame, torque is the scalar
# about the sole normal and the CoP is in sole tangent coordinates.
CHANNELS = ("fx", "fy", "fz", "tau", "cop_x", "cop_y")
N_CHANNELS = len(CHANNELS)


@dataclass(frozen=True, eq=False)
class WindowPhase:
    """A schedule phase clipped to the optimization window."""

    index: int
    phase: ContactPhase
    t_a: float
    t_b: float

    @property
    def span(self) -> float:
        return self.t_b - self.t_a

    def local(self, t):
        return (np.asarray(t, dtype=float) - self.t_a) / self.span


def window_phases(schedule: ContactSchedule, t0: float, t1: float) -> list[WindowPhase]:
    """Phases with a non-empty overlap with [t0, t1], in schedule order."""
    out = []
    for i, p in enumerate(schedule.phases):
        a, b = max(p.t_start, t0), min(p.t_end, t1)
        if b - a > TIME_TOL:
            out.append(WindowPhase(i, p, a, b))
    if not out:
        raise ScheduleError(f"no contact phase overlaps the window [{t0}, {t1}]")
    return out


class DecisionLayout:
    """Bijective map between (phase, channel, coefficient) and vector index.

    The coefficient block comes first, phase-major; optional sole offsets
    (two per phase) are appended after it.
    """

    def __init__(self, phases: list[WindowPhase], n_coeffs: int, sole_offsets: bool = False):
        if n_coeffs < 1:
            raise InvalidArgumentError(f"need at least one coefficient, got {n_coeffs}")
        self.phases = tuple(phases)
        self.n_coeffs = n_coeffs
        self.sole_offsets = sole_offsets
        self._position = {wp.index: p for p, wp in enumerate(self.phases)}

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def n_control(self) -> int:
        return self.n_phases * N_CHANNELS * self.n_coeffs

    @property
    def dim(self) -> int:
        return self.n_control + (2 * self.n_phases if self.sole_offsets else 0)

    @property
    def t0(self) -> float:
        return min(wp.t_a for wp in self.phases)

    @property
    def t1(self) -> float:
        return max(wp.t_b for wp in self.phases)

    def position_of(self, schedule_index: int) -> int | None:
        return self._position.get(schedule_index)

    def index(self, position: int, channel: int | str, k: int) -> int:
        c = CHANNELS.index(channel) if isinstance(channel, str) else channel
        if not (0 <= position < self.n_phases and 0 <= c < N_CHANNELS and 0 <= k < self.n_coeffs):
            raise InvalidArgumentError(f"no decision variable ({position}, {channel}, {k})")
        return (position * N_CHANNELS + c) * self.n_coeffs + k

    def offset_index(self, position: int, axis: int) -> int:
        if not self.sole_offsets:
            raise InvalidArgumentError("layout has no sole offsets")
        return self.n_control + 2 * position + axis

    def unravel(self, i: int) -> tuple[str, int, int | str, int]:
        """Inverse of index/offset_index: (kind, position, channel or axis, k)."""
        if not 0 <= i < self.dim:
            raise InvalidArgumentError(f"index {i} outside layout of size {self.dim}")
        if i >= self.n_control:
            j = i - self.n_control
            return ("offset", j // 2, j % 2, 0)
        position, rest = divmod(i, N_CHANNELS * self.n_coeffs)
        c, k = divmod(rest, self.n_coeffs)
        return ("coeff", position, CHANNELS[c], k)

    def coeffs(self, x: np.ndarray) -> np.ndarray:
        """View of shape (n_phases, 6, n_coeffs)."""
        return np.asarray(x)[: self.n_control].reshape(self.n_phases, N_CHANNELS, self.n_coeffs)

    def offsets(self, x: np.ndarray) -> np.ndarray:
        if not self.sole_offsets:
            return np.zeros((self.n_phases, 2))
        return np.asarray(x)[self.n_control:].reshape(self.n_phases, 2)

    def pack(self, coeffs: np.ndarray, offsets: np.ndarray | None = None) -> np.ndarray:
        x = np.zeros(self.dim)
        x[: self.n_control] = np.asarray(coeffs, dtype=float).reshape(-1)
        if self.sole_offsets and offsets is not None:
            x[self.n_control:] = np.asarray(offsets, dtype=float).reshape(-1)
        return x

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dim)

    def scales(self, weight: float) -> np.ndarray:
        """Typical magnitude per variable: M|g| for forces, 0.1 m for CoP and offsets."""
        s = np.empty((self.n_phases, N_CHANNELS, self.n_coeffs))
        s[:, 0:3, :] = weight
        for p, wp in enumerate(self.phases):
            s[p, 3, :] = wp.phase.torque_bound if wp.phase.torque_bound > 0 else 1.0
        s[:, 4:6, :] = 0.1
        out = s.reshape(-1)
        if self.sole_offsets:
            out = np.concatenate([out, np.full(2 * self.n_phases, 0.1)])
        return out

    def describe(self) -> dict:
        return {
            "n_coeffs": self.n_coeffs,
            "sole_offsets": self.sole_offsets,
            "phases": [
                {"index": wp.index, "effector": wp.phase.effector, "t_a": wp.t_a, "t_b": wp.t_b}
                for wp in self.phases
            ],
        }


def layout_for(
    schedule: ContactSchedule, t0: float, t1: float, n_coeffs: int, sole_offsets: bool = False
) -> DecisionLayout:
    return DecisionLayout(window_phases(schedule, t0, t1), n_coeffs, sole_offsets)


@dataclass(frozen=True, eq=False)
class DecisionVector:
    """Decision values bound to their layout."""

    layout: DecisionLayout
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != self.layout.dim:
            raise InvalidArgumentError(
                f"decision vector has {values.size} entries, layout expects {self.layout.dim}"
            )
        object.__setattr__(self, "values", values)

    @property
    def coeffs(self) -> np.ndarray:
        return self.layout.coeffs(self.values)

    @property
    def offsets(self) -> np.ndarray:
        return self.layout.offsets(self.values)
