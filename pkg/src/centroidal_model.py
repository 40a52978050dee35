"""Reduced centroidal dynamics: CoM position, linear and angular momentum.

    M r' = l
    l'   = M g + sum f_i
    k'   = sum tau_i + sum (p_i - r) x f_i

Angular momentum is taken about the moving CoM. Everything here is a pure
function of its arguments; the optimizer, the LQR linearization and the
simulator all evaluate dynamics through this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from src.config import DEFAULT_GRAVITY, DEFAULT_MASS
from src.errors import IntegrationError, InvalidArgumentError


def _vec3(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(3)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelParams:
    mass: float = DEFAULT_MASS
    gravity: np.ndarray = field(default_factory=lambda: _vec3(DEFAULT_GRAVITY))

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidArgumentError(f"mass must be positive, got {self.mass}")
        object.__setattr__(self, "gravity", _vec3(self.gravity))

    @property
    def weight(self) -> np.ndarray:
        """Gravity force M*g."""
        return self.mass * self.gravity


@dataclass(frozen=True, eq=False)
class CentroidalState:
    r: np.ndarray
    l: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        for name in ("r", "l", "k"):
            arr = _vec3(getattr(self, name))
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"state component {name} is not finite")
            object.__setattr__(self, name, arr)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.l, self.k])

    @classmethod
    def from_vector(cls, x) -> "CentroidalState":
        x = np.asarray(x, dtype=float).reshape(9)
        return cls(r=x[0:3], l=x[3:6], k=x[6:9])

    @classmethod
    def at_rest(cls, com) -> "CentroidalState":
        return cls(r=com, l=np.zeros(3), k=np.zeros(3))


@dataclass(frozen=True, eq=False)
class ContactWrench:
    """Force and pure torque applied at a stated point."""

    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", _vec3(self.force))
        object.__setattr__(self, "torque", _vec3(self.torque))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @classmethod
    def from_vector(cls, w) -> "ContactWrench":
        w = np.asarray(w, dtype=float).reshape(6)
        return cls(force=w[:3], torque=w[3:])


def skew(a) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    ax, ay, az = np.asarray(a, dtype=float).reshape(3)
    return np.array([[0.0, -az, ay], [az, 0.0, -ax], [-ay, ax, 0.0]])


def momentum_rate(
    state: CentroidalState,
    points: Sequence,
    wrenches: Sequence[ContactWrench],
    params: ModelParams,
) -> np.ndarray:
    """Return (l', k') for wrenches applied at the given points."""
    if len(points) != len(wrenches):
        raise InvalidArgumentError(
            f"{len(points)} application points but {len(wrenches)} wrenches"
        )
    l_dot = params.weight.copy()
    k_dot = np.zeros(3)
    for p, w in zip(points, wrenches):
        l_dot += w.force
        k_dot += w.torque + np.cross(np.asarray(p, dtype=float) - state.r, w.force)
    return np.concatenate([l_dot, k_dot])


def wrench_map(poles: Sequence, r) -> np.ndarray:
    """6 x 6c map from stacked pole wrenches to the contact part of h'."""
    if len(poles) < 1:
        raise InvalidArgumentError("wrench_map needs at least one pole")
    r = np.asarray(r, dtype=float).reshape(3)
    blocks = []
    for p in poles:
        block = np.zeros((6, 6))
        block[0:3, 0:3] = np.eye(3)
        block[3:6, 0:3] = skew(np.asarray(p, dtype=float) - r)
        block[3:6, 3:6] = np.eye(3)
        blocks.append(block)
    return np.hstack(blocks)


def state_derivative(
    state: CentroidalState,
    points: Sequence,
    wrenches: Sequence[ContactWrench],
    params: ModelParams,
) -> np.ndarray:
    """Full 9-vector derivative (r', l', k')."""
    rate = momentum_rate(state, points, wrenches, params)
    return np.concatenate([state.l / params.mass, rate])


WrenchFn = Callable[[float], tuple[Sequence, Sequence[ContactWrench]]]


def rk4_step(
    x: np.ndarray,
    t: float,
    dt: float,
    deriv: Callable[[float, np.ndarray], np.ndarray],
) -> np.ndarray:
    """One classical Runge-Kutta step of x' = deriv(t, x)."""
    k1 = deriv(t, x)
    k2 = deriv(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = deriv(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = deriv(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_state(
    x0: CentroidalState,
    wrench_fn: WrenchFn,
    params: ModelParams,
    t_end: float,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 reference integrator.

    Returns (times, states) with states of shape (len(times), 9). The last
    step is shortened so the final sample lands exactly on t_end.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise InvalidArgumentError(f"t_end must be non-negative, got {t_end}")

    def deriv(t: float, x: np.ndarray) -> np.ndarray:
        points, wrenches = wrench_fn(t)
        for w in wrenches:
            if not (np.all(np.isfinite(w.force)) and np.all(np.isfinite(w.torque))):
                raise IntegrationError("non-finite wrench sample", t)
        return state_derivative(CentroidalState.from_vector(x), points, wrenches, params)

    n_steps = int(np.ceil(t_end / dt - 1e-9))
    times = np.minimum(np.arange(n_steps + 1) * dt, t_end)
    states = np.empty((n_steps + 1, 9))
    states[0] = x0.to_vector()
    for i in range(n_steps):
        h = times[i + 1] - times[i]
        states[i + 1] = rk4_step(states[i], times[i], h, deriv)
    return times, states
