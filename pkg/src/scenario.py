"""Scenario documents: model, initial state, contact schedule and run settings."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial.transform import Rotation

from src.centroidal_model import CentroidalState, ModelParams
from src.config import (
    BASE_HEIGHT,
    DEFAULT_APEX_HEIGHT,
    DEFAULT_COP_HALF_EXTENTS,
    DEFAULT_FRICTION,
    DEFAULT_GRAVITY,
    DEFAULT_MASS,
    DEFAULT_TORQUE_BOUND,
    DEFAULT_WEIGHTS,
    DIVERGENCE_BOUND,
    FORCE_CAP_FACTOR,
    FORMAT_VERSION,
    KNOTS_PER_PHASE,
    LIMB_MASS_FRACTION,
    LIMB_RATIO,
    LQR_DT,
    LQR_HORIZON,
    LQR_Q,
    LQR_R_FORCE,
    LQR_R_TORQUE,
    LQR_STRIDE,
    POLY_ORDER,
    RECEDING_STRIDE,
    RECEDING_WINDOW,
    REGULARIZATION,
    SEED_MAX_PASSES,
    SEED_TOL_ANG,
    SEED_TOL_COM,
    SIM_DT,
    SOLE_OFFSET_BOUND,
    SOLE_OFFSETS,
    SOLVER_CONSTRAINT_TOL,
    SOLVER_MAX_INNER,
    SOLVER_MAX_OUTER,
    SOLVER_TOL,
    TERMINAL_ZERO_WRENCH,
)
from src.contact_plan import (
    ContactPhase,
    ContactSchedule,
    LimbModel,
    LimbParams,
    SwingTrajectory,
    build_swings,
    posture_at,
)
from src.errors import ScenarioError
from src.utils.documents import dump_yaml, load_yaml

WEIGHT_KEYS = tuple(DEFAULT_WEIGHTS)
WARM_STARTS = ("zero", "receding")


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Diagonal tracking weights, one 3-vector per cost term."""

    lin_rate: np.ndarray
    lin_momentum: np.ndarray
    com: np.ndarray
    ang_rate: np.ndarray
    ang_momentum: np.ndarray

    def __post_init__(self):
        for key in WEIGHT_KEYS:
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float).reshape(3))

    @classmethod
    def defaults(cls) -> "CostWeights":
        return cls(**{k: np.array(v) for k, v in DEFAULT_WEIGHTS.items()})

    def as_dict(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in WEIGHT_KEYS}


@dataclass(frozen=True)
class OptimizerSettings:
    poly_order: int = POLY_ORDER
    knots_per_phase: int = KNOTS_PER_PHASE
    regularization: float = REGULARIZATION
    terminal_zero_wrench: bool = TERMINAL_ZERO_WRENCH
    sole_offsets: bool = SOLE_OFFSETS
    sole_offset_bound: float = SOLE_OFFSET_BOUND
    com_lower: tuple[float, float, float] | None = None
    com_upper: tuple[float, float, float] | None = None
    tol: float = SOLVER_TOL
    constraint_tol: float = SOLVER_CONSTRAINT_TOL
    max_outer: int = SOLVER_MAX_OUTER
    max_inner: int = SOLVER_MAX_INNER
    warm_start: str = "zero"
    receding_window: float = RECEDING_WINDOW
    receding_stride: float = RECEDING_STRIDE

    @property
    def n_coeffs(self) -> int:
        return self.poly_order + 1


@dataclass(frozen=True)
class SeedSettings:
    max_passes: int = SEED_MAX_PASSES
    tol_com: float = SEED_TOL_COM
    tol_ang: float = SEED_TOL_ANG
    base_height: float = BASE_HEIGHT


@dataclass(frozen=True)
class LqrSettings:
    horizon: float = LQR_HORIZON
    dt: float = LQR_DT
    stride: float = LQR_STRIDE
    q: float = LQR_Q
    r_force: float = LQR_R_FORCE
    r_torque: float = LQR_R_TORQUE


@dataclass(frozen=True)
class SimSettings:
    dt: float = SIM_DT
    divergence_bound: float = DIVERGENCE_BOUND


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    params: ModelParams
    initial_state: CentroidalState
    schedule: ContactSchedule
    swings: tuple[SwingTrajectory, ...]
    limbs: LimbModel
    weights: CostWeights = field(default_factory=CostWeights.defaults)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    seed: SeedSettings = field(default_factory=SeedSettings)
    lqr: LqrSettings = field(default_factory=LqrSettings)
    simulation: SimSettings = field(default_factory=SimSettings)
    apex_heights: dict[tuple[str, int], float] = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return self.schedule.horizon

    def replace_settings(self, **changes) -> "Scenario":
        """Copy with some settings blocks swapped (optimizer=..., lqr=...)."""
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return Scenario(**data)


class _Reader:
    """Collects every problem found while reading a nested mapping."""

    def __init__(self):
        self.errors: list[str] = []

    def section(self, data: Any, path: str) -> dict:
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.errors.append(f"{path}: expected a mapping")
            return {}
        return data

    def number(self, data: dict, key: str, path: str, default: float | None = None) -> float:
        value = data.get(key, default)
        if value is None:
            self.errors.append(f"{path}.{key}: required")
            return float("nan")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.errors.append(f"{path}.{key}: expected a number, got {value!r}")
            return float("nan")
        return float(value)

    def integer(self, data: dict, key: str, path: str, default: int) -> int:
        value = data.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            self.errors.append(f"{path}.{key}: expected an integer, got {value!r}")
            return default
        return value

    def flag(self, data: dict, key: str, path: str, default: bool) -> bool:
        value = data.get(key, default)
        if not isinstance(value, bool):
            self.errors.append(f"{path}.{key}: expected true or false, got {value!r}")
            return default
        return value

    def vector(self, data: dict, key: str, path: str, size: int, default=None) -> np.ndarray:
        value = data.get(key, default)
        if value is None:
            self.errors.append(f"{path}.{key}: required")
            return np.full(size, np.nan)
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            arr = None
        if arr is None or arr.shape != (size,):
            self.errors.append(f"{path}.{key}: expected {size} numbers, got {value!r}")
            return np.full(size, np.nan)
        return arr


def _phase_frame(raw: dict, path: str, reader: _Reader) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if "rpy_deg" in raw:
        rpy = reader.vector(raw, "rpy_deg", path, 3)
        if not np.all(np.isfinite(rpy)):
            return np.full(3, np.nan), np.full(3, np.nan), np.full(3, np.nan)
        frame = Rotation.from_euler("xyz", rpy, degrees=True).as_matrix()
        return frame[:, 2], frame[:, 0], frame[:, 1]
    normal = reader.vector(raw, "normal", path, 3, default=(0.0, 0.0, 1.0))
    tx = reader.vector(raw, "tangent_x", path, 3, default=(1.0, 0.0, 0.0))
    ty = reader.vector(raw, "tangent_y", path, 3, default=(0.0, 1.0, 0.0))
    return normal, tx, ty


def _read_phases(sched: dict, reader: _Reader, force_cap: float) -> list[ContactPhase]:
    defaults = reader.section(sched.get("defaults"), "schedule.defaults")
    d_ext = reader.vector(defaults, "cop_half_extents", "schedule.defaults", 2, DEFAULT_COP_HALF_EXTENTS)
    d_tau = reader.number(defaults, "torque_bound", "schedule.defaults", DEFAULT_TORQUE_BOUND)
    d_mu = reader.number(defaults, "friction", "schedule.defaults", DEFAULT_FRICTION)
    d_cap = reader.number(defaults, "force_cap", "schedule.defaults", force_cap)

    raw_phases = sched.get("phases")
    if not isinstance(raw_phases, list) or not raw_phases:
        reader.errors.append("schedule.phases: expected a non-empty list")
        return []

    phases = []
    for i, raw in enumerate(raw_phases):
        path = f"phases[{i}]"
        raw = reader.section(raw, path)
        effector = raw.get("effector")
        if not isinstance(effector, str) or not effector:
            reader.errors.append(f"{path}.effector: expected a name")
            effector = f"<missing-{i}>"
        point = reader.flag(raw, "point_contact", path, False)
        normal, tx, ty = _phase_frame(raw, path, reader)
        phases.append(ContactPhase(
            effector=effector,
            t_start=reader.number(raw, "t_start", path),
            t_end=reader.number(raw, "t_end", path),
            center=reader.vector(raw, "center", path, 3),
            normal=normal,
            tangent_x=tx,
            tangent_y=ty,
            cop_half_extents=reader.vector(
                raw, "cop_half_extents", path, 2, (0.0, 0.0) if point else d_ext
            ),
            torque_bound=reader.number(raw, "torque_bound", path, 0.0 if point else d_tau),
            friction=reader.number(raw, "friction", path, d_mu),
            force_cap=reader.number(raw, "force_cap", path, d_cap),
            point_contact=point,
        ))
    return phases


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document, reporting all violations at once."""
    try:
        data = load_yaml(text)
    except Exception as e:
        raise ScenarioError([f"document: not valid YAML ({e})"]) from e
    reader = _Reader()
    data = reader.section(data, "document")

    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        reader.errors.append(f"format_version: unsupported version {version!r}")
    name = str(data.get("name", "scenario"))

    model = reader.section(data.get("model"), "model")
    mass = reader.number(model, "mass", "model", DEFAULT_MASS)
    gravity = reader.vector(model, "gravity", "model", 3, DEFAULT_GRAVITY)
    if not mass > 0:
        reader.errors.append("model.mass: must be positive")
        mass = DEFAULT_MASS
    if not np.all(np.isfinite(gravity)):
        gravity = np.array(DEFAULT_GRAVITY)
    params = ModelParams(mass=mass, gravity=gravity)

    sched = reader.section(data.get("schedule"), "schedule")
    horizon = reader.number(sched, "horizon", "schedule")
    allow_flight = reader.flag(sched, "allow_flight", "schedule", False)
    cap = FORCE_CAP_FACTOR * float(np.linalg.norm(params.weight))
    phases = _read_phases(sched, reader, cap)
    schedule = ContactSchedule(tuple(phases), horizon, allow_flight)
    if phases and np.isfinite(horizon):
        reader.errors.extend(schedule.violations())

    swing_raw = reader.section(data.get("swing"), "swing")
    apex_default = reader.number(swing_raw, "apex_height", "swing", DEFAULT_APEX_HEIGHT)
    apex = {}
    for j, step in enumerate(swing_raw.get("steps") or []):
        step = reader.section(step, f"swing.steps[{j}]")
        apex[(str(step.get("effector")), reader.integer(step, "index", f"swing.steps[{j}]", 0))] = (
            reader.number(step, "apex_height", f"swing.steps[{j}]")
        )

    limbs_raw = reader.section(data.get("limbs"), "limbs")
    limb_map = {}
    for eff in schedule.effectors:
        entry = reader.section(limbs_raw.get(eff), f"limbs.{eff}")
        limb_map[eff] = LimbParams(
            mass=reader.number(entry, "mass", f"limbs.{eff}", LIMB_MASS_FRACTION * mass),
            ratio=reader.number(entry, "ratio", f"limbs.{eff}", LIMB_RATIO),
        )
    for eff in limbs_raw:
        if eff not in limb_map:
            reader.errors.append(f"limbs.{eff}: effector has no contact phases")
    limbs = LimbModel(limb_map)
    reader.errors.extend(limbs.violations(mass))

    w_raw = reader.section(data.get("weights"), "weights")
    weights = CostWeights(**{
        k: reader.vector(w_raw, k, "weights", 3, DEFAULT_WEIGHTS[k]) for k in WEIGHT_KEYS
    })
    for k in WEIGHT_KEYS:
        if np.any(getattr(weights, k) < 0):
            reader.errors.append(f"weights.{k}: must be non-negative")

    optimizer = _read_optimizer(reader.section(data.get("optimizer"), "optimizer"), reader)
    seed = _read_settings(SeedSettings, reader.section(data.get("seed"), "seed"), "seed", reader)
    lqr = _read_settings(LqrSettings, reader.section(data.get("lqr"), "lqr"), "lqr", reader)
    sim = _read_settings(
        SimSettings, reader.section(data.get("simulation"), "simulation"), "simulation", reader
    )

    if reader.errors:
        raise ScenarioError(reader.errors)

    swings = tuple(build_swings(schedule, {
        key: apex.get(key, apex_default)
        for key in _gap_keys(schedule)
    }))

    init_raw = data.get("initial_state")
    if init_raw is None:
        seed_pose = posture_at(schedule, swings, limbs, mass, 0.0, seed.base_height)
        initial = CentroidalState.at_rest(seed_pose.com)
    else:
        init_raw = reader.section(init_raw, "initial_state")
        initial_r = reader.vector(init_raw, "com", "initial_state", 3)
        initial_l = reader.vector(init_raw, "linear_momentum", "initial_state", 3, (0.0, 0.0, 0.0))
        initial_k = reader.vector(init_raw, "angular_momentum", "initial_state", 3, (0.0, 0.0, 0.0))
        if reader.errors:
            raise ScenarioError(reader.errors)
        initial = CentroidalState(initial_r, initial_l, initial_k)

    return Scenario(
        name=name,
        params=params,
        initial_state=initial,
        schedule=schedule,
        swings=swings,
        limbs=limbs,
        weights=weights,
        optimizer=optimizer,
        seed=seed,
        lqr=lqr,
        simulation=sim,
        apex_heights={k: apex.get(k, apex_default) for k in _gap_keys(schedule)},
    )


def _gap_keys(schedule: ContactSchedule) -> list[tuple[str, int]]:
    counts: dict[str, int] = {}
    keys = []
    for sw in build_swings(schedule):
        n = counts.get(sw.effector, 0)
        keys.append((sw.effector, n))
        counts[sw.effector] = n + 1
    return keys


def _read_settings(cls, raw: dict, path: str, reader: _Reader):
    values = {}
    for name, fdef in cls.__dataclass_fields__.items():
        default = fdef.default
        if isinstance(default, bool):
            values[name] = reader.flag(raw, name, path, default)
        elif isinstance(default, int):
            values[name] = reader.integer(raw, name, path, default)
        elif isinstance(default, float):
            values[name] = reader.number(raw, name, path, default)
    for key in raw:
        if key not in cls.__dataclass_fields__:
            reader.errors.append(f"{path}.{key}: unknown setting")
    settings = cls(**values)
    for name, value in values.items():
        if isinstance(value, (int, float)) and not isinstance(value, bool) and name != "regularization":
            if not value > 0:
                reader.errors.append(f"{path}.{name}: must be positive")
    return settings


def _read_optimizer(raw: dict, reader: _Reader) -> OptimizerSettings:
    plain = {k: v for k, v in raw.items() if k not in ("com_lower", "com_upper", "warm_start")}
    settings = _read_settings(OptimizerSettings, plain, "optimizer", reader)
    if settings.regularization < 0:
        reader.errors.append("optimizer.regularization: must be non-negative")
    warm = raw.get("warm_start", "zero")
    if warm not in WARM_STARTS:
        reader.errors.append(f"optimizer.warm_start: expected one of {WARM_STARTS}, got {warm!r}")
        warm = "zero"
    box = {}
    for key in ("com_lower", "com_upper"):
        if raw.get(key) is not None:
            box[key] = tuple(reader.vector(raw, key, "optimizer", 3).tolist())
    if len(box) == 1:
        reader.errors.append("optimizer.com_lower/com_upper: give both bounds or neither")
        box = {}
    if box and np.any(np.array(box["com_lower"]) > np.array(box["com_upper"])):
        reader.errors.append("optimizer.com_lower: exceeds com_upper")
    return OptimizerSettings(**{**asdict(settings), **box, "warm_start": warm})


def load_scenario(path: Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError([f"document: cannot read {path} ({e.strerror})"]) from e
    return parse_scenario(text)


def scenario_document(scenario: Scenario) -> dict:
    """Fully resolved scenario with explicit sole frames and every default filled in."""
    phases = []
    for p in scenario.schedule.phases:
        phases.append({
            "effector": p.effector,
            "t_start": p.t_start,
            "t_end": p.t_end,
            "center": p.center,
            "normal": p.normal,
            "tangent_x": p.tangent_x,
            "tangent_y": p.tangent_y,
            "cop_half_extents": p.cop_half_extents,
            "torque_bound": p.torque_bound,
            "friction": p.friction,
            "force_cap": p.force_cap,
            "point_contact": p.point_contact,
        })
    optimizer = asdict(scenario.optimizer)
    for key in ("com_lower", "com_upper"):
        if optimizer[key] is None:
            del optimizer[key]
    return {
        "format_version": FORMAT_VERSION,
        "name": scenario.name,
        "model": {"mass": scenario.params.mass, "gravity": scenario.params.gravity},
        "initial_state": {
            "com": scenario.initial_state.r,
            "linear_momentum": scenario.initial_state.l,
            "angular_momentum": scenario.initial_state.k,
        },
        "schedule": {
            "horizon": scenario.schedule.horizon,
            "allow_flight": scenario.schedule.allow_flight,
            "phases": phases,
        },
        "swing": {
            "apex_height": DEFAULT_APEX_HEIGHT,
            "steps": [
                {"effector": eff, "index": idx, "apex_height": h}
                for (eff, idx), h in sorted(scenario.apex_heights.items())
            ],
        },
        "limbs": {
            eff: {"mass": lp.mass, "ratio": lp.ratio} for eff, lp in scenario.limbs.limbs.items()
        },
        "weights": scenario.weights.as_dict(),
        "optimizer": optimizer,
        "seed": asdict(scenario.seed),
        "lqr": asdict(scenario.lqr),
        "simulation": asdict(scenario.simulation),
    }


def serialize_scenario(scenario: Scenario) -> str:
    return dump_yaml(scenario_document(scenario))


def scenario_from_document(doc: dict) -> Scenario:
    """Rebuild a scenario embedded in another document (plan or gains)."""
    return parse_scenario(dump_yaml(doc))
