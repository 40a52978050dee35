"""Configuration constants and environment settings."""

from __future__ import annotations

import os
from pathlib import Path

APP_NAME = "momplan"
APP_VERSION = "0.2.0"

# Paths
DEFAULT_OUTPUT_DIR = Path(os.environ.get("MOMPLAN_OUTPUT_DIR", "./runs"))
SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

# Worker threads for gain-window synthesis
THREADS = max(1, int(os.environ.get("MOMPLAN_THREADS", "1")))

# Documents
FORMAT_VERSION = 1
FLOAT_DIGITS = 17

# Model
DEFAULT_MASS = 60.0
DEFAULT_GRAVITY = (0.0, 0.0, -9.81)

# Contacts (placeholder foot dimensions)
DEFAULT_COP_HALF_EXTENTS = (0.11, 0.05)
DEFAULT_TORQUE_BOUND = 10.0
DEFAULT_FRICTION = 0.7
FORCE_CAP_FACTOR = 4.0  # f_cap = factor * M * |g|
DEFAULT_APEX_HEIGHT = 0.08

# Planner
POLY_ORDER = 3
KNOTS_PER_PHASE = 20
DEFAULT_WEIGHTS = {
    "lin_rate": (1e-3, 1e-3, 1e-3),
    "lin_momentum": (1.0, 1.0, 1.0),
    "com": (1.0, 1.0, 1.0),
    "ang_rate": (1e-3, 1e-3, 1e-3),
    "ang_momentum": (1.0, 1.0, 1.0),
}
REGULARIZATION = 1e-9
TERMINAL_ZERO_WRENCH = True
SOLE_OFFSETS = False
SOLE_OFFSET_BOUND = 0.05
SOLVER_TOL = 1e-5
SOLVER_CONSTRAINT_TOL = 1e-6
SOLVER_MAX_OUTER = 30
SOLVER_MAX_INNER = 4000
RECEDING_WINDOW = 3.0
RECEDING_STRIDE = 1.0

# Kinematic seed
LIMB_MASS_FRACTION = 0.16
LIMB_RATIO = 0.5
BASE_HEIGHT = 0.8
SEED_MAX_PASSES = 2
SEED_TOL_COM = 1e-3
SEED_TOL_ANG = 1e-2

# LQR (values from the stepping-stone experiment)
LQR_Q = 10.0
LQR_R_FORCE = 0.1
LQR_R_TORQUE = 0.5
LQR_HORIZON = 2.0
LQR_DT = 0.01
LQR_STRIDE = 0.01

# Simulation
SIM_DT = 0.001
DIVERGENCE_BOUND = 1.0

# Exit codes
EXIT_SUCCESS = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_DIVERGED = 3
