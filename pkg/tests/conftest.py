"""Pytest fixtures for momplan tests."""

import os

import pytest

os.environ.setdefault("MOMPLAN_OUTPUT_DIR", "/tmp/momplan-test-runs")

from src.config import SCENARIO_DIR  # noqa: E402
from src.scenario import load_scenario, parse_scenario  # noqa: E402

STANDING_TEXT = """
format_version: 1
name: standing
model: {mass: 60.0}
schedule:
  horizon: 2.0
  phases:
    - {effector: left_foot, t_start: 0.0, t_end: 2.0, center: [-0.1, 0.0, 0.0]}
    - {effector: right_foot, t_start: 0.0, t_end: 2.0, center: [0.1, 0.0, 0.0]}
"""

STEP_TEXT = """
format_version: 1
name: one_step
model: {mass: 60.0}
schedule:
  horizon: 1.5
  phases:
    - {effector: left_foot, t_start: 0.0, t_end: 0.5, center: [-0.1, 0.0, 0.0]}
    - {effector: right_foot, t_start: 0.0, t_end: 1.5, center: [0.1, 0.0, 0.0]}
    - {effector: left_foot, t_start: 1.0, t_end: 1.5, center: [-0.1, 0.2, 0.0]}
optimizer: {knots_per_phase: 8}
lqr: {horizon: 0.5, dt: 0.01, stride: 0.05}
"""


@pytest.fixture()
def standing_text():
    """Minimal two-foot standing scenario document."""
    return STANDING_TEXT


@pytest.fixture()
def step_text():
    """Short scenario with one left step."""
    return STEP_TEXT


@pytest.fixture(scope="session")
def standing():
    return parse_scenario(STANDING_TEXT)


@pytest.fixture(scope="session")
def one_step():
    return parse_scenario(STEP_TEXT)


@pytest.fixture(scope="session")
def stepping_stones():
    """The shipped stepping-stone benchmark."""
    return load_scenario(SCENARIO_DIR / "stepping_stones.yaml")


@pytest.fixture(scope="session")
def standing_plan(standing):
    """Optimized standing plan, shared across tests."""
    from src.kin_seed import iterate

    plan, _, _ = iterate(standing)
    return plan


@pytest.fixture(scope="session")
def step_plan(one_step):
    from src.kin_seed import iterate

    plan, _, _ = iterate(one_step)
    return plan


@pytest.fixture(scope="session")
def benchmark_run(stepping_stones):
    """Seeded and optimized benchmark plan with its report."""
    from src.kin_seed import iterate

    return iterate(stepping_stones)
