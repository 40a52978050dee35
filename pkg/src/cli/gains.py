"""Gains CLI command."""

from __future__ import annotations

from dataclasses import asdict, replace
from pathlib import Path

import yaml

from src.config import EXIT_ERROR, EXIT_SUCCESS, THREADS
from src.errors import MomplanError
from src.lqr_tracker import GainTable, LqrWeights, sliding_recompute, write_gains
from src.momentum_opt import Plan, load_plan
from src.scenario import LqrSettings, serialize_scenario
from src.utils import RunManifest, sha256_bytes, stopwatch

_LOAD_ERRORS = (OSError, MomplanError, yaml.YAMLError, KeyError, TypeError, ValueError)


def read_plan(cli, path: Path) -> tuple[int, Plan | None]:
    path = Path(path)
    if not path.exists():
        return cli.error(f"Plan not found: {path}"), None
    try:
        return EXIT_SUCCESS, load_plan(path)
    except _LOAD_ERRORS as e:
        return cli.error(f"Cannot load plan {path}: {e}"), None


def default_run_dir(path: Path) -> Path:
    """Run directory holding a plan/ or gains/ directory (or a file inside one)."""
    path = Path(path)
    stage_dir = path if path.is_dir() else path.parent
    return stage_dir.parent


def lqr_settings(base: LqrSettings, args) -> LqrSettings:
    """Scenario LQR settings with command-line overrides applied.

    The stride follows a changed dt unless given explicitly.
    """
    changes = {
        key: getattr(args, key, None)
        for key in ("horizon", "dt", "q", "r_force", "r_torque")
        if getattr(args, key, None) is not None
    }
    stride = getattr(args, "stride", None)
    if stride is None and "dt" in changes:
        stride = changes["dt"]
    if stride is not None:
        changes["stride"] = stride
    return replace(base, **changes)


def gains_stage(cli, plan: Plan, run_dir: Path, manifest: RunManifest) -> tuple[int, GainTable | None]:
    settings = lqr_settings(plan.scenario.lqr, cli.args)
    workers = getattr(cli.args, "workers", None) or THREADS
    timings: dict[str, float] = {}
    try:
        with stopwatch(timings, "synthesis"):
            provider = sliding_recompute(
                plan, LqrWeights.from_settings(settings), settings.horizon, settings.dt, settings.stride
            )
            table = provider.table(workers=workers)
    except MomplanError as e:
        manifest.record_stage("gains", EXIT_ERROR, [], timings, details={"error": str(e)})
        manifest.write()
        return cli.error(f"Gain synthesis failed: {e}"), None

    with stopwatch(timings, "write"):
        outputs = write_gains(table, run_dir / "gains")
    manifest.record_stage(
        "gains",
        EXIT_SUCCESS,
        outputs,
        timings,
        settings={**asdict(settings), "workers": workers},
        details={
            "control_steps": len(table.steps),
            "steps_per_window": provider.n_steps,
        },
    )
    return EXIT_SUCCESS, table


def cmd_gains(cli) -> int:
    """Handle: momplan gains <plan>."""
    path = Path(cli.args.plan)
    code, plan = read_plan(cli, path)
    if plan is None:
        return code

    run_dir = Path(cli.args.out) if cli.args.out else default_run_dir(path)
    manifest = RunManifest.open(run_dir)
    if not manifest.scenario:
        manifest.set_scenario(plan.scenario.name, sha256_bytes(serialize_scenario(plan.scenario).encode()))
    code, table = gains_stage(cli, plan, run_dir, manifest)
    if table is None:
        return code
    manifest.write()

    details = manifest.stages["gains"]
    cli.output(
        {"run_dir": str(run_dir), **details},
        f"Gains for {details['control_steps']} control steps "
        f"({details['steps_per_window']} steps per window) -> {run_dir / 'gains'}",
    )
    return code
