"""Simulate CLI command."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from src.cli.gains import _LOAD_ERRORS, default_run_dir, read_plan
from src.config import EXIT_DIVERGED, EXIT_ERROR, EXIT_SUCCESS
from src.errors import MomplanError, ScenarioError, SimulationAborted
from src.lqr_tracker import GainTable, load_gains
from src.momentum_opt import Plan
from src.scenario import serialize_scenario
from src.sim_harness import Disturbance, load_disturbances, simulate, write_run
from src.utils import RunManifest, sha256_bytes, stopwatch


def parse_com_offset(text: str) -> Disturbance:
    """'x,y,z' in meters as an initial-state offset on the CoM."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"--com-offset needs x,y,z, got {text!r}")
    vector = np.zeros(9)
    vector[0:3] = [float(p) for p in parts]
    return Disturbance("offset", vector)


def read_disturbances(cli) -> tuple[int, list[Disturbance] | None]:
    disturbances: list[Disturbance] = []
    spec = getattr(cli.args, "disturbances", None)
    if spec:
        try:
            disturbances += load_disturbances(Path(spec))
        except ScenarioError as e:
            return cli.error(f"Invalid disturbances {spec}", violations=e.violations), None
        except _LOAD_ERRORS as e:
            return cli.error(f"Cannot load disturbances {spec}: {e}"), None
    offset = getattr(cli.args, "com_offset", None)
    if offset:
        try:
            disturbances.append(parse_com_offset(offset))
        except ValueError as e:
            return cli.error(str(e)), None
    return EXIT_SUCCESS, disturbances


def sim_stage(cli, plan: Plan, table: GainTable, run_dir: Path, manifest: RunManifest) -> int:
    code, disturbances = read_disturbances(cli)
    if disturbances is None:
        return code
    feedback = getattr(cli.args, "feedback", "on") == "on"
    timings: dict[str, float] = {}
    try:
        with stopwatch(timings, "simulation"):
            log = simulate(
                plan,
                table,
                disturbances,
                feedback=feedback,
                dt=getattr(cli.args, "sim_dt", None),
                control_dt=table.dt,
                divergence_bound=getattr(cli.args, "divergence_bound", None),
                t_end=table.t_end,
            )
        code = EXIT_SUCCESS
    except SimulationAborted as e:
        log, code = e.log, EXIT_DIVERGED
        cli.error(str(e), code)
    except MomplanError as e:
        manifest.record_stage("simulate", EXIT_ERROR, [], timings, details={"error": str(e)})
        manifest.write()
        return cli.error(f"Simulation failed: {e}")

    with stopwatch(timings, "write"):
        outputs = write_run(log, run_dir / "sim")
    settings = plan.scenario.simulation
    manifest.record_stage(
        "simulate",
        code,
        outputs,
        timings,
        settings={
            "feedback": feedback,
            "dt": getattr(cli.args, "sim_dt", None) or settings.dt,
            "divergence_bound": getattr(cli.args, "divergence_bound", None) or settings.divergence_bound,
            "disturbances": [d.to_document() for d in disturbances],
        },
        details={"metrics": log.metrics()},
    )
    return code


def cmd_simulate(cli) -> int:
    """Handle: momplan simulate <plan> <gains>."""
    plan_path = Path(cli.args.plan)
    code, plan = read_plan(cli, plan_path)
    if plan is None:
        return code
    gains_path = Path(cli.args.gains)
    if not gains_path.exists():
        return cli.error(f"Gains not found: {gains_path}")
    try:
        table = load_gains(gains_path)
    except _LOAD_ERRORS as e:
        return cli.error(f"Cannot load gains {gains_path}: {e}")

    run_dir = Path(cli.args.out) if cli.args.out else default_run_dir(plan_path)
    manifest = RunManifest.open(run_dir)
    if not manifest.scenario:
        manifest.set_scenario(plan.scenario.name, sha256_bytes(serialize_scenario(plan.scenario).encode()))
    code = sim_stage(cli, plan, table, run_dir, manifest)
    if code == EXIT_ERROR:
        return code
    manifest.write()

    metrics = manifest.stages["simulate"]["metrics"]
    cli.output(
        {"run_dir": str(run_dir), "exit_code": code, **metrics},
        f"Simulated {metrics['steps']} control steps"
        f"{' (ABORTED)' if metrics['aborted'] else ''}: "
        f"max CoM error {metrics['max_com_error']:.3e} m, RMS {metrics['rms_com_error']:.3e} m, "
        f"RMS momentum error {metrics['rms_lin_momentum_error']:.3e} / {metrics['rms_ang_momentum_error']:.3e} "
        f"-> {run_dir / 'sim'}",
    )
    return code
