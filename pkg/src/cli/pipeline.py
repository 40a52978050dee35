"""Pipeline CLI command."""

from __future__ import annotations

from pathlib import Path

from src.cli.gains import gains_stage
from src.cli.plan import plan_stage, read_scenario, run_dir_for
from src.cli.simulate import sim_stage
from src.config import EXIT_SUCCESS
from src.utils import RunManifest


def cmd_pipeline(cli) -> int:
    """Handle: momplan pipeline <scenario>.

    Stages run in order through one run directory; the first stage that
    fails stops the run and its exit code is returned.
    """
    path = Path(cli.args.scenario)
    code, scenario, digest = read_scenario(cli, path)
    if scenario is None:
        return code

    run_dir = run_dir_for(cli.args.out, path)
    manifest = RunManifest(run_dir=run_dir, seed=cli.args.seed)
    manifest.set_scenario(scenario.name, digest, str(path))

    code, plan = plan_stage(cli, scenario, run_dir, manifest)
    if code != EXIT_SUCCESS:
        if plan is not None:
            manifest.write()
        return code
    manifest.write()

    code, table = gains_stage(cli, plan, run_dir, manifest)
    if table is None:
        return code
    manifest.write()

    if not cli.args.skip_simulate:
        code = sim_stage(cli, plan, table, run_dir, manifest)
        if "simulate" in manifest.stages:
            manifest.write()

    summary = {name: entry["exit_code"] for name, entry in manifest.stages.items()}
    cli.output(
        {"run_dir": str(run_dir), "exit_code": code, "stages": summary},
        "\n".join(f"{name}: exit {c}" for name, c in summary.items()) + f"\n-> {run_dir}",
    )
    return code
