"""Plan CLI command."""

from __future__ import annotations

from dataclasses import asdict, replace
from pathlib import Path

from src.config import DEFAULT_OUTPUT_DIR, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_SUCCESS
from src.errors import MomplanError, ScenarioError
from src.kin_seed import iterate
from src.logger import logger
from src.momentum_opt import Plan, write_plan
from src.scenario import Scenario, load_scenario, serialize_scenario
from src.utils import RunManifest, sanitize_run_name, sha256_bytes, stopwatch, write_yaml
from src.utils.documents import atomic_write_text


def run_dir_for(out: str | None, scenario_path: Path) -> Path:
    """<out>/<scenario stem>, with the output root from the environment by default."""
    root = Path(out) if out else DEFAULT_OUTPUT_DIR
    return root / sanitize_run_name(Path(scenario_path).stem)


def read_scenario(cli, path: Path) -> tuple[int, Scenario | None, str]:
    """Parse the scenario file; returns (exit code, scenario, input hash)."""
    path = Path(path)
    if not path.is_file():
        return cli.error(f"Scenario not found: {path}"), None, ""
    try:
        scenario = load_scenario(path)
    except ScenarioError as e:
        return cli.error(f"Invalid scenario {path}", violations=e.violations), None, ""
    scenario = _with_overrides(scenario, cli.args)
    return EXIT_SUCCESS, scenario, sha256_bytes(path.read_bytes())


def _with_overrides(scenario: Scenario, args) -> Scenario:
    changes = {}
    max_passes = getattr(args, "max_passes", None)
    if max_passes is not None:
        changes["seed"] = replace(scenario.seed, max_passes=max_passes)
    warm_start = getattr(args, "warm_start", None)
    if warm_start is not None:
        changes["optimizer"] = replace(scenario.optimizer, warm_start=warm_start)
    return scenario.replace_settings(**changes) if changes else scenario


def plan_stage(cli, scenario: Scenario, run_dir: Path, manifest: RunManifest) -> tuple[int, Plan | None]:
    """Seed iteration and optimization; writes scenario copy and plan/ into run_dir."""
    timings: dict[str, float] = {}
    try:
        with stopwatch(timings, "seed_and_optimize"):
            plan, _, report = iterate(scenario)
    except MomplanError as e:
        manifest.record_stage("plan", EXIT_ERROR, [], timings, details={"error": str(e)})
        manifest.write()
        return cli.error(f"Planning failed: {e}"), None

    diag = plan.diagnostics
    code = EXIT_SUCCESS if plan.success else EXIT_NOT_CONVERGED
    with stopwatch(timings, "write"):
        outputs = [atomic_write_text(run_dir / "scenario.yaml", serialize_scenario(scenario))]
        outputs += write_plan(plan, run_dir / "plan")
        outputs.append(write_yaml(run_dir / "plan" / "seed.yaml", report.to_document()))
    manifest.record_stage(
        "plan",
        code,
        outputs,
        timings,
        settings={
            "optimizer": asdict(scenario.optimizer),
            "seed": asdict(scenario.seed),
            "weights": scenario.weights.as_dict(),
        },
        details={
            "success": diag.success,
            "reason": diag.reason,
            "objective": diag.objective,
            "max_violation": diag.max_violation,
            "kkt_residual": diag.kkt_residual,
            "iterations": diag.iterations,
            "seed_passes": len(report.passes),
            "seed_converged": report.converged,
        },
    )
    if code != EXIT_SUCCESS:
        logger.warning(f"Plan for {scenario.name} did not converge ({diag.reason})")
    return code, plan


def cmd_plan(cli) -> int:
    """Handle: momplan plan <scenario>."""
    path = Path(cli.args.scenario)
    code, scenario, digest = read_scenario(cli, path)
    if scenario is None:
        return code

    run_dir = run_dir_for(cli.args.out, path)
    manifest = RunManifest(run_dir=run_dir, seed=cli.args.seed)
    manifest.set_scenario(scenario.name, digest, str(path))
    code, plan = plan_stage(cli, scenario, run_dir, manifest)
    if plan is None:
        return code
    manifest.write()

    diag = plan.diagnostics
    cli.output(
        {
            "run_dir": str(run_dir),
            "success": diag.success,
            "reason": diag.reason,
            "objective": diag.objective,
            "max_violation": diag.max_violation,
            "seed_passes": manifest.stages["plan"]["seed_passes"],
        },
        f"Plan {'converged' if diag.success else 'NOT converged'}: objective {diag.objective:.6e}, "
        f"max violation {diag.max_violation:.2e} -> {run_dir / 'plan'}",
    )
    return code
