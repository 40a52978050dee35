"""Run manifest: one per run directory, covering every stage written into it."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from src.config import APP_NAME, APP_VERSION, FORMAT_VERSION
from src.utils.core import file_sha256, now_iso
from src.utils.documents import read_yaml, write_yaml

MANIFEST_NAME = "manifest.yaml"


@dataclass
class RunManifest:
    """Inputs, resolved settings, timings and outputs of a run directory.

    Timings and the update stamp change between reruns; every other output
    document of the run is byte-identical for identical inputs and seed.
    """

    run_dir: Path
    seed: int = 0
    scenario: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)

    @property
    def path(self) -> Path:
        return Path(self.run_dir) / MANIFEST_NAME

    @classmethod
    def open(cls, run_dir: Path, seed: int | None = None) -> "RunManifest":
        """Existing manifest of run_dir, or a fresh one."""
        run_dir = Path(run_dir)
        manifest_path = run_dir / MANIFEST_NAME
        if manifest_path.exists():
            doc = read_yaml(manifest_path) or {}
            manifest = cls(
                run_dir=run_dir,
                seed=int(doc.get("seed", 0)),
                scenario=dict(doc.get("scenario") or {}),
                settings=dict(doc.get("settings") or {}),
                stages=dict(doc.get("stages") or {}),
            )
        else:
            manifest = cls(run_dir=run_dir)
        if seed is not None:
            manifest.seed = seed
        return manifest

    def set_scenario(self, name: str, sha256: str, source: str | None = None) -> None:
        self.scenario = {"name": name, "sha256": sha256}
        if source is not None:
            self.scenario["source"] = source

    def record_stage(
        self,
        stage: str,
        exit_code: int,
        outputs: Iterable[Path],
        timings: dict,
        settings: dict | None = None,
        details: dict | None = None,
    ) -> None:
        """Replace a stage entry; files listed by another stage are moved to this one."""
        files = []
        for p in outputs:
            p = Path(p)
            rel = p.relative_to(self.run_dir).as_posix() if p.is_relative_to(self.run_dir) else str(p)
            files.append({"path": rel, "sha256": file_sha256(p)})
        names = {f["path"] for f in files}
        for other, entry in self.stages.items():
            if other != stage:
                entry["outputs"] = [f for f in entry.get("outputs", []) if f["path"] not in names]
        self.stages[stage] = {
            "exit_code": exit_code,
            "outputs": sorted(files, key=lambda f: f["path"]),
            "timings": dict(timings),
            **(details or {}),
        }
        if settings:
            self.settings[stage] = settings

    def outputs(self) -> list[str]:
        return [f["path"] for entry in self.stages.values() for f in entry.get("outputs", [])]

    def to_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "manifest",
            "tool": {"name": APP_NAME, "version": APP_VERSION},
            "seed": self.seed,
            "scenario": self.scenario,
            "settings": self.settings,
            "stages": self.stages,
            "updated": now_iso(),
        }

    def write(self) -> Path:
        return write_yaml(self.path, self.to_document())
