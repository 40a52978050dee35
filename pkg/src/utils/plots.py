"""SVG figures for plans, gains and closed-loop runs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")  # headless
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed salt and no date stamp keep repeated renders byte-identical
matplotlib.rcParams["svg.hashsalt"] = "momplan"
_SVG_META = {"Date": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_tracking(log, path: Path) -> Path:
    """CoM position against the plan, one panel per axis."""
    times = np.array(log.times)
    states = np.array(log.states)
    refs = np.array(log.references)
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    for a, ax in enumerate(axes):
        ax.plot(times, refs[:, a], lw=1.2, color="#999999", label="plan")
        ax.plot(times, states[:, a], lw=1.5, color="#0B6E99", label="closed loop")
        ax.set_ylabel(f"com {'xyz'[a]} [m]")
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="best")
    axes[-1].set_xlabel("t [s]")
    return _save(fig, path)


def plot_series(times: Sequence[float], series: dict[str, np.ndarray], path: Path,
                ylabel: str = "") -> Path:
    """Several named curves over a shared time axis."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, values in series.items():
        ax.plot(times, values, lw=1.2, label=name)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    return _save(fig, path)


def plot_momentum_tracking(log, path: Path) -> Path:
    """Linear and angular momentum against the plan, one panel per component."""
    times = np.array(log.times)
    states = np.array(log.states)
    refs = np.array(log.references)
    fig, axes = plt.subplots(3, 2, figsize=(10, 6), sharex=True)
    for c, (name, unit) in enumerate((("l", "kg m/s"), ("k", "kg m^2/s"))):
        for a in range(3):
            col = 3 + 3 * c + a
            ax = axes[a, c]
            ax.plot(times, refs[:, col], lw=1.2, color="#999999", label="plan")
            ax.plot(times, states[:, col], lw=1.5, color="#0B6E99", label="closed loop")
            ax.set_ylabel(f"{name} {'xyz'[a]} [{unit}]")
            ax.grid(True, alpha=0.3)
        axes[-1, c].set_xlabel("t [s]")
    axes[0, 0].legend(loc="best")
    return _save(fig, path)
