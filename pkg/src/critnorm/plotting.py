"""PNG figures for monitor series and inequality reports.

Rendering uses the Agg backend with the ``Software`` metadata entry removed,
so identical data gives byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping

_PNG_METADATA = {"Software": None}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def plot_series(series, path: str | Path) -> Path:
    """Value and running integral of one :class:`MonitorSeries`."""
    plt = _pyplot()
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    ax0.plot(series.times, series.values, marker=".", lw=1.0)
    ax0.set_ylabel(series.name)
    ax1.plot(series.times, series.running_integral, lw=1.0, color="tab:orange")
    ax1.set_ylabel("running integral")
    ax1.set_xlabel("time")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_monitor_series(series: Mapping[str, object], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [plot_series(s, directory / f"{name}.png") for name, s in sorted(series.items())]


def plot_report(report, path: str | Path) -> Path:
    """Coarse and refined empirical constants for every check of a report."""
    plt = _pyplot()
    names = [c.name for c in report.checks]
    coarse = [c.coarse_sup if math.isfinite(c.coarse_sup) else float("nan") for c in report.checks]
    fine = [c.fine_sup if math.isfinite(c.fine_sup) else float("nan") for c in report.checks]
    full = [c.max_ratio if math.isfinite(c.max_ratio) else float("nan") for c in report.checks]
    height = max(3.0, 0.22 * len(names) + 1.5)
    fig, ax = plt.subplots(figsize=(9.0, height))
    ys = range(len(names))
    ax.scatter(full, ys, marker="s", s=14, label=f"sup over corpus ({report.coarse_n}^3)")
    ax.scatter(coarse, ys, marker="o", s=14, facecolors="none", edgecolors="tab:green", label="refinement subset, coarse")
    ax.scatter(fine, ys, marker="x", s=14, color="tab:red", label=f"refinement subset, {report.fine_n}^3")
    ax.set_yticks(list(ys))
    ax.set_yticklabels(names, fontsize=6)
    ax.invert_yaxis()
    if any(v > 0 for v in full if v == v):
        ax.set_xscale("log")
    ax.set_xlabel("LHS / RHS")
    ax.set_title(report.lemma_id, fontsize=9)
    ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)
    return path
