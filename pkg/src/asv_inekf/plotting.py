"""Figures for the CLI report paths. Rendering only; no numbers are computed here."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sim.montecarlo import RunMetrics  # noqa: E402

_ERROR_PANELS = (
    ("xy", "XY position [m]", 1.0),
    ("z", "Z position [m]", 1.0),
    ("roll", "roll [deg]", 180.0 / math.pi),
    ("pitch", "pitch [deg]", 180.0 / math.pi),
    ("yaw", "yaw [deg]", 180.0 / math.pi),
    ("vel", "velocity [m/s]", 1.0),
)


def error_boxplots(results: dict[str, list[RunMetrics]], path) -> None:
    """One panel per state: distribution over runs of the per-run mean absolute error."""
    labels = list(results)
    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    for ax, (name, title, scale) in zip(axes.ravel(), _ERROR_PANELS):
        data = [
            [m.mean(name) * scale for m in results[v] if not m.diverged] or [math.nan] for v in labels
        ]
        ax.boxplot(data)
        ax.set_xticks(range(1, len(labels) + 1), labels, rotation=15, fontsize=8)
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
    fig.suptitle("Mean absolute error per run")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


_STATE_PANELS = (
    ("roll", "roll [deg]", 180.0 / math.pi),
    ("pitch", "pitch [deg]", 180.0 / math.pi),
    ("yaw", "yaw [deg]", 180.0 / math.pi),
    ("x", "x [m]", 1.0),
    ("y", "y [m]", 1.0),
    ("z", "z [m]", 1.0),
)


def convergence_grid(results: dict[str, list[RunMetrics]], truth: dict, path) -> None:
    """Rows are variants, columns are states; each run is a faint line over the dotted truth."""
    labels = list(results)
    fig, axes = plt.subplots(len(labels), 6, figsize=(18, 2.6 * len(labels)), squeeze=False)
    for row, label in enumerate(labels):
        for col, (name, title, scale) in enumerate(_STATE_PANELS):
            ax = axes[row, col]
            for m in results[label]:
                if m.trace is None:
                    continue
                values = m.trace[name] * scale
                if name in ("roll", "pitch", "yaw"):
                    values = np.degrees(np.unwrap(m.trace[name]))
                ax.plot(m.trace["t"], values, lw=0.5, alpha=0.3)
            tv = truth[name] * scale
            ax.plot(truth["t"], tv, "k:", lw=1.5)
            lo, hi = float(np.min(tv)), float(np.max(tv))
            pad = max(hi - lo, 1.0) * 1.5
            ax.set_ylim(lo - pad, hi + pad)
            if row == 0:
                ax.set_title(title)
            if col == 0:
                ax.set_ylabel(label, fontsize=8)
            ax.grid(True, alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=90)
    plt.close(fig)
