"""Figures rendered next to the CSV outputs.

matplotlib is imported lazily with the non-interactive Agg backend so the
library works headless and so importing :mod:`etlp` stays cheap.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .experiment import MetricsRecord, SweepTable


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def learning_curve(records: Sequence[MetricsRecord], path: str | Path, title: str = "") -> Path:
    """Accuracy per epoch, one thin line per seed and a bold mean, train and test."""
    plt = _pyplot()
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for split, color in (("train", "tab:blue"), ("test", "tab:orange")):
        per_seed: dict[int, dict[int, float]] = defaultdict(dict)
        for r in records:
            if r.split == split and isinstance(r.seed, int):
                per_seed[r.seed][r.epoch] = r.accuracy
        if not per_seed:
            continue
        epochs = sorted({e for curve in per_seed.values() for e in curve})
        for curve in per_seed.values():
            ax.plot(epochs, [curve.get(e, np.nan) for e in epochs], color=color, alpha=0.3, lw=0.8)
        mean = [np.nanmean([c.get(e, np.nan) for c in per_seed.values()]) for e in epochs]
        ax.plot(epochs, mean, color=color, lw=2, label=f"{split} (mean of {len(per_seed)})")
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def theta_sweep_plot(table: SweepTable, path: str | Path) -> Path:
    """Final test accuracy against theta with one error-bar line per rule."""
    plt = _pyplot()
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for rule in table.rules:
        mu = [100 * table.mu[rule, th] for th in table.thetas]
        sd = [100 * table.sigma[rule, th] for th in table.thetas]
        ax.errorbar(table.thetas, mu, yerr=sd, marker="o", capsize=3, label=rule)
    ax.set_xlabel("theta")
    ax.set_ylabel("test accuracy (%)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def complexity_plot(report, path: str | Path) -> Path:
    """Stored scalars per rule and layer on a log axis."""
    plt = _pyplot()
    path = Path(path)
    layers = list(dict.fromkeys(name for name, _, _ in report))
    rules = list(dict.fromkeys(c.rule for _, _, c in report))
    totals = {(name, c.rule): c.total for name, _, c in report}
    width = 0.8 / len(rules)
    x = np.arange(len(layers))
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, rule in enumerate(rules):
        ax.bar(x + k * width, [max(totals[layer, rule], 1) for layer in layers], width, label=rule)
    ax.set_xticks(x + width * (len(rules) - 1) / 2, layers)
    ax.set_yscale("log")
    ax.set_ylabel("stored scalars")
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
