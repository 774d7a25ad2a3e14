"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .effects import EffectsReport, SweepRow, threshold_label

FIG_DPI = 150
FIG_SIZE = (8.0, 5.0)

plt.rcParams["font.size"] = 9
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def save(fig, path) -> None:
    fig.savefig(path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_depth_sweep(rows: list[SweepRow], path) -> None:
    """Direct and per-threshold indirect impact totals against flood depth."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    depths = [r.depth_ft for r in rows]
    ax.plot(depths, [r.direct_people for r in rows], marker="o", color="black",
            linewidth=2, label="directly affected")
    thresholds = list(rows[0].indirect_people) if rows else []
    cmap = plt.get_cmap("viridis")
    for k, d in enumerate(thresholds):
        color = cmap(k / max(len(thresholds) - 1, 1))
        ax.plot(depths, [r.indirect_people[d] for r in rows], marker="s", color=color,
                label=f"indirect, d = {threshold_label(d)}%")
    ax.set_xlabel("flood depth (ft)")
    ax.set_ylabel("people affected")
    ax.set_title("Impacts by flood depth")
    ax.legend(loc="best", fontsize=8)
    save(fig, path)


def plot_effects_summary(report: EffectsReport, path, top_n: int = 20) -> None:
    """Largest net receivers of extra migrants, split by origin type."""
    order = np.argsort(report.extra)[::-1][:top_n][::-1]
    labels = [report.county_ids[i] for i in order]
    flooded = report.extra_from_flooded[order]
    unflooded = report.extra_from_unflooded[order]
    fig, ax = plt.subplots(figsize=(7.0, max(3.0, 0.3 * len(order) + 1.2)))
    y = np.arange(len(order))
    ax.barh(y, flooded, color="#1f77b4", label="from flooded origins")
    ax.barh(y, unflooded, left=flooded, color="#ff7f0e", label="from unflooded origins")
    ax.set_yticks(y)
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("extra incoming migrants vs. baseline")
    ax.set_title(f"Top receiving counties ({report.scenario_name}, {report.year})")
    ax.legend(loc="lower right", fontsize=8)
    save(fig, path)
