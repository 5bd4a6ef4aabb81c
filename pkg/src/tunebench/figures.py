"""Figure rendering for the analysis reports.

Each renderer writes one PNG next to the delimited table the CLI emits.
All of them take already-computed summaries; nothing here re-reads logs.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import SpeedupDistribution

__all__ = [
    "render_trajectory",
    "render_speedup",
    "render_importance",
    "render_pareto",
]

_DPI = 150


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


Band = tuple[Sequence[float | None], Sequence[float | None], Sequence[float | None]]


def render_trajectory(
    path: str,
    series: Mapping[str, Band],
    *,
    ylabel: str,
    title: str = "",
) -> None:
    """One (mean, lo, hi) band per label; None positions are gaps."""
    colors = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple"]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i, (label, (mean, lo, hi)) in enumerate(series.items()):
        color = colors[i % len(colors)]
        xs = [t + 1 for t, m in enumerate(mean) if m is not None]
        if not xs:
            continue
        ax.plot(xs, [mean[x - 1] for x in xs], color=color, lw=1.5, label=label)
        band_lo = [lo[x - 1] for x in xs]
        band_hi = [hi[x - 1] for x in xs]
        if any(l != h for l, h in zip(band_lo, band_hi)):
            ax.fill_between(xs, band_lo, band_hi, color=color, alpha=0.2, lw=0)
    ax.set_xlabel("evaluations")
    ax.set_ylabel(ylabel)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def render_speedup(path: str, dist: SpeedupDistribution, *, title: str = "") -> None:
    """Histogram of baseline/runtime on a log10 axis, with the median marked."""
    edges = dist.log10_edges
    widths = [edges[i + 1] - edges[i] for i in range(len(edges) - 1)]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar(
        edges[:-1],
        dist.densities,
        width=widths,
        align="edge",
        color="tab:green",
        alpha=0.8,
        edgecolor="white",
    )
    ax.axvline(math.log10(dist.median), color="black", lw=1.0, ls="--",
               label=f"median {dist.median:.3g}x")
    ax.set_xlabel("log10(speedup over default)")
    ax.set_ylabel("density")
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    _finish(fig, path)


def render_importance(path: str, scores: Mapping[str, float], *, title: str = "") -> None:
    """Horizontal bars, largest share on top."""
    items = sorted(scores.items(), key=lambda kv: kv[1])
    names = [k for k, _ in items]
    values = [v for _, v in items]
    fig, ax = plt.subplots(figsize=(6.4, 0.5 * max(len(items), 4) + 1.2))
    ax.barh(names, values, color="tab:orange", alpha=0.9)
    ax.set_xlabel("share of shuffled-feature error increase")
    ax.set_xlim(0, max(values + [0.0]) * 1.15 + 1e-9)
    for y, v in enumerate(values):
        ax.text(v, y, f" {v:.3f}", va="center", fontsize=8)
    if title:
        ax.set_title(title)
    _finish(fig, path)


def render_pareto(
    path: str,
    points: Sequence[Sequence[float]],
    front: Sequence[Sequence[float]],
    names: Sequence[str],
    *,
    title: str = "",
) -> None:
    """All feasible points plus the non-dominated set, two objectives only."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    if points:
        ax.scatter(
            [p[0] for p in points],
            [p[1] for p in points],
            s=10,
            color="0.7",
            label=f"evaluations ({len(points)})",
        )
    fr = sorted(tuple(p) for p in front)
    if fr:
        ax.plot(
            [p[0] for p in fr],
            [p[1] for p in fr],
            "o-",
            color="tab:red",
            ms=4,
            lw=1.0,
            label=f"front ({len(fr)})",
        )
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)
