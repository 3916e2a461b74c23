"""Figure rendering for the report subcommands.

Every renderer draws from already-computed report data and writes a PNG
whose bytes depend only on that data (the Agg backend is forced and the
Software metadata tag is stripped).
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .pipeline import LineageReport, PredictorReport  # noqa: E402
from .stats import STAT_FIELDS  # noqa: E402

_SAVE_KWARGS = {"metadata": {"Software": None}, "dpi": 120}


def _save(fig, path: str) -> None:
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_figure_data(rows: Sequence[Sequence[str]], path: str) -> None:
    """Scatter each statistic against root distance, colored by domain.

    `rows` is the figure-data CSV body (species, domain, weighted
    distance, hop depth, 19 statistics); weighted distance is preferred,
    hop depth is the fallback.
    """
    domains = sorted({row[1] for row in rows})
    cmap = plt.get_cmap("tab10")
    colors = {d: cmap(i % 10) for i, d in enumerate(domains)}
    fig, axes = plt.subplots(4, 5, figsize=(22, 14))
    flat = axes.ravel()
    for pos, stat in enumerate(STAT_FIELDS):
        ax = flat[pos]
        for domain in domains:
            xs, ys = [], []
            for row in rows:
                if row[1] != domain:
                    continue
                distance = row[2] or row[3]
                value = row[4 + pos]
                if distance == "" or value == "":
                    continue
                xs.append(float(distance))
                ys.append(float(value))
            ax.scatter(xs, ys, s=8, color=colors[domain],
                       label=domain or "(none)")
        ax.set_title(stat, fontsize=9)
        ax.tick_params(labelsize=7)
    for ax in flat[len(STAT_FIELDS):]:
        ax.axis("off")
    handles, labels = flat[0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower right", fontsize=9)
    fig.suptitle("Network statistics vs. distance from tree root")
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    _save(fig, path)


def render_predictor_report(report: PredictorReport, path: str) -> None:
    """Bar chart of mean relative error per statistic with std bars."""
    names = [row.statistic for row in report.rows]
    means = [row.mean if row.mean is not None else 0.0
             for row in report.rows]
    stds = [row.std if row.std is not None else 0.0
            for row in report.rows]
    fig, ax = plt.subplots(figsize=(12, 5))
    ax.bar(range(len(names)), means, yerr=stds, capsize=3,
           color="steelblue")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("mean relative error")
    ax.set_title("Prediction error per network statistic")
    fig.tight_layout()
    _save(fig, path)


def render_rfe(results: Sequence[tuple[int, float, int]],
               path: str) -> None:
    """Cross-validation accuracy as features are eliminated."""
    sizes = [row[0] for row in results]
    accuracy = [row[1] for row in results]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(sizes, accuracy, marker="o", color="steelblue")
    ax.set_xlabel("number of features")
    ax.set_ylabel("cross-validation accuracy")
    ax.set_title("Recursive feature elimination")
    ax.invert_xaxis()
    fig.tight_layout()
    _save(fig, path)


def render_nodes(report: LineageReport, path: str) -> None:
    """Per-node classifier accuracy against training-set size."""
    xs = [row.num_species for row in report.nodes
          if row.cv_accuracy is not None]
    ys = [row.cv_accuracy for row in report.nodes
          if row.cv_accuracy is not None]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.scatter(xs, ys, s=14, color="steelblue")
    ax.set_xscale("log")
    ax.set_xlabel("species at node")
    ax.set_ylabel("cross-validation accuracy")
    ax.set_title("Per-node classifier accuracy")
    fig.tight_layout()
    _save(fig, path)


def render_levels(report: LineageReport, path: str) -> None:
    """Cumulative lineage accuracy per taxonomic rank."""
    ranks = [row.rank for row in report.levels]
    accuracy = [row.cumulative_accuracy for row in report.levels]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.bar(range(len(ranks)), accuracy, color="steelblue")
    ax.set_xticks(range(len(ranks)))
    ax.set_xticklabels(ranks)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("cumulative accuracy")
    ax.set_title("Lineage accuracy by rank")
    fig.tight_layout()
    _save(fig, path)
