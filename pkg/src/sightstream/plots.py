"""Tidy CSV plot data and the matplotlib figures rendered next to it.

Every figure has a CSV twin with one row per observation, so downstream
tooling never has to parse a PNG. Rendering uses the Agg backend and
never opens a window.
"""

from __future__ import annotations

import csv
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import AlignmentReport

_DPI = 150


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Tidy CSV: one header row, one row per observation."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def gate_figure(path: str, lambdas: np.ndarray, boundary: np.ndarray | None) -> None:
    """Gate value per step; boundary steps marked when labels were known."""
    fig, (ax_t, ax_h) = plt.subplots(
        1, 2, figsize=(10, 3.2), gridspec_kw={"width_ratios": [3, 1]}
    )
    t = np.arange(lambdas.size)
    ax_t.plot(t, lambdas, lw=0.6, color="tab:blue")
    if boundary is not None and boundary.any():
        hits = t[1:][boundary]
        ax_t.plot(hits, lambdas[1:][boundary], ".", ms=3, color="tab:red", label="boundary")
        ax_t.legend(loc="upper right", frameon=False)
    ax_t.set_xlabel("step")
    ax_t.set_ylabel("gate value")
    ax_t.set_ylim(-0.02, 1.02)
    if boundary is not None and boundary.any() and (~boundary).any():
        bins = np.linspace(0, 1, 30)
        ax_h.hist(lambdas[1:][~boundary], bins=bins, alpha=0.6, label="within", density=True)
        ax_h.hist(lambdas[1:][boundary], bins=bins, alpha=0.6, label="boundary", density=True)
        ax_h.legend(frameon=False, fontsize=8)
    else:
        ax_h.hist(lambdas, bins=30)
    ax_h.set_xlabel("gate value")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def f1_figure(path: str, per_class: Sequence[float]) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(per_class)), 3.0))
    ax.bar(np.arange(len(per_class)), per_class, color="tab:blue")
    ax.set_xlabel("class")
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def confusion_figure(path: str, confusion: Sequence[Sequence[int]]) -> None:
    conf = np.asarray(confusion, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(conf, cmap="Blues")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def permutation_figure(
    path: str, summary: dict[str, dict[str, dict[str, float]]], modes: Sequence[str]
) -> None:
    """Grouped bars: macro-F1 mean per method and stream order, sd as error bars."""
    methods = sorted(summary)
    width = 0.8 / max(1, len(modes))
    x = np.arange(len(methods))
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(methods), 3.4))
    for i, mode in enumerate(modes):
        means = [summary[m][mode]["mean"] for m in methods]
        sds = [summary[m][mode]["sd"] for m in methods]
        ax.bar(x + i * width, means, width, yerr=sds, capsize=3, label=mode)
    ax.set_xticks(x + width * (len(modes) - 1) / 2)
    ax.set_xticklabels(methods)
    ax.set_ylabel("macro-F1")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def geometry_figure(path: str, sims: np.ndarray, boundary: np.ndarray) -> None:
    """Within-segment vs boundary distributions of prototype agreement."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    lo, hi = float(sims.min()), float(sims.max())
    bins = np.linspace(lo, hi, 40)
    ax.hist(sims[~boundary], bins=bins, alpha=0.6, density=True, label="within")
    ax.hist(sims[boundary], bins=bins, alpha=0.6, density=True, label="boundary")
    ax.set_xlabel("cosine(observation, previous-label prototype)")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def alignment_figure(path: str, report: AlignmentReport) -> None:
    """First vs last segment prototype alignment, one bar pair per class."""
    classes = sorted(report.per_class)
    first = [report.per_class[c]["first"] for c in classes]
    last = [report.per_class[c]["last"] for c in classes]
    x = np.arange(len(classes))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.0 * len(classes)), 3.2))
    ax.bar(x - 0.18, first, 0.36, label="first segment")
    ax.bar(x + 0.18, last, 0.36, label="last segment")
    ax.set_xticks(x)
    ax.set_xticklabels([str(c) for c in classes])
    ax.set_xlabel("class")
    ax.set_ylabel("cosine to true centroid")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
