"""Report figures. Each figure is written next to the CSV holding its data."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .classify import Metrics  # noqa: E402


def _save(fig, path: Path, header: Mapping[str, str]) -> None:
    # Fixed metadata keeps PNG bytes reproducible across runs.
    meta = {"Software": "engage", "Description": " ".join(f"{k}={v}" for k, v in header.items())}
    fig.savefig(path, dpi=100, metadata=meta)
    plt.close(fig)


def plot_class_metrics(conditions: Mapping[str, Metrics], title: str, path: str | Path, header: Mapping[str, str]) -> None:
    """Grouped precision/recall bars per class, one group of bars per condition."""
    names = list(conditions)
    classes = list(next(iter(conditions.values())).classes)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    width = 0.8 / max(1, len(names))
    for ax, metric in zip(axes, ("precision", "recall")):
        for k, name in enumerate(names):
            vals = getattr(conditions[name], metric)
            xs = [i + (k - (len(names) - 1) / 2) * width for i in range(len(classes))]
            ax.bar(xs, vals, width, label=name)
        ax.set_xticks(range(len(classes)))
        ax.set_xticklabels(classes, rotation=20, fontsize=8)
        ax.set_ylim(0, 1)
        ax.set_title(metric)
    axes[0].legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    _save(fig, Path(path), header)


def plot_sweep(rows: Sequence[Mapping], classes: Sequence[str], path: str | Path, header: Mapping[str, str]) -> None:
    """Per-class precision against the number of kept features."""
    ks = [r["K"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    for c in classes:
        ax.plot(ks, [r[f"precision_{c}"] for r in rows], marker="o", ms=3, label=c)
    ax.set_xlabel("number of features (K)")
    ax.set_ylabel("precision")
    ax.set_ylim(0, 1)
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, Path(path), header)


def plot_class_distribution(counts: Mapping[str, int], path: str | Path, header: Mapping[str, str]) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    total = sum(counts.values()) or 1
    names = list(counts)
    ax.bar(names, [100.0 * counts[n] / total for n in names])
    ax.set_ylabel("% of frames")
    ax.tick_params(axis="x", labelrotation=20, labelsize=8)
    fig.tight_layout()
    _save(fig, Path(path), header)
