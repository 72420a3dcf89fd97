"""CSV and figure emission for batch runs.

Every batch command writes delimited output; when an output path is given
the same data is also rendered to a PNG next to it (matplotlib, headless).
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

OC_FIELDS = [
    "design",
    "scenario",
    "n_sim",
    "pcs",
    "pas",
    "toxic_selection",
    "no_selection",
    "mean_patients_at_toxic",
    "mean_total_patients",
]


def write_csv(rows: Sequence[dict[str, Any]], path: str | Path, fields: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return path
    fields = fields or list(rows[0].keys())
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def figure_path(out: str | Path) -> Path:
    return Path(out).with_suffix(".png")


def plot_oc_bars(rows: Sequence[dict[str, Any]], path: str | Path) -> Path:
    """Grouped bars of PCS/PAS (and safety metrics) per scenario."""
    path = Path(path)
    scenarios = [str(r["scenario"]) for r in rows]
    x = np.arange(len(rows))
    fig, axes = plt.subplots(2, 1, figsize=(max(6, 0.7 * len(rows) + 2), 7), sharex=True)
    axes[0].bar(x - 0.2, [r["pcs"] for r in rows], width=0.4, label="correct")
    axes[0].bar(x + 0.2, [r["pas"] for r in rows], width=0.4, alpha=0.6, label="acceptable")
    axes[0].set_ylabel("selection proportion")
    axes[0].legend(frameon=False)
    axes[1].bar(x - 0.2, [r["toxic_selection"] for r in rows], width=0.4, label="toxic selection")
    axes[1].bar(x + 0.2, [r["no_selection"] for r in rows], width=0.4, alpha=0.6, label="no selection")
    axes[1].set_ylabel("proportion")
    axes[1].set_xticks(x, scenarios)
    axes[1].set_xlabel("scenario")
    axes[1].legend(frameon=False)
    title = rows[0]["design"] if rows else ""
    axes[0].set_title(f"{title}: operating characteristics")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_stage1(rows: Sequence[dict[str, Any]], path: str | Path) -> Path:
    """Ranked geometric-mean PCS across the hyper-parameter grid."""
    path = Path(path)
    gm = [r["gm_pcs"] for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(range(1, len(gm) + 1), gm, marker=".", lw=1)
    ax.set_xlabel("rank")
    ax.set_ylabel("geometric-mean PCS")
    ax.set_title("stage-1 calibration grid, ranked")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_stage2(rows: Sequence[dict[str, Any]], path: str | Path, threshold: float = 0.85) -> Path:
    """No-recommendation and PCS curves against epsilon."""
    path = Path(path)
    eps = [r["epsilon"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(eps, [r["no_selection_14"] for r in rows], marker=".")
    axes[0].axhline(threshold, color="red", lw=1, ls="--")
    axes[0].set_xlabel("epsilon")
    axes[0].set_ylabel("no-recommendation rate (all-toxic scenario)")
    axes[0].invert_xaxis()
    pcs_keys = [k for k in rows[0] if k.startswith("pcs_")]
    for key in pcs_keys:
        axes[1].plot(eps, [r[key] for r in rows], marker=".", label=key.replace("pcs_", "scenario "))
    axes[1].set_xlabel("epsilon")
    axes[1].set_ylabel("PCS")
    axes[1].invert_xaxis()
    axes[1].legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_benchmark(rows: Sequence[dict[str, Any]], path: str | Path) -> Path:
    path = Path(path)
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(max(6, 0.7 * len(rows) + 2), 4))
    ax.bar(x - 0.2, [r["pcs"] for r in rows], width=0.4, label="correct")
    ax.bar(x + 0.2, [r["pas"] for r in rows], width=0.4, alpha=0.6, label="acceptable")
    ax.set_xticks(x, [str(r["scenario"]) for r in rows])
    ax.set_xlabel("scenario")
    ax.set_ylabel("selection proportion")
    ax.set_title("non-parametric benchmark")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
