"""Figure rendering for report paths; PNG output alongside delimited files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_FIGSIZE = (6.0, 4.0)
_DPI = 120


def save_pr_curve(points: Sequence, path: str | Path) -> Path:
    """Recall/precision of the threshold family, one marker per threshold."""
    drawable = [p for p in points if not math.isnan(p.precision)]
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    ax.plot([p.recall for p in drawable], [p.precision for p in drawable], "o-", color="tab:blue")
    for p in drawable:
        ax.annotate(f"{p.tau:.2f}", (p.recall, p.precision), fontsize=7, alpha=0.8)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title("critic threshold operating points")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def save_decode_values(traces: Sequence[dict], path: str | Path, limit: int = 8) -> Path:
    """Best selected hypothesis value per iteration for the first few instances.

    ``traces`` holds exported iteration records grouped by instance id.
    """
    by_instance: dict[str, dict[int, float]] = {}
    for record in traces:
        instance_id = record.get("id", "?")
        values = [
            entry["value"]
            for entry in record.get("pool", [])
            if list(entry["lineage"]) in record.get("selected", [])
            or list(entry["lineage"]) in record.get("finished", [])
        ]
        if values:
            by_instance.setdefault(instance_id, {})[record["iteration"]] = max(values)
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    for instance_id, series in list(by_instance.items())[:limit]:
        iterations = sorted(series)
        ax.plot(iterations, [series[i] for i in iterations], marker="o", label=instance_id)
    ax.set_xlabel("iteration")
    ax.set_ylabel("best selected value")
    ax.set_title("beam value per iteration")
    if by_instance:
        ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def save_embodied_scores(records: Sequence[dict], path: str | Path) -> Path:
    """Per-goal normalized subsequence overlap plus the executability rate."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.0, 4.0), dpi=_DPI)
    lcs_values = [r["lcs"] for r in records]
    left.hist(lcs_values, bins=10, range=(0.0, 1.0), color="tab:blue", alpha=0.8)
    left.set_xlabel("lcs score")
    left.set_ylabel("goals")
    left.set_title("lcs distribution")
    rate = sum(1 for r in records if r["executable"]) / len(records) if records else 0.0
    right.bar(["executable"], [rate], color="tab:green", alpha=0.8)
    right.set_ylim(0, 1.05)
    right.set_title(f"executability {rate:.2%}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
