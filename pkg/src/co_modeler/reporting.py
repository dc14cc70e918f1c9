"""Report rendering: delimited files plus matplotlib figures.

Every CLI report path can emit a CSV and a PNG side by side — class-balance
bars for the dataset report, badge bars for the test report, confidence
bars for a single classification, and per-label average confidence for a
game summary.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

BAR_COLOR = "#4878cf"
WRONG_COLOR = "#d65f5f"
RIGHT_COLOR = "#6acc65"
NONE_COLOR = "#b8b8b8"


def write_delimited(path: str | Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _save(fig: "plt.Figure", path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def dataset_report_figure(
    names: Sequence[str], counts: Sequence[int], path: str | Path, title: str = "Training data per label"
) -> Path:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(names) + 2.0), 3.2))
    ax.bar(range(len(names)), counts, color=BAR_COLOR)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("live samples")
    ax.set_title(title)
    for i, count in enumerate(counts):
        ax.text(i, count, str(count), ha="center", va="bottom", fontsize=8)
    return _save(fig, path)


def confidence_figure(
    names: Sequence[str], confidences: Sequence[float], path: str | Path, title: str = "Classification confidence"
) -> Path:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(names) + 2.0), 3.2))
    ax.bar(range(len(names)), [c * 100.0 for c in confidences], color=BAR_COLOR)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("confidence (%)")
    ax.set_ylim(0, 100)
    ax.set_title(title)
    return _save(fig, path)


def test_report_figure(
    wrong: int, right: int, unverdicted: int, path: str | Path, title: str = "Test dashboard badges"
) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    values = [wrong, right, unverdicted]
    ax.bar(
        ["misclassified", "correct", "no verdict"],
        values,
        color=[WRONG_COLOR, RIGHT_COLOR, NONE_COLOR],
    )
    ax.set_ylabel("test samples")
    ax.set_title(title)
    for i, value in enumerate(values):
        ax.text(i, value, str(value), ha="center", va="bottom", fontsize=8)
    return _save(fig, path)


def game_summary_figure(
    names: Sequence[str],
    average_pcts: Sequence[float],
    total_score: float,
    path: str | Path,
) -> Path:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(names) + 2.0), 3.2))
    ax.bar(range(len(names)), average_pcts, color=BAR_COLOR)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("average confidence (%)")
    ax.set_ylim(0, 100)
    ax.set_title(f"Game summary — total score {total_score:.1f}")
    return _save(fig, path)
