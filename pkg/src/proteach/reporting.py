"""Result files: per-cell metrics, sweep summaries, confusion matrix exports.

All files are comma-delimited text with a `# key = value` header embedding the
fully resolved configuration, so every run is self-describing. Floats are
written with repr and parse back exactly; rerunning a command reproduces the
files byte for byte.

Metrics file columns: method, noise, seed, epoch, model, accuracy, then one
recall column per class. `epoch` is the 0-based evaluation epoch, or the word
`stable` for the row holding the mean accuracy over the final-epoch
evaluations; those rows are what summaries aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .trainer import Metrics, TrainHistory


def fmt(value: float) -> str:
    return repr(float(value))


def _header_lines(header: dict[str, str]) -> list[str]:
    return [f"# {key} = {header[key]}" for key in sorted(header)]


def metrics_rows(
    method: str, noise: float, seed: int, history: TrainHistory
) -> list[tuple]:
    """Flatten a training history into metrics-file rows."""
    rows = []
    for epoch, evals in enumerate(history.epoch_metrics):
        for model in history.model_names:
            if model in evals:
                m = evals[model]
                rows.append((method, noise, seed, epoch, model, m.accuracy, m.per_class_recall))
    for model in history.model_names:
        if model in history.stable_accuracy:
            recalls = _stable_recalls(history, model)
            rows.append((method, noise, seed, "stable", model, history.stable_accuracy[model], recalls))
    return rows


def _stable_recalls(history: TrainHistory, model: str) -> np.ndarray:
    stacked = np.stack([ev[model].per_class_recall for ev in history.final_evals])
    return stacked.mean(axis=0)


def write_metrics_file(path: str | Path, header: dict[str, str], rows: list[tuple]) -> None:
    num_classes = len(rows[0][6]) if rows else 0
    columns = ["method", "noise", "seed", "epoch", "model", "accuracy"]
    columns += [f"recall_{c}" for c in range(num_classes)]
    lines = _header_lines(header)
    lines.append(",".join(columns))
    for method, noise, seed, epoch, model, acc, recalls in rows:
        cells = [method, fmt(noise), str(seed), str(epoch), model, fmt(acc)]
        cells += [fmt(r) for r in recalls]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_metrics_file(path: str | Path) -> tuple[dict[str, str], list[dict]]:
    header: dict[str, str] = {}
    rows: list[dict] = []
    columns: list[str] | None = None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw.startswith("#"):
            key, sep, value = raw[1:].partition("=")
            if sep:
                header[key.strip()] = value.strip()
            continue
        if not raw.strip():
            continue
        if columns is None:
            columns = raw.split(",")
            continue
        parts = raw.split(",")
        row = dict(zip(columns, parts))
        row["noise"] = float(row["noise"])
        row["seed"] = int(row["seed"])
        row["accuracy"] = float(row["accuracy"])
        row["recalls"] = np.array(
            [float(row[c]) for c in columns if c.startswith("recall_")], dtype=np.float64
        )
        rows.append(row)
    if columns is None:
        raise ConfigurationError(f"{path}: no column header found")
    return header, rows


@dataclass
class SummaryCell:
    method: str
    noise: float
    accuracies: list[float]
    failed_seeds: list[int]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies)) if self.accuracies else float("nan")


def write_summary(path: str | Path, header: dict[str, str], cells: list[SummaryCell]) -> None:
    lines = _header_lines(header)
    lines.append("method,noise,seeds_ok,seeds_failed,mean_accuracy,std_accuracy")
    for cell in cells:
        lines.append(
            ",".join(
                [
                    cell.method,
                    fmt(cell.noise),
                    str(len(cell.accuracies)),
                    str(len(cell.failed_seeds)),
                    fmt(cell.mean),
                    fmt(cell.std),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_confusion(metrics: Metrics, path: str | Path, header: dict[str, str] | None = None) -> None:
    """Write confusion counts plus the row-normalized matrix.

    Counts round-trip exactly through import_confusion; the normalized block
    is informational.
    """
    lines = _header_lines(header or {})
    n = metrics.confusion.shape[0]
    lines.append("# counts (rows = true class)")
    for i in range(n):
        lines.append(",".join(str(int(v)) for v in metrics.confusion[i]))
    lines.append("# row-normalized")
    totals = metrics.confusion.sum(axis=1)
    for i in range(n):
        denom = max(int(totals[i]), 1)
        lines.append(",".join(fmt(v / denom) for v in metrics.confusion[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_confusion(path: str | Path) -> Metrics:
    """Rebuild Metrics from an exported confusion file."""
    count_rows: list[list[int]] = []
    in_counts = False
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw.startswith("# counts"):
            in_counts = True
            continue
        if raw.startswith("# row-normalized"):
            break
        if raw.startswith("#") or not raw.strip():
            continue
        if in_counts:
            count_rows.append([int(v) for v in raw.split(",")])
    if not count_rows:
        raise ConfigurationError(f"{path}: no counts block found")
    confusion = np.array(count_rows, dtype=np.int64)
    diag = np.diag(confusion).astype(np.float64)
    rows = confusion.sum(axis=1)
    recall = np.where(rows > 0, diag / np.maximum(rows, 1), 0.0)
    return Metrics(
        accuracy=float(diag.sum() / confusion.sum()),
        confusion=confusion,
        per_class_recall=recall,
    )
