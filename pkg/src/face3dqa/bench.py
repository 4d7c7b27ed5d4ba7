"""Benchmark harness: dataset splits, per-fold evaluation, report rendering."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agreement import QaMode, krcc, plcc, qa_accuracy, srcc
from .core import DatasetManifest, Dimension, DistortionCategory
from .mos import MosEntry
from .salmetrics import DEFAULT_EPSILON, evaluate_pair


class TooFewItemsError(ValueError):
    pass


class MissingPredictionError(ValueError):
    def __init__(self, missing: list[str], what: str = "prediction"):
        self.missing = sorted(missing)
        super().__init__(f"missing {what} for items: {', '.join(self.missing)}")


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic k-fold assignment of items, stratified by model tag."""

    seed: int
    k: int
    folds: dict[str, int]

    def test_items(self, fold: int) -> list[str]:
        return sorted(item for item, f in self.folds.items() if f == fold)

    def train_items(self, fold: int) -> list[str]:
        return sorted(item for item, f in self.folds.items() if f != fold)

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "k": self.k, "folds": self.folds},
            sort_keys=True,
            indent=2,
        ) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "SplitSpec":
        data = json.loads(text)
        return cls(seed=int(data["seed"]), k=int(data["k"]),
                   folds={str(i): int(f) for i, f in data["folds"].items()})

    @classmethod
    def read(cls, path: str | Path) -> "SplitSpec":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def make_splits(manifest: DatasetManifest, k: int = 5, seed: int = 0) -> SplitSpec:
    """Shuffle items within each model-tag stratum and deal them over k folds.

    The deal position rotates across strata so fold sizes stay balanced
    globally as well as within each stratum (imbalance at most 1).
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    ids = manifest.ids()
    if len(ids) < k:
        raise TooFewItemsError(f"need at least {k} items for {k} folds, got {len(ids)}")
    by_tag: dict[str, list[str]] = {}
    for it in manifest.items:
        by_tag.setdefault(it.model_tag, []).append(it.id)
    rng = random.Random(seed)
    folds: dict[str, int] = {}
    start = 0
    for tag in sorted(by_tag):
        group = sorted(by_tag[tag])
        rng.shuffle(group)
        for i, item in enumerate(group):
            folds[item] = (start + i) % k
        start = (start + len(group)) % k
    return SplitSpec(seed=seed, k=k, folds=folds)


def config_fingerprint(flags: dict) -> str:
    """Short stable hash of the flag set that produced a report."""
    canonical = json.dumps(flags, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


#: Canonical report column order; KLD is the only lower-is-better column.
REPORT_COLUMNS = [
    "quality_srcc", "quality_plcc", "quality_krcc",
    "authenticity_srcc", "authenticity_plcc", "authenticity_krcc",
    "qa_accuracy",
    "auc", "nss", "cc", "sim", "kld",
]
LOWER_IS_BETTER = {"kld"}


def evaluate_fold(
    mos_entries: dict[tuple[str, Dimension], MosEntry],
    predictions: dict[str, dict[Dimension, float]],
    fold: int,
    split: SplitSpec,
    *,
    truth_labels: dict[str, frozenset[DistortionCategory]] | None = None,
    predicted_labels: dict[str, frozenset[DistortionCategory]] | None = None,
    gt_maps: dict | None = None,
    gt_fixations: dict | None = None,
    predicted_maps: dict | None = None,
    qa_mode: QaMode = QaMode.EXACT_MATCH,
    epsilon: float = DEFAULT_EPSILON,
) -> dict[str, float]:
    """All agreement and saliency metrics over one fold's test items."""
    test_items = split.test_items(fold)
    metrics: dict[str, float] = {}

    covered_dims = {dim for item, dim in mos_entries if item in set(test_items)}
    for dim in sorted(covered_dims, key=lambda d: d.value):
        items = [i for i in test_items if (i, dim) in mos_entries]
        missing = [i for i in items if i not in predictions or dim not in predictions[i]]
        if missing:
            raise MissingPredictionError(missing, what=f"{dim.value} score prediction")
        gt = np.array([mos_entries[(i, dim)].mos for i in items])
        pred = np.array([predictions[i][dim] for i in items])
        metrics[f"{dim.value}_srcc"] = srcc(gt, pred)
        metrics[f"{dim.value}_plcc"] = plcc(gt, pred)
        metrics[f"{dim.value}_krcc"] = krcc(gt, pred)

    if truth_labels is not None:
        items = [i for i in test_items if i in truth_labels]
        if items:
            missing = [i for i in items if predicted_labels is None or i not in predicted_labels]
            if missing:
                raise MissingPredictionError(missing, what="category prediction")
            metrics["qa_accuracy"] = qa_accuracy(
                [truth_labels[i] for i in items],
                [predicted_labels[i] for i in items],
                mode=qa_mode,
            )

    if gt_maps is not None and gt_fixations is not None:
        items = [i for i in test_items if i in gt_maps and i in gt_fixations]
        if items:
            missing = [i for i in items if predicted_maps is None or i not in predicted_maps]
            if missing:
                raise MissingPredictionError(missing, what="saliency map prediction")
            per_item = [
                evaluate_pair(predicted_maps[i], gt_maps[i], gt_fixations[i], epsilon=epsilon)
                for i in items
            ]
            for key in ("auc", "nss", "cc", "sim", "kld"):
                metrics[key] = float(np.mean([row[key] for row in per_item]))

    return metrics


@dataclass
class MetricReport:
    """One predictor's per-fold metric values plus their mean."""

    predictor: str
    fold_metrics: list[dict[str, float]]
    config_fingerprint: str = ""
    qa_mode: str = QaMode.EXACT_MATCH.value

    def mean_metrics(self) -> dict[str, float]:
        keys = sorted({k for fm in self.fold_metrics for k in fm})
        return {
            k: float(np.mean([fm[k] for fm in self.fold_metrics if k in fm])) for k in keys
        }

    def to_json(self) -> str:
        return json.dumps(
            {
                "predictor": self.predictor,
                "config_fingerprint": self.config_fingerprint,
                "qa_mode": self.qa_mode,
                "folds": self.fold_metrics,
                "mean": self.mean_metrics(),
            },
            sort_keys=True,
            indent=2,
        ) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        data = json.loads(text)
        return cls(
            predictor=str(data["predictor"]),
            fold_metrics=[{k: float(v) for k, v in fm.items()} for fm in data["folds"]],
            config_fingerprint=str(data.get("config_fingerprint", "")),
            qa_mode=str(data.get("qa_mode", QaMode.EXACT_MATCH.value)),
        )

    @classmethod
    def read(cls, path: str | Path) -> "MetricReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _present_columns(reports: list[MetricReport]) -> list[str]:
    seen = {k for r in reports for fm in r.fold_metrics for k in fm}
    return [c for c in REPORT_COLUMNS if c in seen]


def render_report_markdown(reports: list[MetricReport]) -> str:
    """Rows are predictors, columns the metric means; best value per column bold."""
    if not reports:
        raise ValueError("need at least one report")
    columns = _present_columns(reports)
    means = {r.predictor: r.mean_metrics() for r in reports}
    best: dict[str, float] = {}
    for col in columns:
        values = [means[r.predictor][col] for r in reports if col in means[r.predictor]]
        if values:
            best[col] = min(values) if col in LOWER_IS_BETTER else max(values)
    lines = []
    fingerprints = ", ".join(f"{r.predictor}={r.config_fingerprint or 'n/a'}" for r in reports)
    lines.append(f"<!-- config: {fingerprints} -->")
    lines.append("| predictor | " + " | ".join(columns) + " |")
    lines.append("|" + "---|" * (len(columns) + 1))
    for r in reports:
        cells = []
        for col in columns:
            value = means[r.predictor].get(col)
            if value is None:
                cells.append("")
            elif col in best and value == best[col]:
                cells.append(f"**{value:.4f}**")
            else:
                cells.append(f"{value:.4f}")
        lines.append(f"| {r.predictor} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_report_csv(reports: list[MetricReport]) -> str:
    """Per-fold rows plus a mean row per predictor; full-precision values."""
    if not reports:
        raise ValueError("need at least one report")
    columns = _present_columns(reports)
    lines = ["predictor,fold,config," + ",".join(columns)]
    for r in reports:
        for fold, fm in enumerate(r.fold_metrics):
            values = ",".join("" if c not in fm else repr(fm[c]) for c in columns)
            lines.append(f"{r.predictor},{fold},{r.config_fingerprint},{values}")
        mean = r.mean_metrics()
        values = ",".join("" if c not in mean else repr(mean[c]) for c in columns)
        lines.append(f"{r.predictor},mean,{r.config_fingerprint},{values}")
    return "\n".join(lines) + "\n"


# -- prediction file formats --------------------------------------------------


def read_predictions_csv(path: str | Path) -> dict[str, dict[Dimension, float]]:
    """CSV with header item_id,quality_score,authenticity_score."""
    predictions: dict[str, dict[Dimension, float]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "item_id,quality_score,authenticity_score":
            raise ValueError(f"{path}: unexpected predictions CSV header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            item, q, a = line.split(",")
            predictions[item] = {
                Dimension.QUALITY: float(q),
                Dimension.AUTHENTICITY: float(a),
            }
    return predictions


def write_predictions_csv(predictions: dict[str, dict[Dimension, float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("item_id,quality_score,authenticity_score\n")
        for item in sorted(predictions):
            q = predictions[item][Dimension.QUALITY]
            a = predictions[item][Dimension.AUTHENTICITY]
            fh.write(f"{item},{q!r},{a!r}\n")
