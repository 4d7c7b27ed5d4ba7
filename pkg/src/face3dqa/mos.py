"""Raw ratings to Mean Opinion Scores.

Per-subject Z-score normalization rescaled to [0,100], optional subject
screening (BT.500-style), per-item aggregation, and mapping of scores to the
five text quality levels.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import Dimension, QualityLevel, RatingRecord


class ZeroVarianceError(ValueError):
    """A subject with constant ratings cannot be Z-scored."""


class UncoveredItemsError(ValueError):
    """Some items retained no ratings after screening."""

    def __init__(self, uncovered: list[tuple[str, Dimension]]):
        self.uncovered = uncovered
        items = sorted({item for item, _ in uncovered})
        super().__init__(f"no retained ratings for items: {', '.join(items)}")


class ScoreOutOfRangeError(ValueError):
    pass


@dataclass(frozen=True)
class SubjectStats:
    """Per-subject, per-dimension rating mean and sample standard deviation."""

    subject_id: str
    dimension: Dimension
    mean: float
    stddev: float  # N-1 denominator; 0.0 when degenerate
    count: int
    degenerate: bool = False  # fewer than two ratings, stddev undefined


class ScreeningMode(enum.Enum):
    NONE = "none"
    STDDEV_OUTLIER = "stddev"
    ITU_ANNEX2 = "itu"


@dataclass(frozen=True)
class ScreeningPolicy:
    """How unreliable raters are rejected before aggregation.

    ``STDDEV_OUTLIER``: a rating is an outlier when it deviates from the
    per-item mean by more than ``outlier_k`` per-item standard deviations;
    a subject is rejected when more than ``outlier_fraction`` of their
    ratings are outliers.

    ``ITU_ANNEX2``: BT.500 Annex-2 style screening. Per item, the kurtosis
    coefficient decides between 2*sigma and sqrt(20)*sigma bounds; per
    subject, P counts ratings at or above the upper bound and Q those at or
    below the lower bound; reject when (P+Q)/N > reject_fraction and
    |P-Q|/(P+Q) < dispersion_ratio.

    Under every mode a subject whose ratings are constant on some dimension
    is rejected with reason "degenerate-variance".
    """

    mode: ScreeningMode = ScreeningMode.ITU_ANNEX2
    outlier_k: float = 2.0
    outlier_fraction: float = 0.05
    reject_fraction: float = 0.05
    dispersion_ratio: float = 0.3

    def __post_init__(self) -> None:
        for name in ("outlier_k", "outlier_fraction", "reject_fraction", "dispersion_ratio"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class MosEntry:
    mos: float
    n_subjects: int


@dataclass
class MosTable:
    """Per-item, per-dimension Mean Opinion Scores on [0,100]."""

    entries: dict[tuple[str, Dimension], MosEntry]
    retained_subjects: frozenset[str]
    rejections: dict[str, str]
    policy: ScreeningPolicy
    clamped_values: int = 0

    def mos(self, item_id: str, dimension: Dimension) -> float:
        return self.entries[(item_id, dimension)].mos

    def items(self) -> list[str]:
        return sorted({item for item, _ in self.entries})

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("item_id,dimension,mos,n_subjects\n")
            for (item, dim), entry in sorted(
                self.entries.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
            ):
                fh.write(f"{item},{dim.value},{entry.mos!r},{entry.n_subjects}\n")

    def write_rejection_report(self, path: str | Path) -> None:
        report = {
            "policy": self.policy.mode.value,
            "retained": sorted(self.retained_subjects),
            "rejected": {s: r for s, r in sorted(self.rejections.items())},
            "clamped_values": self.clamped_values,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_mos_csv(path: str | Path) -> dict[tuple[str, Dimension], MosEntry]:
    entries: dict[tuple[str, Dimension], MosEntry] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "item_id,dimension,mos,n_subjects":
            raise ValueError(f"{path}: unexpected MOS CSV header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            item, dim, mos, n = line.split(",")
            entries[(item, Dimension.parse(dim))] = MosEntry(float(mos), int(n))
    return entries


def subject_stats(records: list[RatingRecord]) -> list[SubjectStats]:
    """Mean and sample standard deviation per subject per dimension.

    A subject with a single rating on a dimension gets ``degenerate=True``
    instead of an error.
    """
    groups: dict[tuple[str, Dimension], list[float]] = {}
    for rec in records:
        groups.setdefault((rec.subject_id, rec.dimension), []).append(rec.score)
    stats = []
    for (subject, dim), scores in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        n = len(scores)
        mean = sum(scores) / n
        if n < 2:
            stats.append(SubjectStats(subject, dim, mean, 0.0, n, degenerate=True))
            continue
        var = sum((s - mean) ** 2 for s in scores) / (n - 1)
        stats.append(SubjectStats(subject, dim, mean, math.sqrt(var), n))
    return stats


def zscore_rescale(record: RatingRecord, stats: SubjectStats) -> float:
    """Z-score one rating against its subject's stats and rescale to [0,100].

    The raw value is ``100 * (z + 3) / 6`` with ``z = (r - mean) / stddev``;
    the result is clamped to [0,100].
    """
    if stats.stddev == 0:
        raise ZeroVarianceError(
            f"subject {stats.subject_id} has zero rating variance on {stats.dimension}"
        )
    z = (record.score - stats.mean) / stats.stddev
    rescaled = 100.0 * (z + 3.0) / 6.0
    return min(100.0, max(0.0, rescaled))


def _item_moments(records: list[RatingRecord]) -> dict[tuple[str, Dimension], list[float]]:
    by_item: dict[tuple[str, Dimension], list[float]] = {}
    for rec in records:
        by_item.setdefault((rec.item_id, rec.dimension), []).append(rec.score)
    return by_item


def _degenerate_subjects(records: list[RatingRecord]) -> dict[str, str]:
    rejected = {}
    for st in subject_stats(records):
        if st.stddev == 0:
            rejected.setdefault(st.subject_id, "degenerate-variance")
    return rejected


def _screen_stddev_outlier(
    records: list[RatingRecord], policy: ScreeningPolicy
) -> dict[str, str]:
    by_item = _item_moments(records)
    bounds: dict[tuple[str, Dimension], tuple[float, float]] = {}
    for key, scores in by_item.items():
        n = len(scores)
        if n < 2:
            continue
        mean = sum(scores) / n
        std = math.sqrt(sum((s - mean) ** 2 for s in scores) / (n - 1))
        bounds[key] = (mean, std)
    outliers: dict[str, int] = {}
    totals: dict[str, int] = {}
    for rec in records:
        totals[rec.subject_id] = totals.get(rec.subject_id, 0) + 1
        bound = bounds.get((rec.item_id, rec.dimension))
        if bound is None:
            continue
        mean, std = bound
        if abs(rec.score - mean) > policy.outlier_k * std:
            outliers[rec.subject_id] = outliers.get(rec.subject_id, 0) + 1
    rejected = {}
    for subject, total in totals.items():
        if outliers.get(subject, 0) > policy.outlier_fraction * total:
            rejected[subject] = "outlier-ratio"
    return rejected


def _screen_itu_annex2(records: list[RatingRecord], policy: ScreeningPolicy) -> dict[str, str]:
    by_item = _item_moments(records)
    bounds: dict[tuple[str, Dimension], tuple[float, float]] = {}
    for key, scores in by_item.items():
        n = len(scores)
        if n < 2:
            continue
        mean = sum(scores) / n
        m2 = sum((s - mean) ** 2 for s in scores) / n
        m4 = sum((s - mean) ** 4 for s in scores) / n
        std = math.sqrt(sum((s - mean) ** 2 for s in scores) / (n - 1))
        kurtosis = m4 / (m2 * m2) if m2 > 0 else 0.0
        spread = 2.0 if 2.0 <= kurtosis <= 4.0 else math.sqrt(20.0)
        bounds[key] = (mean - spread * std, mean + spread * std)
    p_count: dict[str, int] = {}
    q_count: dict[str, int] = {}
    totals: dict[str, int] = {}
    for rec in records:
        totals[rec.subject_id] = totals.get(rec.subject_id, 0) + 1
        bound = bounds.get((rec.item_id, rec.dimension))
        if bound is None:
            continue
        lower, upper = bound
        if rec.score >= upper:
            p_count[rec.subject_id] = p_count.get(rec.subject_id, 0) + 1
        elif rec.score <= lower:
            q_count[rec.subject_id] = q_count.get(rec.subject_id, 0) + 1
    rejected = {}
    for subject, total in totals.items():
        p = p_count.get(subject, 0)
        q = q_count.get(subject, 0)
        if p + q == 0:
            continue
        if (p + q) / total > policy.reject_fraction and abs(p - q) / (p + q) < policy.dispersion_ratio:
            rejected[subject] = "itu-annex2"
    return rejected


def screen_subjects(
    records: list[RatingRecord], policy: ScreeningPolicy
) -> tuple[set[str], dict[str, str]]:
    """Split subjects into retained ids and a per-subject rejection reason map."""
    rejected = _degenerate_subjects(records)
    if policy.mode is ScreeningMode.STDDEV_OUTLIER:
        for subject, reason in _screen_stddev_outlier(records, policy).items():
            rejected.setdefault(subject, reason)
    elif policy.mode is ScreeningMode.ITU_ANNEX2:
        for subject, reason in _screen_itu_annex2(records, policy).items():
            rejected.setdefault(subject, reason)
    subjects = {rec.subject_id for rec in records}
    return subjects - set(rejected), rejected


def aggregate_mos(records: list[RatingRecord], policy: ScreeningPolicy | None = None) -> MosTable:
    """Screen subjects, Z-score each retained rating, and average per item.

    Raises :class:`UncoveredItemsError` when an (item, dimension) seen in the
    input keeps zero retained ratings.
    """
    policy = policy or ScreeningPolicy()
    retained, rejections = screen_subjects(records, policy)
    stats_index = {
        (st.subject_id, st.dimension): st
        for st in subject_stats([r for r in records if r.subject_id in retained])
    }
    sums: dict[tuple[str, Dimension], float] = {}
    counts: dict[tuple[str, Dimension], int] = {}
    clamped = 0
    for rec in sorted(records, key=lambda r: (r.item_id, r.dimension.value, r.subject_id)):
        if rec.subject_id not in retained:
            continue
        st = stats_index[(rec.subject_id, rec.dimension)]
        z = (rec.score - st.mean) / st.stddev
        rescaled = 100.0 * (z + 3.0) / 6.0
        if rescaled < 0.0 or rescaled > 100.0:
            clamped += 1
            rescaled = min(100.0, max(0.0, rescaled))
        key = (rec.item_id, rec.dimension)
        sums[key] = sums.get(key, 0.0) + rescaled
        counts[key] = counts.get(key, 0) + 1
    uncovered = [key for key in _item_moments(records) if key not in counts]
    if uncovered:
        raise UncoveredItemsError(sorted(uncovered, key=lambda k: (k[0], k[1].value)))
    entries = {key: MosEntry(sums[key] / counts[key], counts[key]) for key in sums}
    return MosTable(
        entries=entries,
        retained_subjects=frozenset(retained),
        rejections=rejections,
        policy=policy,
        clamped_values=clamped,
    )


def quality_level(score: float, low: float, high: float) -> QualityLevel:
    """Map a score to one of five equal-width levels over [low, high].

    Bins are left-open and right-closed; ``score == low`` falls in the lowest
    bin by convention.
    """
    if not low < high:
        raise ValueError(f"need low < high, got [{low}, {high}]")
    if score < low or score > high:
        raise ScoreOutOfRangeError(f"score {score} outside [{low}, {high}]")
    if score == low:
        return QualityLevel.BAD
    width = (high - low) / 5.0
    for i in range(1, 5):
        if score <= low + i * width:
            return QualityLevel(i)
    return QualityLevel.EXCELLENT
