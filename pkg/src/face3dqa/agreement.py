"""Score-prediction agreement metrics: SRCC, PLCC, KRCC, and QA accuracy.

SRCC is the linear correlation of tie-averaged ranks (equal to the classic
closed form 1 - 6*sum(d^2)/(N(N^2-1)) on tie-free inputs). KRCC is tau-a:
tied pairs count as neither concordant nor discordant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class ConstantVectorError(ValueError):
    pass


def _as_vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValueError("need at least two values")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    return v


@dataclass(frozen=True)
class PairedScores:
    """Ground-truth and predicted score vectors over the same items."""

    item_ids: tuple[str, ...]
    ground_truth: np.ndarray
    predicted: np.ndarray

    def __post_init__(self) -> None:
        gt = _as_vector(self.ground_truth)
        pr = _as_vector(self.predicted)
        if gt.size != pr.size or (self.item_ids and len(self.item_ids) != gt.size):
            raise ValueError("ground truth and predictions must have equal length")
        object.__setattr__(self, "ground_truth", gt)
        object.__setattr__(self, "predicted", pr)

    def srcc(self) -> float:
        return srcc(self.ground_truth, self.predicted)

    def plcc(self) -> float:
        return plcc(self.ground_truth, self.predicted)

    def krcc(self) -> float:
        return krcc(self.ground_truth, self.predicted)


def rank(values) -> np.ndarray:
    """Ranks 1..N; tied values share the average of their positional ranks."""
    v = np.asarray(values, dtype=np.float64).ravel()
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def plcc(ground_truth, predicted) -> float:
    """Pearson linear correlation of two equal-length vectors."""
    y = _as_vector(ground_truth)
    p = _as_vector(predicted)
    if y.size != p.size:
        raise ValueError("vectors must have equal length")
    dy = y - y.mean()
    dp = p - p.mean()
    denom_y = float(np.dot(dy, dy))
    denom_p = float(np.dot(dp, dp))
    if denom_y == 0.0 or denom_p == 0.0:
        raise ConstantVectorError("correlation undefined for a constant vector")
    return float(np.dot(dy, dp) / np.sqrt(denom_y * denom_p))


def srcc(ground_truth, predicted) -> float:
    """Spearman rank correlation: Pearson correlation of tie-averaged ranks."""
    y = _as_vector(ground_truth)
    p = _as_vector(predicted)
    if y.size != p.size:
        raise ValueError("vectors must have equal length")
    if np.all(y == y[0]) or np.all(p == p[0]):
        raise ConstantVectorError("correlation undefined for a constant vector")
    return plcc(rank(y), rank(p))


def krcc(ground_truth, predicted) -> float:
    """Kendall rank correlation, tau-a: (C - D) / (N(N-1)/2)."""
    y = _as_vector(ground_truth)
    p = _as_vector(predicted)
    if y.size != p.size:
        raise ValueError("vectors must have equal length")
    n = y.size
    sign_products = np.sign(y[:, None] - y[None, :]) * np.sign(p[:, None] - p[None, :])
    upper = np.triu_indices(n, k=1)
    concordant = int(np.count_nonzero(sign_products[upper] > 0))
    discordant = int(np.count_nonzero(sign_products[upper] < 0))
    return (concordant - discordant) / (n * (n - 1) / 2.0)


class QaMode(enum.Enum):
    EXACT_MATCH = "exact"
    JACCARD = "jaccard"


def qa_accuracy(truth: list[set], predicted: list[set], mode: QaMode = QaMode.EXACT_MATCH) -> float:
    """Average accuracy of predicted category sets against the truth.

    ``EXACT_MATCH`` scores an item 1 only when the sets are equal; ``JACCARD``
    gives partial credit |intersection| / |union|.
    """
    if len(truth) != len(predicted):
        raise ValueError("truth and predictions must have equal length")
    if not truth:
        raise ValueError("need at least one item")
    total = 0.0
    for t, p in zip(truth, predicted):
        t, p = set(t), set(p)
        if mode is QaMode.EXACT_MATCH:
            total += 1.0 if t == p else 0.0
        else:
            union = t | p
            total += 1.0 if not union else len(t & p) / len(union)
    return total / len(truth)
