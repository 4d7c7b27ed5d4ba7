"""Saliency consistency metrics: AUC, NSS, CC, SIM, KLD.

Conventions (all surfaced as flags in the CLI and recorded in report
headers): AUC is the fixation-based variant thresholded at the distinct
predicted values at fixations; NSS standardizes with the population (1/N)
standard deviation; KLD is KL(ground truth || prediction) in nats with
epsilon = 1e-7 added inside the log denominator.
"""

from __future__ import annotations

import numpy as np

from .agreement import ConstantVectorError
from .saliency import FixationMap, NormMode, SaliencyMap

DEFAULT_EPSILON = 1e-7


class DegenerateInputError(ValueError):
    pass


class ZeroSumMapError(ValueError):
    pass


def _grid(m) -> np.ndarray:
    if isinstance(m, (SaliencyMap, FixationMap)):
        return np.asarray(m.grid, dtype=np.float64)
    return np.asarray(m, dtype=np.float64)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"map dimensions differ: {a.shape} vs {b.shape}")


def auc(pred, fixations) -> float:
    """ROC area with fixation pixels as positives, all others as negatives.

    Thresholds sweep the distinct predicted values at fixations (plus an
    implicit +inf start and a closing (1,1) point); the curve is integrated
    by trapezoid, so value ties between positives and negatives earn
    fractional credit.
    """
    p = _grid(pred).ravel()
    f = _grid(fixations).ravel()
    _check_same_shape(_grid(pred), _grid(fixations))
    positives = p[f > 0]
    n_pos = positives.size
    n_neg = p.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("AUC needs at least one fixation and one non-fixation pixel")
    thresholds = np.unique(positives)[::-1]
    fpr = [0.0]
    tpr = [0.0]
    for t in thresholds:
        above = int(np.count_nonzero(p >= t))
        pos_above = int(np.count_nonzero(positives >= t))
        tpr.append(pos_above / n_pos)
        fpr.append((above - pos_above) / n_neg)
    fpr.append(1.0)
    tpr.append(1.0)
    area = 0.0
    for i in range(len(fpr) - 1):
        area += (fpr[i + 1] - fpr[i]) * (tpr[i + 1] + tpr[i]) / 2.0
    return area


def nss(pred, fixations) -> float:
    """Mean of the z-standardized prediction at fixation pixels."""
    p = _grid(pred)
    f = _grid(fixations)
    _check_same_shape(p, f)
    if not np.any(f > 0):
        raise DegenerateInputError("NSS needs at least one fixation")
    std = float(p.std())
    if std == 0.0:
        raise ConstantVectorError("NSS undefined for a constant prediction map")
    standardized = (p - p.mean()) / std
    return float(standardized[f > 0].mean())


def cc(pred, gt) -> float:
    """Pearson correlation of the flattened grids."""
    p = _grid(pred)
    g = _grid(gt)
    _check_same_shape(p, g)
    dp = p.ravel() - p.mean()
    dg = g.ravel() - g.mean()
    denom_p = float(np.dot(dp, dp))
    denom_g = float(np.dot(dg, dg))
    if denom_p == 0.0 or denom_g == 0.0:
        raise ConstantVectorError("CC undefined for a constant map")
    return float(np.dot(dp, dg) / np.sqrt(denom_p * denom_g))


def _sum_normalized(m, what: str) -> np.ndarray:
    g = _grid(m)
    if isinstance(m, SaliencyMap) and m.norm is NormMode.SUM_ONE:
        return g
    total = float(g.sum())
    if total <= 0.0:
        raise ZeroSumMapError(f"{what} map must have a positive sum")
    return g / total


def sim(pred, gt) -> float:
    """Histogram intersection of the two sum-normalized maps."""
    p = _sum_normalized(pred, "predicted")
    g = _sum_normalized(gt, "ground-truth")
    _check_same_shape(p, g)
    return float(np.minimum(p, g).sum())


def kld(pred, gt, epsilon: float = DEFAULT_EPSILON) -> float:
    """KL(gt || pred) over sum-normalized maps, in nats.

    ``epsilon`` is added inside the log denominator; cells with zero
    ground-truth mass contribute nothing.
    """
    p = _sum_normalized(pred, "predicted")
    g = _sum_normalized(gt, "ground-truth")
    _check_same_shape(p, g)
    mask = g > 0
    return float(np.sum(g[mask] * np.log(g[mask] / (p[mask] + epsilon))))


def evaluate_pair(pred: SaliencyMap, gt_map: SaliencyMap, gt_fixations: FixationMap,
                  epsilon: float = DEFAULT_EPSILON) -> dict[str, float]:
    """All five metrics for one predicted map against its ground truth."""
    return {
        "auc": auc(pred, gt_fixations),
        "nss": nss(pred, gt_fixations),
        "cc": cc(pred, gt_map),
        "sim": sim(pred, gt_map),
        "kld": kld(pred, gt_map, epsilon=epsilon),
    }
