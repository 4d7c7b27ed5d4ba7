"""Evaluation-side objective functions.

The saliency objective is a weighted sum of four components (L1, correlation
loss, KL divergence, binary cross-entropy); score regression uses the mean
absolute error and level prediction the categorical cross-entropy. These are
scalar objectives only; no gradients are provided.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import salmetrics
from .salmetrics import DEFAULT_EPSILON

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class NonSimplexError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights for the four saliency loss components."""

    w1: float = 1.0  # L1
    w2: float = 1.0  # correlation loss
    w3: float = 1.0  # KL divergence
    w4: float = 1.0  # binary cross-entropy

    def __post_init__(self) -> None:
        for name in ("w1", "w2", "w3", "w4"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    return p, g


def l1_loss(pred, gt) -> float:
    """Mean absolute difference."""
    p, g = _pair(pred, gt)
    return float(np.abs(p - g).mean())


def cc_loss(pred, gt) -> float:
    """1 - Pearson correlation; 0 for identical maps, 2 for anti-correlated ones."""
    return 1.0 - salmetrics.cc(pred, gt)


def kl_loss(pred, gt, epsilon: float = DEFAULT_EPSILON) -> float:
    """Same contract as the KLD metric: KL(gt || pred) over sum-normalized maps."""
    return salmetrics.kld(pred, gt, epsilon=epsilon)


def bce_loss(pred, gt, epsilon: float = DEFAULT_EPSILON) -> float:
    """Mean binary cross-entropy; predictions are clipped to [eps, 1-eps]."""
    p, g = _pair(pred, gt)
    p = np.clip(p, epsilon, 1.0 - epsilon)
    return float(-(g * np.log(p) + (1.0 - g) * np.log(1.0 - p)).mean())


def combined_loss(pred, gt, weights: LossWeights | None = None,
                  epsilon: float = DEFAULT_EPSILON) -> float:
    """w1*L1 + w2*(1-CC) + w3*KL + w4*BCE.

    Components with zero weight are skipped, so their pre-conditions (e.g.
    non-constant maps for CC) only apply when that component participates.
    """
    w = weights or LossWeights()
    total = 0.0
    if w.w1 != 0.0:
        total += w.w1 * l1_loss(pred, gt)
    if w.w2 != 0.0:
        total += w.w2 * cc_loss(pred, gt)
    if w.w3 != 0.0:
        total += w.w3 * kl_loss(pred, gt, epsilon=epsilon)
    if w.w4 != 0.0:
        total += w.w4 * bce_loss(pred, gt, epsilon=epsilon)
    return total


def categorical_ce(pred_probs, label_index: int, epsilon: float = DEFAULT_EPSILON) -> float:
    """Negative log-probability of the correct class."""
    probs = np.asarray(pred_probs, dtype=np.float64).ravel()
    if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > 1e-6:
        raise NonSimplexError(
            f"probabilities must be >= 0 and sum to 1, got sum {float(probs.sum())}"
        )
    if not 0 <= label_index < probs.size:
        raise ValueError(f"label index {label_index} out of range")
    return float(-np.log(probs[label_index] + epsilon))


def load_loss_config(path: str | Path) -> tuple[LossWeights, float]:
    """Read weights and epsilon from the [loss] section of a TOML config."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    section = data.get("loss", {})
    weights = LossWeights(
        w1=float(section.get("w1", 1.0)),
        w2=float(section.get("w2", 1.0)),
        w3=float(section.get("w3", 1.0)),
        w4=float(section.get("w4", 1.0)),
    )
    return weights, float(section.get("epsilon", DEFAULT_EPSILON))
