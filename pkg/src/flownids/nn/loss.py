"""Class-weighted softmax cross-entropy for two-class scores.

The weight of the true class scales both the loss term and its gradient,
so misclassifying the rare class can be penalized more heavily.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def weighted_cross_entropy(scores: np.ndarray, label: int,
                           weights: tuple[float, float]) -> tuple[float, np.ndarray]:
    """Loss and gradient wrt scores for one record.

    loss = -w[label] * log softmax(scores)[label]
    grad = w[label] * (softmax(scores) - onehot(label))
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise NumericError("non-finite class scores")
    if weights[0] <= 0 or weights[1] <= 0:
        raise ValueError("class weights must be positive")
    probs = softmax(scores)
    w = weights[label]
    loss = -w * _log_prob(scores, label)
    grad = w * probs
    grad[label] -= w
    return float(loss), grad


def _log_prob(scores: np.ndarray, label) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    if scores.ndim == 1:
        return shifted[label] - log_z
    return shifted[np.arange(len(scores)), label] - log_z


def weighted_ce_batch(scores: np.ndarray, labels: np.ndarray,
                      weights: tuple[float, float]) -> tuple[float, np.ndarray]:
    """Mean weighted cross-entropy over a batch; gradient includes the 1/n.

    scores: (n, 2); labels: (n,) in {0, 1}. Returns (mean loss, dscores).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not np.all(np.isfinite(scores)):
        raise NumericError("non-finite class scores")
    if weights[0] <= 0 or weights[1] <= 0:
        raise ValueError("class weights must be positive")
    n = len(scores)
    w = np.asarray(weights, dtype=np.float64)[labels]
    loss = float(np.mean(-w * _log_prob(scores, labels)))
    dscores = softmax(scores) * w[:, None]
    dscores[np.arange(n), labels] -= w
    return loss, dscores / n
