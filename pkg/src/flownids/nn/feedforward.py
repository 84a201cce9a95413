"""Two-hidden-layer feedforward classifier: forward pass and hand-derived
backward pass over record mini-batches.

Layout mirrors the sequential detector for a like-for-like comparison:
two ReLU hidden layers with dropout after each, then a width-2 output
layer. Records are classified independently.
"""

from __future__ import annotations

import numpy as np

from .layers import DenseParams, dropout_mask, relu
from .loss import weighted_ce_batch


def fnn_scores(X: np.ndarray, fc1: DenseParams, fc2: DenseParams,
               out: DenseParams, dropout_p: float = 0.0, mode: str = "eval",
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Class scores (n, 2) for a batch of feature vectors."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != fc1.n_in:
        raise ValueError(f"feature width {X.shape[1]} != {fc1.n_in}")
    a1 = relu(X @ fc1.W.T + fc1.b)
    if mode == "train" and dropout_p > 0.0:
        a1 = a1 * dropout_mask(rng, a1.shape, dropout_p)
    a2 = relu(a1 @ fc2.W.T + fc2.b)
    if mode == "train" and dropout_p > 0.0:
        a2 = a2 * dropout_mask(rng, a2.shape, dropout_p)
    return a2 @ out.W.T + out.b


def fnn_loss_and_grads(X: np.ndarray, y: np.ndarray, fc1: DenseParams,
                       fc2: DenseParams, out: DenseParams,
                       weights: tuple[float, float], dropout_p: float = 0.0,
                       mode: str = "eval",
                       rng: np.random.Generator | None = None,
                       ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean weighted cross-entropy and gradients for one mini-batch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    z1 = X @ fc1.W.T + fc1.b
    a1 = relu(z1)
    m1 = None
    if mode == "train" and dropout_p > 0.0:
        m1 = dropout_mask(rng, a1.shape, dropout_p)
        a1 = a1 * m1
    z2 = a1 @ fc2.W.T + fc2.b
    a2 = relu(z2)
    m2 = None
    if mode == "train" and dropout_p > 0.0:
        m2 = dropout_mask(rng, a2.shape, dropout_p)
        a2 = a2 * m2
    scores = a2 @ out.W.T + out.b

    loss, dscores = weighted_ce_batch(scores, y, weights)

    grads = {"out.W": dscores.T @ a2, "out.b": dscores.sum(axis=0)}
    da2 = dscores @ out.W
    if m2 is not None:
        da2 = da2 * m2
    dz2 = da2 * (z2 > 0)
    grads["fc2.W"] = dz2.T @ a1
    grads["fc2.b"] = dz2.sum(axis=0)
    da1 = dz2 @ fc2.W
    if m1 is not None:
        da1 = da1 * m1
    dz1 = da1 * (z1 > 0)
    grads["fc1.W"] = dz1.T @ X
    grads["fc1.b"] = dz1.sum(axis=0)
    return loss, grads
