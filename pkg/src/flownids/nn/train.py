"""Training configuration and the two optimization loops: shuffled record
mini-batches for the feedforward net, truncated backpropagation through
time for the sequential net.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from .adam import Adam
from .feedforward import fnn_loss_and_grads
from .layers import DenseParams
from .loss import weighted_ce_batch
from .lstm import LstmCellParams, LstmState, backward_through_chunk, stacked_forward, zero_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 20
    dropout_p: float = 0.2
    batch_size: int = 512
    tbptt_window: int | None = None
    class_weights: tuple[float, float] | None = None  # None -> inverse frequency
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must be in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.tbptt_window is not None and self.tbptt_window < 1:
            raise ConfigError("tbptt_window must be >= 1 when set")
        if self.class_weights is not None:
            if self.class_weights[0] <= 0 or self.class_weights[1] <= 0:
                raise ConfigError("class weights must be positive")


def class_weights_from_labels(labels: np.ndarray) -> tuple[float, float]:
    """Inverse class frequency, normalized so the benign weight is 1."""
    labels = np.asarray(labels)
    n_mal = int(labels.sum())
    n_ben = int(len(labels) - n_mal)
    if n_mal == 0 or n_ben == 0:
        log.warning("single-class training labels; using uniform class weights")
        return (1.0, 1.0)
    return (1.0, n_ben / n_mal)


def chunk_bounds(length: int, window: int | None) -> list[tuple[int, int]]:
    """Consecutive [start, end) chunks of at most `window` steps."""
    if window is None or window >= length:
        return [(0, length)]
    return [(s, min(s + window, length)) for s in range(0, length, window)]


def tbptt_train_sequence(layers: Sequence[LstmCellParams], out: DenseParams,
                         X: np.ndarray, y: np.ndarray,
                         weights: tuple[float, float], optimizer: Adam,
                         window: int | None, dropout_p: float,
                         rng: np.random.Generator,
                         state: LstmState | None = None) -> list[float]:
    """One pass over a sequence in truncated-BPTT chunks.

    Hidden/cell values carry across chunk boundaries; gradients do not.
    Each chunk triggers one optimizer step. Returns per-chunk mean losses.
    """
    if state is None:
        state = zero_state(layers)
    losses = []
    for start, end in chunk_bounds(len(X), window):
        scores, state, traces = stacked_forward(
            X[start:end], layers, out, dropout_p, "train", rng, state
        )
        loss, dscores = weighted_ce_batch(scores, y[start:end], weights)
        grads = backward_through_chunk(layers, out, traces, dscores)
        optimizer.step(grads)
        losses.append(loss)
    return losses


def fnn_train_epoch(fc1: DenseParams, fc2: DenseParams, out: DenseParams,
                    X: np.ndarray, y: np.ndarray,
                    weights: tuple[float, float], optimizer: Adam,
                    batch_size: int, dropout_p: float,
                    rng: np.random.Generator) -> float:
    """One seeded-shuffle pass over pooled records. Returns the mean loss."""
    order = rng.permutation(len(X))
    total = 0.0
    for start in range(0, len(X), batch_size):
        batch = order[start:start + batch_size]
        loss, grads = fnn_loss_and_grads(
            X[batch], y[batch], fc1, fc2, out, weights, dropout_p, "train", rng
        )
        optimizer.step(grads)
        total += loss * len(batch)
    return total / len(X)
