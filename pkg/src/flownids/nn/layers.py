"""Dense layers, activations and inverted dropout.

All arrays are float64; gradient checking depends on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "identity")


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # clip keeps exp() finite; saturated gates round to exactly 0/1
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


@dataclass
class DenseParams:
    """Fully-connected layer weights, W is (out, in)."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent dense shapes {self.W.shape} / {self.b.shape}")

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]


def init_dense(rng: np.random.Generator, n_in: int, n_out: int) -> DenseParams:
    limit = 1.0 / np.sqrt(n_in)
    return DenseParams(rng.uniform(-limit, limit, (n_out, n_in)), np.zeros(n_out))


def dense_apply(x: np.ndarray, params: DenseParams) -> np.ndarray:
    """Affine map W x + b for a single vector or a (batch, in) matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.n_in:
        raise ValueError(f"input width {x.shape[-1]} != layer width {params.n_in}")
    return x @ params.W.T + params.b


def dense_forward(x: np.ndarray, params: DenseParams,
                  activation: str = "identity") -> np.ndarray:
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation '{activation}'")
    z = dense_apply(x, params)
    if activation == "relu":
        return relu(z)
    if activation == "sigmoid":
        return sigmoid(z)
    return z


def dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray:
    """Inverted-dropout multiplier: zeros w.p. p, else 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability {p} outside [0, 1)")
    if p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def dropout(x: np.ndarray, p: float, rng: np.random.Generator | None = None,
            mode: str = "eval") -> np.ndarray:
    """Inverted dropout: identity in eval mode, mask-and-rescale in train."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability {p} outside [0, 1)")
    x = np.asarray(x, dtype=np.float64)
    if mode == "eval" or p == 0.0:
        return x
    if mode != "train":
        raise ValueError(f"unknown dropout mode '{mode}'")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    return x * dropout_mask(rng, x.shape, p)
