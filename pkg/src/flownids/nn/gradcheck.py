"""Central-difference verification of the hand-derived backward passes.

Every analytic gradient in the package must agree with
(f(p + eps) - f(p - eps)) / (2 eps) to high relative precision; the
checks here run small randomly-initialized models in eval mode so the
comparison is deterministic.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .feedforward import fnn_loss_and_grads
from .layers import DenseParams, init_dense
from .loss import weighted_ce_batch
from .lstm import LstmCellParams, backward_through_chunk, init_lstm_cell, stacked_forward


def finite_diff_gradcheck(loss_and_grads: Callable[[], tuple[float, dict[str, np.ndarray]]],
                          params: dict[str, np.ndarray], eps: float = 1e-5,
                          rng: np.random.Generator | None = None,
                          max_checks_per_array: int | None = None) -> float:
    """Max relative error between analytic and numeric gradients.

    ``loss_and_grads`` must recompute the loss from the current contents of
    ``params`` (they are perturbed in place and restored). When
    ``max_checks_per_array`` is set, a random coordinate subsample of each
    array is checked instead of every entry.
    """
    _, analytic = loss_and_grads()
    worst = 0.0
    for key, p in params.items():
        flat = p.reshape(-1)
        n = flat.size
        if max_checks_per_array is not None and n > max_checks_per_array:
            if rng is None:
                rng = np.random.default_rng(0)
            indices = rng.choice(n, size=max_checks_per_array, replace=False)
        else:
            indices = range(n)
        a_flat = analytic[key].reshape(-1)
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + eps
            f_plus, _ = loss_and_grads()
            flat[idx] = original - eps
            f_minus, _ = loss_and_grads()
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            scale = max(abs(a_flat[idx]), abs(numeric), 1e-10)
            worst = max(worst, abs(a_flat[idx] - numeric) / scale)
    return worst


def fnn_param_dict(fc1: DenseParams, fc2: DenseParams,
                   out: DenseParams) -> dict[str, np.ndarray]:
    return {"fc1.W": fc1.W, "fc1.b": fc1.b, "fc2.W": fc2.W, "fc2.b": fc2.b,
            "out.W": out.W, "out.b": out.b}


def lstm_param_dict(layers: Sequence[LstmCellParams],
                    out: DenseParams) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    for i, layer in enumerate(layers):
        params[f"lstm{i}.W"] = layer.W
        params[f"lstm{i}.U"] = layer.U
        params[f"lstm{i}.b"] = layer.b
    params["out.W"] = out.W
    params["out.b"] = out.b
    return params


def gradcheck_fnn(seed: int = 0, width: int = 8, n_features: int = 6,
                  n_records: int = 12, eps: float = 1e-5) -> float:
    """Check the feedforward backward pass on a random batch."""
    rng = np.random.default_rng(seed)
    fc1 = init_dense(rng, n_features, width)
    fc2 = init_dense(rng, width, width)
    out = init_dense(rng, width, 2)
    X = rng.random((n_records, n_features))
    y = rng.integers(0, 2, n_records)
    weights = (1.0, 2.5)

    def loss_and_grads():
        return fnn_loss_and_grads(X, y, fc1, fc2, out, weights)

    return finite_diff_gradcheck(loss_and_grads, fnn_param_dict(fc1, fc2, out),
                                 eps=eps)


def gradcheck_lstm(seed: int = 0, hidden: int = 8, n_features: int = 6,
                   seq_len: int = 5, n_layers: int = 2,
                   eps: float = 1e-5) -> float:
    """Check the stacked-LSTM backward pass on a random sequence."""
    rng = np.random.default_rng(seed)
    layers = []
    n_in = n_features
    for _ in range(n_layers):
        layers.append(init_lstm_cell(rng, n_in, hidden))
        n_in = hidden
    out = init_dense(rng, hidden, 2)
    X = rng.random((seq_len, n_features))
    y = rng.integers(0, 2, seq_len)
    weights = (1.0, 2.5)

    def loss_and_grads():
        scores, _, traces = stacked_forward(X, layers, out)
        loss, dscores = weighted_ce_batch(scores, y, weights)
        return loss, backward_through_chunk(layers, out, traces, dscores)

    return finite_diff_gradcheck(loss_and_grads, lstm_param_dict(layers, out),
                                 eps=eps)
