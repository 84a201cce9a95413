"""Stacked unidirectional LSTM: cell step, sequence forward, hand-derived
backward pass.

Gate weights are stored stacked as W (4H, in), U (4H, H), b (4H,) with row
blocks ordered [input, forget, output, candidate]; per-gate views are
exposed as properties. The first layer consumes the feature vector, every
higher layer consumes the (dropout-masked) hidden sequence of the layer
below, and a width-2 output layer is applied at every time step.

Dropout is applied to each layer's output on the upward path only; the
recurrent h/c path stays unmasked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .layers import DenseParams, dropout_mask, sigmoid


@dataclass
class LstmCellParams:
    W: np.ndarray  # (4H, in) input weights, gate blocks [i; f; o; g]
    U: np.ndarray  # (4H, H) recurrent weights
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        four_h = self.W.shape[0]
        if four_h % 4 != 0:
            raise ValueError("gate dimension must be a multiple of 4")
        h = four_h // 4
        if self.U.shape != (four_h, h) or self.b.shape != (four_h,):
            raise ValueError(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}"
            )

    @property
    def hidden_size(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    def _block(self, arr: np.ndarray, gate: int) -> np.ndarray:
        h = self.hidden_size
        return arr[gate * h:(gate + 1) * h]

    # per-gate views onto the stacked arrays (shared memory)
    @property
    def w_input(self): return self._block(self.W, 0)
    @property
    def w_forget(self): return self._block(self.W, 1)
    @property
    def w_output(self): return self._block(self.W, 2)
    @property
    def w_candidate(self): return self._block(self.W, 3)
    @property
    def u_input(self): return self._block(self.U, 0)
    @property
    def u_forget(self): return self._block(self.U, 1)
    @property
    def u_output(self): return self._block(self.U, 2)
    @property
    def u_candidate(self): return self._block(self.U, 3)
    @property
    def b_input(self): return self._block(self.b, 0)
    @property
    def b_forget(self): return self._block(self.b, 1)
    @property
    def b_output(self): return self._block(self.b, 2)
    @property
    def b_candidate(self): return self._block(self.b, 3)


def init_lstm_cell(rng: np.random.Generator, n_in: int,
                   hidden: int) -> LstmCellParams:
    """Uniform +-1/sqrt(fan_in) weights; forget-gate bias starts at 1."""
    w_limit = 1.0 / np.sqrt(n_in)
    u_limit = 1.0 / np.sqrt(hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    return LstmCellParams(
        W=rng.uniform(-w_limit, w_limit, (4 * hidden, n_in)),
        U=rng.uniform(-u_limit, u_limit, (4 * hidden, hidden)),
        b=b,
    )


@dataclass
class LstmState:
    """Per-layer hidden and cell activations."""

    h: list[np.ndarray]
    c: list[np.ndarray]

    def copy(self) -> "LstmState":
        return LstmState([h.copy() for h in self.h], [c.copy() for c in self.c])


def zero_state(layers: Sequence[LstmCellParams]) -> LstmState:
    return LstmState(
        h=[np.zeros(p.hidden_size) for p in layers],
        c=[np.zeros(p.hidden_size) for p in layers],
    )


def lstm_cell_step(x: np.ndarray, state: tuple[np.ndarray, np.ndarray],
                   params: LstmCellParams) -> tuple[np.ndarray, np.ndarray]:
    """One cell update: gates from input + previous hidden, new (h, c)."""
    h_prev, c_prev = state
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_size,):
        raise ValueError(f"input shape {x.shape} != ({params.input_size},)")
    if h_prev.shape != (params.hidden_size,) or c_prev.shape != (params.hidden_size,):
        raise ValueError("state shape mismatch")
    hs = params.hidden_size
    z = params.W @ x + params.U @ h_prev + params.b
    i = sigmoid(z[:hs])
    f = sigmoid(z[hs:2 * hs])
    o = sigmoid(z[2 * hs:3 * hs])
    g = np.tanh(z[3 * hs:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


class _LayerTrace:
    """Forward-pass caches one layer needs for its backward pass."""

    __slots__ = ("inputs", "i", "f", "o", "g", "c", "tanh_c", "h", "mask",
                 "h0", "c0")

    def __init__(self, T: int, n_in: int, hidden: int):
        self.inputs = np.empty((T, n_in))
        self.i = np.empty((T, hidden))
        self.f = np.empty((T, hidden))
        self.o = np.empty((T, hidden))
        self.g = np.empty((T, hidden))
        self.c = np.empty((T, hidden))
        self.tanh_c = np.empty((T, hidden))
        self.h = np.empty((T, hidden))
        self.mask = None  # set in train mode
        self.h0 = None
        self.c0 = None


def _forward_layer(params: LstmCellParams, X: np.ndarray, h0: np.ndarray,
                   c0: np.ndarray) -> _LayerTrace:
    T = len(X)
    hs = params.hidden_size
    trace = _LayerTrace(T, params.input_size, hs)
    trace.inputs = X
    trace.h0, trace.c0 = h0, c0

    wx = X @ params.W.T  # (T, 4H), hoisted out of the step loop
    h, c = h0, c0
    for t in range(T):
        z = wx[t] + params.U @ h + params.b
        i = sigmoid(z[:hs])
        f = sigmoid(z[hs:2 * hs])
        o = sigmoid(z[2 * hs:3 * hs])
        g = np.tanh(z[3 * hs:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        trace.i[t] = i
        trace.f[t] = f
        trace.o[t] = o
        trace.g[t] = g
        trace.c[t] = c
        trace.tanh_c[t] = tc
        trace.h[t] = h
    return trace


def stacked_forward(X: np.ndarray, layers: Sequence[LstmCellParams],
                    out_layer: DenseParams, dropout_p: float = 0.0,
                    mode: str = "eval", rng: np.random.Generator | None = None,
                    state: LstmState | None = None,
                    ) -> tuple[np.ndarray, LstmState, list[_LayerTrace]]:
    """Run the whole stack over a sequence.

    Returns per-step class scores (T, 2), the final state, and the layer
    traces needed by :func:`backward_through_chunk`. ``state`` defaults to
    zeros (sequence start).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(layers) < 1:
        raise ValueError("need at least one LSTM layer")
    if X.shape[1] != layers[0].input_size:
        raise ValueError(f"feature width {X.shape[1]} != {layers[0].input_size}")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode '{mode}'")
    if mode == "train" and dropout_p > 0.0 and rng is None:
        raise ValueError("train-mode dropout needs an rng")
    if state is None:
        state = zero_state(layers)

    traces: list[_LayerTrace] = []
    current = X
    for idx, params in enumerate(layers):
        trace = _forward_layer(params, current, state.h[idx], state.c[idx])
        if mode == "train" and dropout_p > 0.0:
            trace.mask = dropout_mask(rng, trace.h.shape, dropout_p)
            current = trace.h * trace.mask
        else:
            current = trace.h
        traces.append(trace)

    scores = current @ out_layer.W.T + out_layer.b
    final = LstmState(h=[tr.h[-1].copy() for tr in traces],
                      c=[tr.c[-1].copy() for tr in traces])
    return scores, final, traces


def stacked_lstm_forward(X: np.ndarray, layers: Sequence[LstmCellParams],
                         out_layer: DenseParams, dropout_p: float = 0.0,
                         mode: str = "eval",
                         rng: np.random.Generator | None = None,
                         state: LstmState | None = None,
                         ) -> tuple[np.ndarray, LstmState]:
    """Per-step class scores for a sequence (see :func:`stacked_forward`)."""
    scores, final, _ = stacked_forward(X, layers, out_layer, dropout_p,
                                       mode, rng, state)
    return scores, final


def backward_through_chunk(layers: Sequence[LstmCellParams],
                           out_layer: DenseParams,
                           traces: list[_LayerTrace],
                           dscores: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate per-step score gradients through the stack.

    Gradients stop at the chunk boundary: no flow into the initial state.
    Keys follow the checkpoint layout: ``lstm<i>.W/U/b`` and ``out.W/b``.
    """
    top = traces[-1]
    top_out = top.h if top.mask is None else top.h * top.mask
    grads: dict[str, np.ndarray] = {
        "out.W": dscores.T @ top_out,
        "out.b": dscores.sum(axis=0),
    }

    d_above = dscores @ out_layer.W  # grad wrt the (masked) output of the top layer
    for idx in range(len(layers) - 1, -1, -1):
        params = layers[idx]
        trace = traces[idx]
        d_raw_h = d_above if trace.mask is None else d_above * trace.mask

        T = len(trace.h)
        hs = params.hidden_size
        dz_all = np.empty((T, 4 * hs))
        dh_next = np.zeros(hs)
        dc_next = np.zeros(hs)
        for t in range(T - 1, -1, -1):
            dh = d_raw_h[t] + dh_next
            c_prev = trace.c[t - 1] if t > 0 else trace.c0
            i, f, o, g = trace.i[t], trace.f[t], trace.o[t], trace.g[t]
            tc = trace.tanh_c[t]

            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = dz_all[t]
            dz[:hs] = dc * g * i * (1.0 - i)
            dz[hs:2 * hs] = dc * c_prev * f * (1.0 - f)
            dz[2 * hs:3 * hs] = do * o * (1.0 - o)
            dz[3 * hs:] = dc * i * (1.0 - g * g)

            dh_next = params.U.T @ dz
            dc_next = dc * f

        h_prevs = np.vstack([trace.h0, trace.h[:-1]])
        grads[f"lstm{idx}.W"] = dz_all.T @ trace.inputs
        grads[f"lstm{idx}.U"] = dz_all.T @ h_prevs
        grads[f"lstm{idx}.b"] = dz_all.sum(axis=0)
        d_above = dz_all @ params.W  # grad wrt the masked output of the layer below
    return grads
