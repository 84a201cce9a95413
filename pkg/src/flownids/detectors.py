"""The two concrete detectors and their logical-OR ensemble.

`FnnDetector` classifies each record independently from its feature
vector; `LstmDetector` is a 2-stacked unidirectional recurrent net that
emits one decision per time step and is trained scenario-by-scenario with
truncated backpropagation through time. Both share the weighted loss,
optimizer and seeded determinism: the same config and seed reproduce the
same checkpoint bytes.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import ConfigError, DataError, NumericError
from .features import FlowEncoder
from .nn import (Adam, DenseParams, LstmCellParams, LstmState, TrainConfig,
                 class_weights_from_labels, fnn_scores, fnn_train_epoch,
                 init_dense, init_lstm_cell, softmax, stacked_lstm_forward,
                 tbptt_train_sequence, zero_state)
from .scenarios import ScenarioSplit

log = logging.getLogger(__name__)


@dataclass
class FnnModel:
    """Parameter container: two ReLU hidden layers plus a width-2 output."""

    fc1: DenseParams
    fc2: DenseParams
    out: DenseParams

    def param_dict(self) -> dict[str, np.ndarray]:
        return {"fc1.W": self.fc1.W, "fc1.b": self.fc1.b,
                "fc2.W": self.fc2.W, "fc2.b": self.fc2.b,
                "out.W": self.out.W, "out.b": self.out.b}


@dataclass
class LstmModel:
    """Parameter container: stacked LSTM cells plus a width-2 output."""

    layers: list[LstmCellParams]
    out: DenseParams

    def param_dict(self) -> dict[str, np.ndarray]:
        params: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            params[f"lstm{i}.W"] = layer.W
            params[f"lstm{i}.U"] = layer.U
            params[f"lstm{i}.b"] = layer.b
        params["out.W"] = self.out.W
        params["out.b"] = self.out.b
        return params


@dataclass(frozen=True)
class Predictions:
    """Per-record classes (0 benign / 1 malicious) and probability pairs.

    Ties (0.5, 0.5) classify as benign, so an untrained zero model never
    raises alerts.
    """

    labels: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        if self.labels.shape != (len(self.probs),) or self.probs.shape[1] != 2:
            raise DataError("inconsistent prediction shapes")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def malicious_prob(self) -> np.ndarray:
        return self.probs[:, 1]


def _classify(scores: np.ndarray) -> Predictions:
    probs = softmax(scores)
    labels = (probs[:, 1] > probs[:, 0]).astype(np.int64)  # tie -> benign
    return Predictions(labels=labels, probs=probs)


def _validate_features(X: np.ndarray, width: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D feature array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("feature array contains non-finite values")
    if width is not None and X.shape[1] != width:
        raise DataError(f"feature width {X.shape[1]} != model width {width}")
    return X


class FnnDetector(BaseEstimator, ClassifierMixin):
    """Static per-record classifier with the sklearn fit/predict surface."""

    def __init__(self, hidden1=256, hidden2=256, learning_rate=1e-3,
                 epochs=20, dropout=0.3, batch_size=512, class_weights=None,
                 seed=0):
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.dropout = dropout
        self.batch_size = batch_size
        self.class_weights = class_weights
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, epochs=self.epochs,
            dropout_p=self.dropout, batch_size=self.batch_size,
            class_weights=self.class_weights, seed=self.seed,
        )

    def fit(self, X, y):
        config = self._config()
        X = _validate_features(X)
        y = np.asarray(y, dtype=np.int64)
        if len(X) != len(y):
            raise DataError("X and y length mismatch")
        if len(X) == 0:
            raise DataError("cannot train on an empty record set")

        rng = np.random.default_rng(config.seed)
        model = FnnModel(
            fc1=init_dense(rng, X.shape[1], self.hidden1),
            fc2=init_dense(rng, self.hidden1, self.hidden2),
            out=init_dense(rng, self.hidden2, 2),
        )
        weights = config.class_weights or class_weights_from_labels(y)
        optimizer = Adam(model.param_dict(), config.learning_rate)

        curve = []
        for epoch in range(config.epochs):
            loss = fnn_train_epoch(model.fc1, model.fc2, model.out, X, y,
                                   weights, optimizer, config.batch_size,
                                   config.dropout_p, rng)
            if not np.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch + 1}")
            curve.append(loss)

        self.model_ = model
        self.classes_ = np.array([0, 1])
        self.class_weights_ = weights
        self.loss_curve_ = curve
        self.n_features_in_ = X.shape[1]
        return self

    def decision_scores(self, X) -> np.ndarray:
        X = _validate_features(X, self.model_.fc1.n_in)
        return fnn_scores(X, self.model_.fc1, self.model_.fc2, self.model_.out)

    def predictions(self, X) -> Predictions:
        return _classify(self.decision_scores(X))

    def predict(self, X) -> np.ndarray:
        return self.predictions(X).labels

    def predict_proba(self, X) -> np.ndarray:
        return self.predictions(X).probs


class LstmDetector(BaseEstimator):
    """Sequential per-step classifier trained with truncated BPTT.

    ``fit`` takes per-scenario sequences; state resets to zero between
    scenarios and carries across chunk boundaries inside one. Inference is
    causal: the decision for step t depends only on steps 1..t.
    """

    def __init__(self, hidden1=256, hidden2=256, learning_rate=1e-3,
                 epochs=30, dropout=0.2, tbptt_window=None, class_weights=None,
                 seed=0):
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.dropout = dropout
        self.tbptt_window = tbptt_window
        self.class_weights = class_weights
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, epochs=self.epochs,
            dropout_p=self.dropout, batch_size=1,
            tbptt_window=self.tbptt_window,
            class_weights=self.class_weights, seed=self.seed,
        )

    def fit(self, sequences: Sequence[np.ndarray], labels: Sequence[np.ndarray]):
        config = self._config()
        if len(sequences) != len(labels) or not sequences:
            raise DataError("need matching, nonempty sequence and label lists")
        sequences = [_validate_features(X) for X in sequences]
        labels = [np.asarray(y, dtype=np.int64) for y in labels]
        for X, y in zip(sequences, labels):
            if len(X) != len(y) or len(X) == 0:
                raise DataError("each sequence needs one label per step")
        width = sequences[0].shape[1]

        rng = np.random.default_rng(config.seed)
        model = LstmModel(
            layers=[init_lstm_cell(rng, width, self.hidden1),
                    init_lstm_cell(rng, self.hidden1, self.hidden2)],
            out=init_dense(rng, self.hidden2, 2),
        )
        pooled = np.concatenate(labels)
        weights = config.class_weights or class_weights_from_labels(pooled)
        optimizer = Adam(model.param_dict(), config.learning_rate)

        curve = []  # (epoch, sequence index, mean loss) rows
        for epoch in range(config.epochs):
            order = rng.permutation(len(sequences))
            for seq_idx in order:
                losses = tbptt_train_sequence(
                    model.layers, model.out, sequences[seq_idx], labels[seq_idx],
                    weights, optimizer, config.tbptt_window, config.dropout_p,
                    rng, state=None,
                )
                mean_loss = float(np.mean(losses))
                if not np.isfinite(mean_loss):
                    raise NumericError(f"training diverged at epoch {epoch + 1}")
                curve.append((epoch + 1, int(seq_idx), mean_loss))

        self.model_ = model
        self.classes_ = np.array([0, 1])
        self.class_weights_ = weights
        self.loss_curve_ = curve
        self.n_features_in_ = width
        return self

    def predictions(self, sequence: np.ndarray,
                    warmup: np.ndarray | None = None) -> Predictions:
        """Per-step predictions for one scenario sequence.

        ``warmup`` records (typically the tail of the scenario's training
        split) are run through the net first, without emitting predictions,
        to seed the state; by default evaluation is a cold start from zero.
        """
        model = self.model_
        sequence = _validate_features(sequence, model.layers[0].input_size)
        state: LstmState | None = None
        if warmup is not None and len(warmup):
            warmup = _validate_features(warmup, model.layers[0].input_size)
            _, state = stacked_lstm_forward(warmup, model.layers, model.out)
        scores, _ = stacked_lstm_forward(sequence, model.layers, model.out,
                                         state=state)
        return _classify(scores)

    def predict(self, sequence, warmup=None) -> np.ndarray:
        return self.predictions(sequence, warmup).labels

    def predict_proba(self, sequence, warmup=None) -> np.ndarray:
        return self.predictions(sequence, warmup).probs


# ---------------------------------------------------------------------------
# Scenario-level training and inference
# ---------------------------------------------------------------------------

def train_fnn(splits: Sequence[ScenarioSplit], encoder: FlowEncoder,
              config: TrainConfig, hidden: tuple[int, int] = (256, 256)) -> FnnDetector:
    """Pool every scenario's training records and fit the static detector."""
    records = [r for sp in splits for r in sp.train]
    if not records:
        raise DataError("no training records across scenarios")
    X = encoder.transform(records)
    y = encoder.labels(records)
    detector = FnnDetector(
        hidden1=hidden[0], hidden2=hidden[1],
        learning_rate=config.learning_rate, epochs=config.epochs,
        dropout=config.dropout_p, batch_size=config.batch_size,
        class_weights=config.class_weights, seed=config.seed,
    )
    return detector.fit(X, y)


def train_lstm(splits: Sequence[ScenarioSplit], encoder: FlowEncoder,
               config: TrainConfig, hidden: tuple[int, int] = (256, 256)) -> LstmDetector:
    """Fit the sequential detector, one training sequence per scenario."""
    usable = [sp for sp in splits if len(sp.train)]
    if not usable:
        raise DataError("no training records across scenarios")
    sequences = [encoder.transform(sp.train) for sp in usable]
    labels = [encoder.labels(sp.train) for sp in usable]
    detector = LstmDetector(
        hidden1=hidden[0], hidden2=hidden[1],
        learning_rate=config.learning_rate, epochs=config.epochs,
        dropout=config.dropout_p, tbptt_window=config.tbptt_window,
        class_weights=config.class_weights, seed=config.seed,
    )
    return detector.fit(sequences, labels)


def predict_fnn(detector: FnnDetector, X: np.ndarray) -> Predictions:
    return detector.predictions(X)


def predict_lstm(detector: LstmDetector, sequence: np.ndarray,
                 warmup: np.ndarray | None = None) -> Predictions:
    return detector.predictions(sequence, warmup)


def ensemble_or(pred_a: Predictions, pred_b: Predictions) -> Predictions:
    """Flag a record malicious when either member does.

    Benign requires a unanimous benign vote, so the ensemble can never have
    more false negatives than either member, nor fewer false positives.
    The reported malicious probability is the element-wise max.
    """
    if len(pred_a) != len(pred_b):
        raise DataError("prediction lists differ in length")
    labels = np.maximum(pred_a.labels, pred_b.labels)
    mal = np.maximum(pred_a.malicious_prob, pred_b.malicious_prob)
    return Predictions(labels=labels, probs=np.column_stack([1.0 - mal, mal]))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"FLOWNIDS1\n"


@dataclass(frozen=True)
class Checkpoint:
    kind: str  # "fnn" | "lstm"
    arch: dict
    arrays: dict[str, np.ndarray]
    encoder_hash: str
    config: dict
    seed: int

    def build_fnn(self) -> FnnDetector:
        if self.kind != "fnn":
            raise DataError(f"checkpoint holds a {self.kind} model")
        a = self.arrays
        det = FnnDetector(seed=self.seed, **{k: v for k, v in self.config.items()
                                             if k in FnnDetector().get_params()
                                             and k != "seed"})
        det.model_ = FnnModel(
            fc1=DenseParams(a["fc1.W"], a["fc1.b"]),
            fc2=DenseParams(a["fc2.W"], a["fc2.b"]),
            out=DenseParams(a["out.W"], a["out.b"]),
        )
        det.classes_ = np.array([0, 1])
        det.n_features_in_ = det.model_.fc1.n_in
        return det

    def build_lstm(self) -> LstmDetector:
        if self.kind != "lstm":
            raise DataError(f"checkpoint holds a {self.kind} model")
        a = self.arrays
        det = LstmDetector(seed=self.seed, **{k: v for k, v in self.config.items()
                                              if k in LstmDetector().get_params()
                                              and k != "seed"})
        layers = []
        for i in range(self.arch["n_layers"]):
            layers.append(LstmCellParams(a[f"lstm{i}.W"], a[f"lstm{i}.U"],
                                         a[f"lstm{i}.b"]))
        det.model_ = LstmModel(layers=layers,
                               out=DenseParams(a["out.W"], a["out.b"]))
        det.classes_ = np.array([0, 1])
        det.n_features_in_ = layers[0].input_size
        return det


def _model_payload(detector) -> tuple[str, dict, dict[str, np.ndarray]]:
    if isinstance(detector, FnnDetector):
        model = detector.model_
        arch = {"n_features": model.fc1.n_in, "hidden": [model.fc1.n_out,
                                                         model.fc2.n_out]}
        return "fnn", arch, model.param_dict()
    if isinstance(detector, LstmDetector):
        model = detector.model_
        arch = {"n_features": model.layers[0].input_size,
                "n_layers": len(model.layers),
                "hidden": [p.hidden_size for p in model.layers]}
        return "lstm", arch, model.param_dict()
    raise DataError(f"cannot checkpoint {type(detector).__name__}")


def save_checkpoint(path: str | Path, detector, encoder_hash: str = "",
                    extra_config: dict | None = None) -> None:
    """Serialize a fitted detector to a deterministic single-file format.

    Layout: magic, 8-byte big-endian header length, a sorted-key JSON
    header (model kind, architecture, array manifest, hyperparameters,
    encoder fingerprint, seed), then the raw little-endian float64 array
    bytes in manifest order. Identical models produce identical bytes.
    """
    kind, arch, arrays = _model_payload(detector)
    config = {k: v for k, v in detector.get_params().items()}
    if extra_config:
        config.update(extra_config)
    header = {
        "kind": kind,
        "arch": arch,
        "arrays": [{"name": name, "shape": list(arr.shape)}
                   for name, arr in arrays.items()],
        "encoder_hash": encoder_hash,
        "config": config,
        "seed": detector.seed,
        "format": 1,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_MAGIC)
        handle.write(struct.pack(">Q", len(blob)))
        handle.write(blob)
        for name, arr in arrays.items():
            handle.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise DataError(f"{path} is not a detector checkpoint")
    offset = len(_MAGIC)
    (header_len,) = struct.unpack(">Q", raw[offset:offset + 8])
    offset += 8
    header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    offset += header_len

    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += count * 8
    config = header["config"]
    return Checkpoint(
        kind=header["kind"], arch=header["arch"], arrays=arrays,
        encoder_hash=header["encoder_hash"], config=config,
        seed=int(header["seed"]),
    )


def load_detector(path: str | Path):
    """Rebuild the fitted detector stored at ``path``."""
    ckpt = load_checkpoint(path)
    return ckpt.build_fnn() if ckpt.kind == "fnn" else ckpt.build_lstm()
