"""Feature encoding for flow records.

Numeric features (raw fields plus derived rate/ratio features) are min-max
normalized into [0, 1] with ranges fitted on training records only;
categorical features (protocol, direction, ports) are one-hot encoded
against fitted vocabularies. Ports use the top-K most frequent training
ports plus range buckets, bounding the one-hot width.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError
from .flows import FlowRecord

NUMERIC_FIELDS = ("duration", "total_packets", "total_bytes", "src_bytes",
                  "iat_min", "iat_max", "iat_avg")
DERIVED_FEATURES = ("packets_per_sec", "bytes_per_sec", "bytes_per_packet")
CATEGORICAL_FIELDS = ("protocol", "direction", "src_port", "dst_port")

PORT_BUCKETS = ("well-known", "registered", "ephemeral", "absent")
OTHER = "other"
ABSENT = "absent"


@dataclass(frozen=True)
class FeatureSpec:
    """Which features an encoder produces, in a fixed order."""

    numeric_features: tuple[str, ...]
    categorical_features: tuple[str, ...] = CATEGORICAL_FIELDS
    port_top_k: int = 64

    def __post_init__(self):
        names = self.numeric_features + self.categorical_features
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        if self.port_top_k < 0:
            raise ValueError("port_top_k must be >= 0")
        for name in self.numeric_features:
            if name not in NUMERIC_FIELDS + DERIVED_FEATURES:
                raise ValueError(f"unknown numeric feature '{name}'")
        for name in self.categorical_features:
            if name not in CATEGORICAL_FIELDS:
                raise ValueError(f"unknown categorical feature '{name}'")


def ctu13_feature_spec(port_top_k: int = 64) -> FeatureSpec:
    return FeatureSpec(
        numeric_features=("duration", "total_packets", "packets_per_sec",
                          "total_bytes", "src_bytes", "bytes_per_sec",
                          "bytes_per_packet"),
        port_top_k=port_top_k,
    )


def cicids_feature_spec(port_top_k: int = 64) -> FeatureSpec:
    return FeatureSpec(
        numeric_features=("duration", "total_packets", "total_bytes",
                          "packets_per_sec", "bytes_per_packet",
                          "iat_min", "iat_max", "iat_avg"),
        port_top_k=port_top_k,
    )


def spec_for_style(schema_id: str, port_top_k: int = 64) -> FeatureSpec:
    if schema_id == "cicids-style":
        return cicids_feature_spec(port_top_k)
    return ctu13_feature_spec(port_top_k)


def derive_numeric(record: FlowRecord) -> dict[str, float]:
    """Rate/ratio features; zero denominators yield 0 to stay finite."""
    if record.duration > 0:
        pps = record.total_packets / record.duration
        bps = record.total_bytes / record.duration
    else:
        pps = bps = 0.0
    bpp = record.total_bytes / record.total_packets if record.total_packets > 0 else 0.0
    return {"packets_per_sec": pps, "bytes_per_sec": bps, "bytes_per_packet": bpp}


def _numeric_value(record: FlowRecord, name: str) -> float:
    if name in DERIVED_FEATURES:
        return derive_numeric(record)[name]
    value = getattr(record, name)
    return 0.0 if value is None else float(value)


def _port_bucket(port: int | None) -> str:
    if port is None:
        return ABSENT
    if port <= 1023:
        return "well-known"
    if port <= 49151:
        return "registered"
    return "ephemeral"


def _category_value(record: FlowRecord, name: str) -> str:
    if name == "protocol":
        return record.protocol
    if name == "direction":
        return record.direction.value
    port = getattr(record, name)
    return ABSENT if port is None else str(port)


class FlowEncoder(BaseEstimator, TransformerMixin):
    """Fit-on-train feature transformer mapping records to [0, 1] vectors.

    Vocabularies order categories by descending training frequency, ties by
    value, followed by the fixed tail entries (port buckets, "other"), so
    refitting the same data reproduces the same encoder. Unseen categories
    map to "other"; out-of-range numerics clamp to [0, 1]; a constant
    training feature encodes to 0.
    """

    def __init__(self, spec: FeatureSpec | None = None):
        self.spec = spec

    def fit(self, records: Sequence[FlowRecord], y=None):
        if not records:
            raise DataError("cannot fit an encoder on an empty training set")
        spec = self.spec if self.spec is not None else ctu13_feature_spec()

        ranges: dict[str, tuple[float, float]] = {}
        for name in spec.numeric_features:
            values = [_numeric_value(r, name) for r in records]
            ranges[name] = (min(values), max(values))

        vocabularies: dict[str, tuple[str, ...]] = {}
        for name in spec.categorical_features:
            counts = Counter(_category_value(r, name) for r in records)
            if name in ("src_port", "dst_port"):
                counts = Counter(
                    {c: n for c, n in counts.items() if c != ABSENT}
                )
                top = [c for c, _ in sorted(
                    counts.items(), key=lambda kv: (-kv[1], kv[0])
                )[:spec.port_top_k]]
                vocab = tuple(top) + PORT_BUCKETS + (OTHER,)
            else:
                observed = [c for c, _ in sorted(
                    counts.items(), key=lambda kv: (-kv[1], kv[0])
                )]
                vocab = tuple(observed) + (OTHER,)
            vocabularies[name] = vocab

        self.spec_ = spec
        self.numeric_ranges_ = ranges
        self.vocabularies_ = vocabularies
        self.output_width_ = len(spec.numeric_features) + sum(
            len(v) for v in vocabularies.values()
        )
        self.feature_names_ = self._feature_names()
        return self

    def _check_fitted(self):
        if not hasattr(self, "output_width_"):
            raise DataError("encoder is not fitted")

    def _feature_names(self) -> tuple[str, ...]:
        names = list(self.spec_.numeric_features)
        for cat in self.spec_.categorical_features:
            names.extend(f"{cat}={v}" for v in self.vocabularies_[cat])
        return tuple(names)

    def transform(self, records: Sequence[FlowRecord]) -> np.ndarray:
        """Encode records into an (n, output_width) float64 array."""
        self._check_fitted()
        out = np.zeros((len(records), self.output_width_))
        for i, record in enumerate(records):
            out[i] = self.encode_record(record)
        return out

    def encode_record(self, record: FlowRecord) -> np.ndarray:
        self._check_fitted()
        vec = np.zeros(self.output_width_)
        pos = 0
        for name in self.spec_.numeric_features:
            lo, hi = self.numeric_ranges_[name]
            x = _numeric_value(record, name)
            vec[pos] = 0.0 if hi <= lo else min(max((x - lo) / (hi - lo), 0.0), 1.0)
            pos += 1
        for cat in self.spec_.categorical_features:
            vocab = self.vocabularies_[cat]
            value = _category_value(record, cat)
            if value not in vocab and cat in ("src_port", "dst_port"):
                value = _port_bucket(getattr(record, cat))
            if value not in vocab:
                value = OTHER
            vec[pos + vocab.index(value)] = 1.0
            pos += len(vocab)
        return vec

    def labels(self, records: Sequence[FlowRecord]) -> np.ndarray:
        """0/1 malicious labels aligned with :meth:`transform` rows."""
        return np.array([1 if r.is_malicious else 0 for r in records], dtype=np.int64)

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "spec": {
                "numeric_features": list(self.spec_.numeric_features),
                "categorical_features": list(self.spec_.categorical_features),
                "port_top_k": self.spec_.port_top_k,
            },
            "numeric_ranges": {k: list(v) for k, v in self.numeric_ranges_.items()},
            "vocabularies": {k: list(v) for k, v in self.vocabularies_.items()},
            "output_width": self.output_width_,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True),
                              encoding="utf-8")

    @classmethod
    def from_dict(cls, payload: dict) -> "FlowEncoder":
        spec = FeatureSpec(
            numeric_features=tuple(payload["spec"]["numeric_features"]),
            categorical_features=tuple(payload["spec"]["categorical_features"]),
            port_top_k=payload["spec"]["port_top_k"],
        )
        enc = cls(spec)
        enc.spec_ = spec
        enc.numeric_ranges_ = {
            k: (float(v[0]), float(v[1]))
            for k, v in payload["numeric_ranges"].items()
        }
        enc.vocabularies_ = {k: tuple(v) for k, v in payload["vocabularies"].items()}
        enc.output_width_ = int(payload["output_width"])
        enc.feature_names_ = enc._feature_names()
        return enc

    @classmethod
    def load(cls, path: str | Path) -> "FlowEncoder":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def fingerprint(self) -> str:
        """Stable content hash, recorded in checkpoints for pairing."""
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
