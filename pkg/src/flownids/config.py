"""Run configuration: structured config files driving the CLI pipeline.

YAML or JSON, keyed sections for the dataset

(schema/paths/hosts), extraction parameters, feature options, and
per-model hyperparameters. Model defaults come from per-dataset-style
profiles and can be overridden key by key.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .flows import FlowSchema, MANDATORY_FIELDS, OPTIONAL_FIELDS
from .nn import TrainConfig
from .synth import FeatureNoise, SynthConfig

#: Hyperparameter defaults keyed by dataset style.
PROFILES: dict[str, dict[str, dict]] = {
    "cicids-style": {
        "lstm": {"hidden1": 256, "hidden2": 256, "learning_rate": 1e-3,
                 "epochs": 30, "dropout": 0.2, "batch_size": 1,
                 "tbptt_window": None},
        "fnn": {"hidden1": 256, "hidden2": 256, "learning_rate": 1e-3,
                "epochs": 20, "dropout": 0.3, "batch_size": 512},
    },
    "ctu13-style": {
        "lstm": {"hidden1": 256, "hidden2": 256, "learning_rate": 1e-3,
                 "epochs": 100, "dropout": 0.2, "batch_size": 1,
                 "tbptt_window": 512},
        "fnn": {"hidden1": 512, "hidden2": 512, "learning_rate": 1e-3,
                "epochs": 100, "dropout": 0.2, "batch_size": 1024},
    },
}


@dataclass(frozen=True)
class ModelConfig:
    hidden1: int
    hidden2: int
    train: TrainConfig

    @property
    def hidden(self) -> tuple[int, int]:
        return (self.hidden1, self.hidden2)


@dataclass(frozen=True)
class ExtractionConfig:
    attacks: dict[str, list[tuple[float, float]] | str] | None
    benign_count: int = 0
    benign_target_len: int | None = None
    padding: float = 0.0
    gap_threshold: float | None = None
    train_fraction: float = 0.7
    min_malicious_train_fraction: float = 0.7


def dict_fingerprint(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RunConfig:
    seed: int
    style: str
    dataset_paths: tuple[Path, ...]
    schema: FlowSchema
    excluded_hosts: frozenset[str]
    extraction: ExtractionConfig
    fnn: ModelConfig
    lstm: ModelConfig
    port_top_k: int = 64
    warmup: int = 0
    raw: dict = field(default_factory=dict, compare=False)

    def fingerprint(self) -> str:
        return dict_fingerprint(self.raw)


def load_config_dict(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            payload = json.loads(text)
        else:
            payload = yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config root of {path} must be a mapping")
    return payload


def build_schema(section: dict) -> FlowSchema:
    if not isinstance(section, dict):
        raise ConfigError("'schema' must be a mapping")
    section = dict(section)
    kind = section.pop("kind", "custom")
    schema_id = section.get("schema_id", "ctu13-style")
    try:
        if kind == "canonical":
            columns = {f: f for f in MANDATORY_FIELDS + OPTIONAL_FIELDS}
            label_column = "label"
        else:
            columns = section["columns"]
            label_column = section["label_column"]
        return FlowSchema(
            columns=columns,
            label_column=label_column,
            malicious_labels=section.get("malicious_labels", {}),
            schema_id=schema_id,
            delimiter=section.get("delimiter", ","),
            direction_values=section.get(
                "direction_values",
                FlowSchema.__dataclass_fields__["direction_values"].default_factory(),
            ),
            internal_hosts=frozenset(section.get("internal_hosts", ())),
            epoch=section.get("epoch", "unix"),
        )
    except KeyError as exc:
        raise ConfigError(f"schema section missing {exc}") from None


def _model_config(section: dict | None, profile: dict, seed: int,
                  is_lstm: bool) -> ModelConfig:
    merged = dict(profile)
    if section:
        unknown = set(section) - set(profile) - {"class_weights", "seed"}
        if unknown:
            raise ConfigError(f"unknown model options: {sorted(unknown)}")
        merged.update(section)
    weights = merged.get("class_weights")
    train = TrainConfig(
        learning_rate=float(merged["learning_rate"]),
        epochs=int(merged["epochs"]),
        dropout_p=float(merged["dropout"]),
        batch_size=int(merged["batch_size"]),
        tbptt_window=(None if not is_lstm or merged.get("tbptt_window") is None
                      else int(merged["tbptt_window"])),
        class_weights=tuple(weights) if weights else None,
        seed=int(merged.get("seed", seed)),
    )
    return ModelConfig(hidden1=int(merged["hidden1"]),
                       hidden2=int(merged["hidden2"]), train=train)


def _extraction_config(section: dict | None) -> ExtractionConfig:
    section = dict(section or {})
    attacks = section.get("attacks")
    if isinstance(attacks, dict):
        parsed: dict[str, list[tuple[float, float]] | str] = {}
        for attack_type, value in attacks.items():
            if value == "auto":
                parsed[attack_type] = "auto"
            elif isinstance(value, (list, tuple)):
                try:
                    parsed[attack_type] = [(float(a), float(b)) for a, b in value]
                except (TypeError, ValueError):
                    raise ConfigError(
                        f"documented intervals for '{attack_type}' must be "
                        "[start, end] pairs"
                    ) from None
            else:
                raise ConfigError(
                    f"attack '{attack_type}' must be 'auto' or a list of intervals"
                )
        attacks = parsed
    elif attacks not in (None, "auto"):
        raise ConfigError("'attacks' must be 'auto' or a mapping")

    benign = section.get("benign_scenarios") or {}
    config = ExtractionConfig(
        attacks=attacks,
        benign_count=int(benign.get("count", 0)),
        benign_target_len=(int(benign["target_len"])
                           if benign.get("target_len") else None),
        padding=float(section.get("padding", 0.0)),
        gap_threshold=(float(section["gap_threshold"])
                       if section.get("gap_threshold") is not None else None),
        train_fraction=float(section.get("train_fraction", 0.7)),
        min_malicious_train_fraction=float(
            section.get("min_malicious_train_fraction", 0.7)),
    )
    if attacks is None and config.benign_count == 0:
        raise ConfigError(
            "nothing to extract: configure 'attacks' (auto or documented "
            "intervals) and/or 'benign_scenarios'"
        )
    if not 0.0 < config.train_fraction < 1.0:
        raise ConfigError("train_fraction must be in (0, 1)")
    return config


def load_run_config(path: str | Path) -> RunConfig:
    payload = load_config_dict(path)
    try:
        dataset = payload["dataset"]
        paths = tuple(Path(p) for p in dataset["paths"])
    except KeyError as exc:
        raise ConfigError(f"config missing {exc}") from None
    if not paths:
        raise ConfigError("dataset.paths must list at least one file")

    style = dataset.get("style", "ctu13-style")
    if style not in PROFILES:
        raise ConfigError(f"unknown dataset style '{style}'")
    seed = int(payload.get("seed", 0))
    models = payload.get("models", {})
    features = payload.get("features", {})

    return RunConfig(
        seed=seed,
        style=style,
        dataset_paths=paths,
        schema=build_schema(dataset.get("schema", {"kind": "canonical"})),
        excluded_hosts=frozenset(dataset.get("excluded_hosts", ())),
        extraction=_extraction_config(payload.get("extraction")),
        fnn=_model_config(models.get("fnn"), PROFILES[style]["fnn"], seed,
                          is_lstm=False),
        lstm=_model_config(models.get("lstm"), PROFILES[style]["lstm"], seed,
                           is_lstm=True),
        port_top_k=int(features.get("port_top_k", 64)),
        warmup=int(payload.get("eval", {}).get("warmup", 0)),
        raw=payload,
    )


def load_synth_config(path: str | Path) -> SynthConfig:
    payload = load_config_dict(path)
    noise = payload.get("feature_noise") or {}
    unknown = set(noise) - set(FeatureNoise.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown feature_noise options: {sorted(unknown)}")
    try:
        return SynthConfig(
            n_records=int(payload["n_records"]),
            malicious_fraction=float(payload["malicious_fraction"]),
            beacon_period=(float(payload["beacon_period"])
                           if payload.get("beacon_period") is not None else None),
            burst_len=int(payload.get("burst_len", 5)),
            trigger_ngram=int(payload.get("trigger_ngram", 0)),
            feature_noise=FeatureNoise(**{k: float(v) for k, v in noise.items()}),
            mean_gap=float(payload.get("mean_gap", 1.0)),
            attack_type=str(payload.get("attack_type", "synthetic")),
            seed=int(payload.get("seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"synth config missing {exc}") from None
