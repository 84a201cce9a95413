"""flownids: temporal NetFlow intrusion detection.

Extracts attack scenarios from labelled flow data, trains a static
feedforward detector and a 2-stacked LSTM detector from scratch, and
evaluates them individually and as a logical-OR ensemble with
per-scenario confusion matrices and F1 scores.
"""

__version__ = "0.1.0"

from .detectors import (FnnDetector, LstmDetector, Predictions, ensemble_or,
                        load_detector, save_checkpoint, train_fnn, train_lstm)
from .errors import (ConfigError, DataError, FlowNidsError, NumericError,
                     SchemaError, ScenarioError)
from .features import (FeatureSpec, FlowEncoder, cicids_feature_spec,
                       ctu13_feature_spec, derive_numeric, spec_for_style)
from .flows import (BENIGN, Direction, FlowDataset, FlowRecord, FlowSchema,
                    canonical_schema, classify_direction, filter_hosts,
                    parse_flows, write_flows)
from .metrics import (ConfusionMatrix, EvalReport, confusion, delta_report,
                      f1, scenario_report)
from .nn import TrainConfig
from .scenarios import (Interval, Scenario, ScenarioSplit, beacon_period,
                        detect_intervals, extract_scenarios,
                        make_benign_scenarios, merge_intervals, split_scenario)
from .synth import FeatureNoise, SynthConfig, generate, separation_experiment

__all__ = [
    "BENIGN", "ConfigError", "ConfusionMatrix", "DataError", "Direction",
    "EvalReport", "FeatureNoise", "FeatureSpec", "FlowDataset", "FlowEncoder",
    "FlowNidsError", "FlowRecord", "FlowSchema", "FnnDetector", "Interval",
    "LstmDetector", "NumericError", "Predictions", "Scenario", "ScenarioError",
    "ScenarioSplit", "SchemaError", "SynthConfig", "TrainConfig",
    "beacon_period", "canonical_schema", "cicids_feature_spec",
    "classify_direction", "confusion", "ctu13_feature_spec", "delta_report",
    "derive_numeric", "detect_intervals", "ensemble_or", "extract_scenarios",
    "f1", "filter_hosts", "generate", "load_detector", "make_benign_scenarios",
    "merge_intervals", "parse_flows", "save_checkpoint", "scenario_report",
    "separation_experiment", "spec_for_style", "split_scenario", "train_fnn",
    "train_lstm", "write_flows",
]
