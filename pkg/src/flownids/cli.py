"""Command-line driver: extract, synth, train, eval, ensemble, gradcheck.

Commands compose through plain files: extraction writes per-scenario
record files plus a manifest, training writes an encoder and a checkpoint,
evaluation writes prediction files and report tables. Every command stamps
its output directory with the config hash, seed and package version, and
identical (config, seed) pairs reproduce identical output bytes.

Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, dict_fingerprint, load_run_config, load_synth_config
from .detectors import (FnnDetector, LstmDetector, Predictions, ensemble_or,
                        load_checkpoint, load_detector, save_checkpoint,
                        train_fnn, train_lstm)
from .errors import ConfigError, DataError, FlowNidsError, NumericError
from .features import FlowEncoder, spec_for_style
from .flows import (BENIGN, FlowDataset, canonical_schema, filter_hosts,
                    parse_flows, write_flows)
from .metrics import (ConfusionMatrix, EvalReport, confusion, delta_report,
                      f1, read_counts_csv, render_delta, render_report,
                      scenario_report, write_delta_csv, write_report_csv)
from .nn.gradcheck import gradcheck_fnn, gradcheck_lstm
from .scenarios import (Interval, Scenario, ScenarioSplit, detect_intervals,
                        extract_scenarios, make_benign_scenarios,
                        merge_intervals, read_manifest_counts, split_scenario,
                        write_manifest)


def _write_stamp(out_dir: Path, command: str, config_hash: str, seed: int) -> None:
    stamp = {"command": command, "config_hash": config_hash, "seed": seed,
             "version": __version__}
    (out_dir / "stamp.json").write_text(
        json.dumps(stamp, sort_keys=True, indent=2), encoding="utf-8"
    )


def _load_datasets(config: RunConfig) -> list[FlowDataset]:
    datasets = []
    for path in config.dataset_paths:
        if not path.exists():
            raise DataError(f"dataset file {path} does not exist")
        result = parse_flows(path, config.schema)
        if result.rejections:
            print(f"{path}: rejected {len(result.rejections)} rows", file=sys.stderr)
            for line in result.rejections[:20]:
                print(f"  {line}", file=sys.stderr)
        dataset = filter_hosts(result.dataset, config.excluded_hosts)
        datasets.append(FlowDataset(dataset.records, dataset.schema_id,
                                    source_name=path.stem))
    return datasets


def _intervals_for(dataset: FlowDataset, config: RunConfig) -> list[Interval]:
    ext = config.extraction
    present = set(dataset.attack_types())
    wanted: dict[str, list | str]
    if ext.attacks == "auto" or ext.attacks is None:
        wanted = {t: "auto" for t in sorted(present)}
    else:
        wanted = {t: v for t, v in ext.attacks.items() if t in present}

    intervals: list[Interval] = []
    for attack_type, value in wanted.items():
        if value == "auto":
            intervals.extend(detect_intervals(dataset, attack_type,
                                              ext.gap_threshold, ext.padding))
        else:
            intervals.extend(Interval(a, b, attack_type) for a, b in value)
    intervals = merge_intervals(intervals)
    for a, b in zip(intervals, intervals[1:]):
        if b.start <= a.end:
            raise DataError(
                f"intervals of '{a.attack_type}' and '{b.attack_type}' overlap; "
                "adjust the documented intervals or padding"
            )
    return intervals


def cmd_extract(args) -> int:
    config = load_run_config(args.config)
    out_dir = Path(args.out)
    scen_dir = out_dir / "scenarios"
    scen_dir.mkdir(parents=True, exist_ok=True)

    splits: list[ScenarioSplit] = []
    discarded_total = 0
    notes = []
    ext = config.extraction
    for dataset in _load_datasets(config):
        prefix = f"{dataset.source_name}." if len(config.dataset_paths) > 1 else ""
        if dataset.attack_types() or ext.attacks:
            intervals = _intervals_for(dataset, config)
        else:
            intervals = []
        scenarios: list[Scenario] = []
        if intervals:
            extracted, discarded = extract_scenarios(dataset, intervals)
            scenarios.extend(extracted)
            discarded_total += discarded
        if ext.benign_count and not dataset.attack_types():
            scenarios.extend(make_benign_scenarios(dataset, ext.benign_count,
                                                   ext.benign_target_len))
        for scenario in scenarios:
            name = f"{prefix}{scenario.name}"
            scenario = Scenario(name, scenario.attack_type, scenario.records,
                                scenario.interval)
            split = split_scenario(scenario, ext.train_fraction,
                                   ext.min_malicious_train_fraction)
            splits.append(split)
            write_flows(FlowDataset(split.train, dataset.schema_id),
                        scen_dir / f"{name}.train.csv")
            write_flows(FlowDataset(split.test, dataset.schema_id),
                        scen_dir / f"{name}.test.csv")

    if not splits:
        raise DataError("extraction produced no scenarios")
    notes.append(f"padding={ext.padding}")
    notes.append(f"gap_threshold={'auto' if ext.gap_threshold is None else ext.gap_threshold}")
    write_manifest(splits, out_dir / "manifest.tsv", discarded=discarded_total,
                   notes=" ".join(notes))
    _write_stamp(out_dir, "extract", config.fingerprint(), config.seed)
    print(f"extracted {len(splits)} scenarios "
          f"({sum(len(sp.scenario.records) for sp in splits)} records, "
          f"{discarded_total} discarded) -> {out_dir}")
    return 0


def _read_splits(data_dir: Path) -> list[ScenarioSplit]:
    manifest = data_dir / "manifest.tsv"
    if not manifest.exists():
        raise DataError(f"{data_dir} has no manifest.tsv (run extract first)")
    rows = read_manifest_counts(manifest)
    labels = {row["attack_type"]: row["attack_type"]
              for row in rows if row["attack_type"] != BENIGN}
    schema = canonical_schema(malicious_labels=labels)

    splits = []
    for row in rows:
        name = row["name"]
        train = parse_flows(data_dir / "scenarios" / f"{name}.train.csv", schema)
        test = parse_flows(data_dir / "scenarios" / f"{name}.test.csv", schema)
        records = train.dataset.records + test.dataset.records
        interval = Interval(row["interval_start"], row["interval_end"],
                            row["attack_type"])
        scenario = Scenario(name, row["attack_type"], records, interval)
        n = len(records)
        splits.append(ScenarioSplit(
            scenario=scenario, train=train.dataset.records,
            test=test.dataset.records,
            train_fraction_used=len(train.dataset.records) / n if n else 0.0,
        ))
    return splits


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    model_cfg = config.fnn if args.model == "fnn" else config.lstm
    train_cfg = model_cfg.train
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=int(args.seed))
    splits = _read_splits(Path(args.data))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_records = [r for sp in splits for r in sp.train]
    encoder = FlowEncoder(spec_for_style(config.style, config.port_top_k))
    encoder.fit(train_records)
    encoder.save(out_dir / "encoder.json")

    if args.model == "fnn":
        detector = train_fnn(splits, encoder, train_cfg, hidden=model_cfg.hidden)
        curve_rows = [(i + 1, "all", loss)
                      for i, loss in enumerate(detector.loss_curve_)]
    else:
        detector = train_lstm(splits, encoder, train_cfg, hidden=model_cfg.hidden)
        names = [sp.scenario.name for sp in splits if len(sp.train)]
        curve_rows = [(epoch, names[idx], loss)
                      for epoch, idx, loss in detector.loss_curve_]

    ckpt_path = out_dir / f"{args.model}.ckpt"
    save_checkpoint(ckpt_path, detector, encoder_hash=encoder.fingerprint())
    with open(out_dir / f"loss_{args.model}.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,scenario,mean_loss\n")
        for epoch, scope, loss in curve_rows:
            fh.write(f"{epoch},{scope},{loss!r}\n")
    _write_stamp(out_dir, f"train-{args.model}", config.fingerprint(),
                 detector.seed)
    print(f"trained {args.model} -> {ckpt_path}")
    return 0


def _predictions_for(detector, splits, encoder, warmup: int) -> dict[str, Predictions]:
    per_scenario = {}
    for sp in splits:
        if not sp.test:
            continue
        X = encoder.transform(sp.test)
        if isinstance(detector, LstmDetector):
            warm = encoder.transform(sp.train[-warmup:]) if warmup and sp.train else None
            per_scenario[sp.scenario.name] = detector.predictions(X, warmup=warm)
        else:
            per_scenario[sp.scenario.name] = detector.predictions(X)
    return per_scenario


def _write_predictions(path: Path, splits, per_scenario: dict[str, Predictions]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("scenario,index,timestamp,true_label,predicted_label,malicious_prob\n")
        for sp in splits:
            preds = per_scenario.get(sp.scenario.name)
            if preds is None:
                continue
            for i, record in enumerate(sp.test):
                fh.write(f"{sp.scenario.name},{i},{record.timestamp!r},"
                         f"{record.label},"
                         f"{'malicious' if preds.labels[i] else 'benign'},"
                         f"{preds.malicious_prob[i]!r}\n")


def _report_from_predictions(splits, per_scenario) -> EvalReport:
    rows = []
    for sp in splits:
        preds = per_scenario.get(sp.scenario.name)
        if preds is None:
            continue
        truth = np.array([1 if r.is_malicious else 0 for r in sp.test])
        rows.append((sp.scenario.name, confusion(preds.labels, truth)))
    return scenario_report(rows)


def _load_eval_inputs(args, config):
    splits = _read_splits(Path(args.data))
    encoder_path = Path(args.encoder) if args.encoder else None
    detectors = []
    for ckpt_path in args.checkpoint:
        ckpt = load_checkpoint(ckpt_path)
        e_path = encoder_path or Path(ckpt_path).parent / "encoder.json"
        if not e_path.exists():
            raise DataError(f"no encoder at {e_path}; pass --encoder")
        encoder = FlowEncoder.load(e_path)
        if ckpt.encoder_hash and ckpt.encoder_hash != encoder.fingerprint():
            raise DataError(
                f"checkpoint {ckpt_path} was trained with a different encoder "
                f"({ckpt.encoder_hash} != {encoder.fingerprint()})"
            )
        detectors.append((ckpt.kind, load_detector(ckpt_path), encoder))
    return splits, detectors


def cmd_eval(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.from_counts:
        rows = read_counts_csv(args.from_counts)
        report = scenario_report(rows)
        write_report_csv(report, out_dir / "report_counts.csv")
        (out_dir / "report_counts.txt").write_text(render_report(report),
                                                   encoding="utf-8")
        print(render_report(report), end="")
        _write_stamp(out_dir, "eval-counts",
                     dict_fingerprint({"counts": Path(args.from_counts).name}), 0)
        return 0

    if not args.config or not args.data or not args.checkpoint:
        raise ConfigError("eval needs --config, --data and --checkpoint "
                          "(or --from-counts)")
    config = load_run_config(args.config)
    splits, detectors = _load_eval_inputs(args, config)
    for kind, detector, encoder in detectors:
        per_scenario = _predictions_for(detector, splits, encoder, config.warmup)
        _write_predictions(out_dir / f"predictions_{kind}.csv", splits, per_scenario)
        report = _report_from_predictions(splits, per_scenario)
        write_report_csv(report, out_dir / f"report_{kind}.csv")
        (out_dir / f"report_{kind}.txt").write_text(render_report(report),
                                                    encoding="utf-8")
        print(f"== {kind} ==")
        print(render_report(report), end="")
    _write_stamp(out_dir, "eval", config.fingerprint(), config.seed)
    return 0


def cmd_ensemble(args) -> int:
    config = load_run_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    args.checkpoint = [args.fnn, args.lstm]
    splits, detectors = _load_eval_inputs(args, config)
    kinds = [kind for kind, _, _ in detectors]
    if kinds != ["fnn", "lstm"]:
        raise DataError(f"expected an fnn and an lstm checkpoint, got {kinds}")

    (_, fnn_detector, fnn_encoder), (_, lstm_detector, lstm_encoder) = detectors
    fnn_preds = _predictions_for(fnn_detector, splits, fnn_encoder, config.warmup)
    lstm_preds = _predictions_for(lstm_detector, splits, lstm_encoder, config.warmup)
    combined = {name: ensemble_or(fnn_preds[name], lstm_preds[name])
                for name in fnn_preds}

    _write_predictions(out_dir / "predictions_ensemble.csv", splits, combined)
    ens_report = _report_from_predictions(splits, combined)
    lstm_report = _report_from_predictions(splits, lstm_preds)
    rows = delta_report(ens_report, lstm_report)
    write_report_csv(ens_report, out_dir / "report_ensemble.csv")
    write_delta_csv(rows, out_dir / "delta_vs_lstm.csv")
    (out_dir / "delta_vs_lstm.txt").write_text(render_delta(rows), encoding="utf-8")
    print(render_delta(rows), end="")
    _write_stamp(out_dir, "ensemble", config.fingerprint(), config.seed)
    return 0


def cmd_synth(args) -> int:
    config = load_synth_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    from .synth import generate
    dataset, truth = generate(config)
    write_flows(dataset, out_dir / "flows.csv")
    with open(out_dir / "intervals.csv", "w", encoding="utf-8") as fh:
        fh.write("start,end,attack_type\n")
        for iv in truth:
            fh.write(f"{iv.start!r},{iv.end!r},{iv.attack_type}\n")
    _write_stamp(out_dir, "synth", dict_fingerprint(dataclasses.asdict(config)),
                 config.seed)
    n_mal = sum(1 for r in dataset.records if r.is_malicious)
    print(f"generated {len(dataset)} records ({n_mal} malicious, "
          f"{len(truth)} ground-truth intervals) -> {out_dir}")
    return 0


def cmd_gradcheck(args) -> int:
    tolerance = args.tolerance
    worst = 0.0
    for seed in range(args.seeds):
        err_fnn = gradcheck_fnn(seed=seed)
        err_lstm = gradcheck_lstm(seed=seed)
        worst = max(worst, err_fnn, err_lstm)
        print(f"seed {seed}: fnn max rel err {err_fnn:.3e}, "
              f"lstm max rel err {err_lstm:.3e}")
    if worst >= tolerance:
        raise NumericError(
            f"gradient check failed: max relative error {worst:.3e} "
            f">= {tolerance:.0e}"
        )
    print(f"gradient check passed (worst {worst:.3e} < {tolerance:.0e})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flownids",
        description="Temporal NetFlow intrusion detection pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="build attack scenarios from a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="generate a synthetic labelled dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a detector on extracted scenarios")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="extract output directory")
    p.add_argument("--model", required=True, choices=("fnn", "lstm"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints (or replay counts)")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--checkpoint", action="append", default=[])
    p.add_argument("--encoder")
    p.add_argument("--from-counts", dest="from_counts",
                   help="CSV of scenario,tp,fn,tn,fp rows to score directly")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble", help="logical-OR two checkpoints, delta vs lstm")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--fnn", required=True)
    p.add_argument("--lstm", required=True)
    p.add_argument("--encoder")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("gradcheck", help="verify backward passes numerically")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except FlowNidsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
