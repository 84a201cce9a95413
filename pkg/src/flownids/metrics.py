"""Confusion matrices, F1 scores and per-scenario report tables.

Malicious is the positive class. F1 is reported as a percentage with three
decimals; summary rows are computed from summed counts, never by averaging
per-scenario scores. The ensemble delta report compares a combined
detector against a stand-alone baseline per scenario.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    tn: int
    fp: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.tn, self.fp) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fn + other.fn,
                               self.tn + other.tn, self.fp + other.fp)

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    @property
    def n_malicious(self) -> int:
        return self.tp + self.fn

    @property
    def n_benign(self) -> int:
        return self.tn + self.fp


def confusion(predicted: Sequence[int] | np.ndarray,
              actual: Sequence[int] | np.ndarray) -> ConfusionMatrix:
    """Count the four outcome cells for 0/1 (benign/malicious) labels."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise DataError(
            f"prediction/label length mismatch: {predicted.shape} vs {actual.shape}"
        )
    pred_mal = predicted == 1
    act_mal = actual == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred_mal & act_mal)),
        fn=int(np.sum(~pred_mal & act_mal)),
        tn=int(np.sum(~pred_mal & ~act_mal)),
        fp=int(np.sum(pred_mal & ~act_mal)),
    )


def f1(cm: ConfusionMatrix) -> float | None:
    """F1 in percent: 100 * 2tp / (2tp + fp + fn); None when undefined."""
    denom = 2 * cm.tp + cm.fp + cm.fn
    if denom == 0:
        return None
    return 100.0 * 2 * cm.tp / denom


def format_f1(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


@dataclass(frozen=True)
class EvalReport:
    """Per-scenario confusion rows plus a summed summary row."""

    rows: tuple[tuple[str, ConfusionMatrix], ...]
    summary: ConfusionMatrix

    def scenario_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.rows)


def scenario_report(rows: Sequence[tuple[str, ConfusionMatrix]]) -> EvalReport:
    """Assemble a report; the summary is the element-wise sum of the rows."""
    if not rows:
        raise DataError("report needs at least one scenario")
    summary = ConfusionMatrix(0, 0, 0, 0)
    for _, cm in rows:
        summary = summary + cm
    return EvalReport(tuple(rows), summary)


SUMMARY_NAME = "Summary"


def render_report(report: EvalReport) -> str:
    """Aligned plain-text table: scenario, F1, tp, fn, tn, fp."""
    lines = [("Scenario", "F1-score %", "tp", "fn", "tn", "fp")]
    for name, cm in report.rows + ((SUMMARY_NAME, report.summary),):
        lines.append((name, format_f1(f1(cm)), str(cm.tp), str(cm.fn),
                      str(cm.tn), str(cm.fp)))
    widths = [max(len(row[i]) for row in lines) for i in range(6)]
    rendered = []
    for row in lines:
        rendered.append("  ".join(cell.rjust(widths[i]) if i else cell.ljust(widths[i])
                                  for i, cell in enumerate(row)))
    return "\n".join(rendered) + "\n"


def write_report_csv(report: EvalReport, target: str | Path | TextIO) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as handle:
            write_report_csv(report, handle)
            return
    writer = csv.writer(target)
    writer.writerow(["scenario", "f1_percent", "tp", "fn", "tn", "fp"])
    for name, cm in report.rows + ((SUMMARY_NAME, report.summary),):
        writer.writerow([name, format_f1(f1(cm)), cm.tp, cm.fn, cm.tn, cm.fp])


def read_counts_csv(source: str | Path) -> list[tuple[str, ConfusionMatrix]]:
    """Read (scenario, tp, fn, tn, fp) rows, e.g. published reference counts."""
    rows = []
    with open(source, newline="", encoding="utf-8") as handle:
        for record in csv.DictReader(handle):
            rows.append((record["scenario"], ConfusionMatrix(
                tp=int(record["tp"]), fn=int(record["fn"]),
                tn=int(record["tn"]), fp=int(record["fp"]),
            )))
    return rows


@dataclass(frozen=True)
class DeltaRow:
    scenario: str
    f1_percent: float | None
    fn: int
    fp: int
    delta_fn: int
    delta_fp: int


def delta_report(ensemble: EvalReport, baseline: EvalReport) -> list[DeltaRow]:
    """Per-scenario deltas of an ensemble against a stand-alone baseline.

    delta_fn/fp = ensemble - baseline, so negative means the ensemble is
    better. The summary row is included last. Scenario sets must match in
    order.
    """
    if ensemble.scenario_names() != baseline.scenario_names():
        raise DataError("ensemble and baseline reports cover different scenarios")
    rows = []
    pairs = list(zip(ensemble.rows, baseline.rows))
    pairs.append(((SUMMARY_NAME, ensemble.summary), (SUMMARY_NAME, baseline.summary)))
    for (name, ens), (_, base) in pairs:
        rows.append(DeltaRow(
            scenario=name,
            f1_percent=f1(ens),
            fn=ens.fn,
            fp=ens.fp,
            delta_fn=ens.fn - base.fn,
            delta_fp=ens.fp - base.fp,
        ))
    return rows


def render_delta(rows: Sequence[DeltaRow]) -> str:
    lines = [("Scenario", "F1-score %", "fn", "fp", "±fn", "±fp")]
    for r in rows:
        lines.append((r.scenario, format_f1(r.f1_percent), str(r.fn), str(r.fp),
                      f"{r.delta_fn:+d}", f"{r.delta_fp:+d}"))
    widths = [max(len(row[i]) for row in lines) for i in range(6)]
    rendered = []
    for row in lines:
        rendered.append("  ".join(cell.rjust(widths[i]) if i else cell.ljust(widths[i])
                                  for i, cell in enumerate(row)))
    return "\n".join(rendered) + "\n"


def write_delta_csv(rows: Sequence[DeltaRow], target: str | Path | TextIO) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as handle:
            write_delta_csv(rows, handle)
            return
    writer = csv.writer(target)
    writer.writerow(["scenario", "f1_percent", "fn", "fp", "delta_fn", "delta_fp"])
    for r in rows:
        writer.writerow([r.scenario, format_f1(r.f1_percent), r.fn, r.fp,
                         r.delta_fn, r.delta_fp])
