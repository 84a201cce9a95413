"""Attack scenario extraction from labelled flow datasets.

An attack scenario is the time-ordered slice of a dataset falling inside
one attack's activity interval: its malicious flows plus every co-occurring
benign flow. Flows outside all intervals are discarded (and counted).
Scenarios are split into a temporal train prefix and test suffix.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import DataError, ScenarioError
from .flows import BENIGN, FlowDataset, FlowRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Interval:
    """Closed time interval attributed to one attack type (or benign)."""

    start: float
    end: float
    attack_type: str = BENIGN

    def __post_init__(self):
        if self.start > self.end:
            raise ScenarioError(f"interval start {self.start} after end {self.end}")

    def contains(self, timestamp: float) -> bool:
        return self.start <= timestamp <= self.end


@dataclass(frozen=True)
class Scenario:
    """Time-ordered record slice for one attack interval.

    Malicious records must all carry the scenario's attack type; benign
    records of any origin are allowed.
    """

    name: str
    attack_type: str
    records: tuple[FlowRecord, ...]
    interval: Interval

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for earlier, later in zip(self.records, self.records[1:]):
            if earlier.timestamp > later.timestamp:
                raise ScenarioError(f"scenario {self.name}: records out of order")
        for r in self.records:
            if not self.interval.contains(r.timestamp):
                raise ScenarioError(
                    f"scenario {self.name}: record at {r.timestamp} outside interval"
                )
            if r.is_malicious and r.attack_type != self.attack_type:
                raise ScenarioError(
                    f"scenario {self.name}: foreign malicious record "
                    f"'{r.attack_type}' inside a '{self.attack_type}' interval"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_malicious(self) -> int:
        return sum(1 for r in self.records if r.is_malicious)

    @property
    def n_benign(self) -> int:
        return len(self.records) - self.n_malicious


@dataclass(frozen=True)
class ScenarioSplit:
    """Temporal prefix/suffix partition of one scenario's records."""

    scenario: Scenario
    train: tuple[FlowRecord, ...]
    test: tuple[FlowRecord, ...]
    train_fraction_used: float

    def __post_init__(self):
        if self.train and self.test:
            if self.train[-1].timestamp > self.test[0].timestamp:
                raise ScenarioError("train records extend past test records")


# ---------------------------------------------------------------------------
# Interval identification
# ---------------------------------------------------------------------------

def default_gap_threshold(malicious_ts: Sequence[float]) -> float:
    """10x the median inter-flow gap; keeps single campaigns in one piece."""
    gaps = [b - a for a, b in zip(malicious_ts, malicious_ts[1:])]
    if not gaps:
        return math.inf
    return 10.0 * statistics.median(gaps)


def detect_intervals(dataset: FlowDataset, attack_type: str,
                     gap_threshold: float | None = None,
                     padding: float = 0.0) -> list[Interval]:
    """Locate the activity intervals of one attack type.

    Malicious timestamps separated by more than ``gap_threshold`` start a
    new interval (default threshold: 10x the median gap). Each interval is
    widened by ``padding`` on both sides, clamped to the dataset's time
    span; overlaps created by padding are merged. Intervals are closed, so
    boundary records belong to the interval.
    """
    mal_ts = [r.timestamp for r in dataset.records if r.attack_type == attack_type]
    if not mal_ts:
        raise DataError(f"no malicious records for type '{attack_type}'")
    if gap_threshold is None:
        gap_threshold = default_gap_threshold(mal_ts)

    clusters: list[list[float]] = [[mal_ts[0]]]
    for prev, ts in zip(mal_ts, mal_ts[1:]):
        if ts - prev > gap_threshold:
            clusters.append([ts])
        else:
            clusters[-1].append(ts)

    lo = dataset.records[0].timestamp
    hi = dataset.records[-1].timestamp
    intervals = [
        Interval(max(c[0] - padding, lo), min(c[-1] + padding, hi), attack_type)
        for c in clusters
    ]
    return merge_intervals(intervals)


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Sort intervals and merge overlapping ones of the same attack type."""
    ordered = sorted(intervals, key=lambda iv: (iv.start, iv.end))
    merged: list[Interval] = []
    for iv in ordered:
        if merged and iv.start <= merged[-1].end and iv.attack_type == merged[-1].attack_type:
            merged[-1] = Interval(merged[-1].start, max(merged[-1].end, iv.end), iv.attack_type)
        else:
            merged.append(iv)
    return merged


def beacon_period(timestamps: Sequence[float], bin_width: float,
                  max_lag: int) -> float | None:
    """Recover a periodic spacing from event times, if one stands out.

    Event counts are binned at ``bin_width``; the autocorrelation of the
    binned series is scanned over lags ``1..max_lag``. The strongest peak
    is reported (as ``lag * bin_width``) only when it exceeds the mean plus
    three standard deviations of the remaining lags' autocorrelations.
    Fewer than 4 events is insufficient evidence and yields ``None``.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    ts = sorted(timestamps)
    if len(ts) < 4:
        return None

    t0 = ts[0]
    n_bins = int((ts[-1] - t0) / bin_width) + 1
    counts = np.zeros(n_bins)
    for t in ts:
        counts[min(int((t - t0) / bin_width), n_bins - 1)] += 1

    usable = min(max_lag, n_bins - 2)
    if usable < 2:
        return None
    centered = counts - counts.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return None
    autocorr = np.array(
        [float(centered[:-lag] @ centered[lag:]) / denom for lag in range(1, usable + 1)]
    )

    peak_idx = int(np.argmax(autocorr))
    others = np.delete(autocorr, peak_idx)
    threshold = others.mean() + 3.0 * others.std()
    if autocorr[peak_idx] < threshold:
        return None
    return (peak_idx + 1) * bin_width


# ---------------------------------------------------------------------------
# Scenario construction
# ---------------------------------------------------------------------------

def extract_scenarios(dataset: FlowDataset,
                      intervals: Sequence[Interval]) -> tuple[list[Scenario], int]:
    """Slice the dataset into one scenario per interval.

    Every record inside an interval (closed bounds) lands in that
    interval's scenario; everything else is discarded. Returns the
    scenarios and the discard count. Intervals must be disjoint and sorted.
    """
    for a, b in zip(intervals, intervals[1:]):
        if b.start <= a.end:
            raise ScenarioError(
                f"overlapping intervals [{a.start}, {a.end}] and "
                f"[{b.start}, {b.end}]: merge before extraction"
            )

    counters: dict[str, int] = {}
    scenarios: list[Scenario] = []
    buckets: list[list[FlowRecord]] = [[] for _ in intervals]
    discarded = 0
    idx = 0
    for r in dataset.records:
        while idx < len(intervals) and r.timestamp > intervals[idx].end:
            idx += 1
        if idx < len(intervals) and intervals[idx].contains(r.timestamp):
            buckets[idx].append(r)
        else:
            discarded += 1

    for iv, bucket in zip(intervals, buckets):
        n = counters.get(iv.attack_type, 0) + 1
        counters[iv.attack_type] = n
        name = f"{iv.attack_type}-{n}"
        if not bucket:
            log.warning("interval [%s, %s] of %s contains no records",
                        iv.start, iv.end, iv.attack_type)
        scenarios.append(Scenario(name, iv.attack_type, tuple(bucket), iv))
    return scenarios, discarded


def make_benign_scenarios(dataset: FlowDataset, count: int,
                          target_len: int | None = None) -> list[Scenario]:
    """Cut a benign-only dataset into contiguous benign scenarios.

    Earlier scenarios absorb the remainder when the record count does not
    divide evenly. Fewer records than ``count`` yields fewer scenarios.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    for r in dataset.records:
        if r.is_malicious:
            raise ScenarioError(
                "benign scenarios require a benign-only span "
                f"(found '{r.attack_type}' at {r.timestamp})"
            )
    n = len(dataset.records)
    if n == 0:
        log.warning("no records available for benign scenarios")
        return []
    if n < count:
        log.warning("only %d records for %d benign scenarios", n, count)
        count = n

    if target_len is not None and target_len * count <= n:
        sizes = [target_len] * count
    else:
        base, extra = divmod(n, count)
        sizes = [base + (1 if i < extra else 0) for i in range(count)]

    scenarios = []
    offset = 0
    for i, size in enumerate(sizes, start=1):
        chunk = dataset.records[offset:offset + size]
        offset += size
        iv = Interval(chunk[0].timestamp, chunk[-1].timestamp, BENIGN)
        scenarios.append(Scenario(f"{BENIGN}-{i}", BENIGN, tuple(chunk), iv))
    return scenarios


def split_scenario(scenario: Scenario, train_fraction: float = 0.7,
                   min_malicious_train_fraction: float = 0.7) -> ScenarioSplit:
    """Temporal train/test split of one scenario.

    The train set is the prefix of ``ceil(train_fraction * len)`` records,
    extended to the smallest prefix holding at least
    ``min_malicious_train_fraction`` of the scenario's malicious records.
    The boundary never separates equal timestamps (it moves later). If the
    malicious quota cannot be met without emptying the test set, the plain
    fractional prefix is used instead, with a warning.
    """
    records = scenario.records
    n = len(records)
    if n == 0:
        raise ScenarioError(f"cannot split empty scenario {scenario.name}")

    base_k = math.ceil(train_fraction * n)
    n_mal = sum(1 for r in records if r.is_malicious)
    k = base_k
    if n_mal > 0:
        need = math.ceil(min_malicious_train_fraction * n_mal)
        have = sum(1 for r in records[:k] if r.is_malicious)
        while k < n and have < need:
            if records[k].is_malicious:
                have += 1
            k += 1
        if k >= n and base_k < n:
            # quota would empty the test set; keep the plain prefix instead
            log.warning(
                "scenario %s: malicious quota consumed the whole scenario; "
                "falling back to the plain %.0f%% prefix",
                scenario.name, 100 * train_fraction,
            )
            k = base_k

    # never cut between equal timestamps
    while 0 < k < n and records[k - 1].timestamp == records[k].timestamp:
        k += 1

    return ScenarioSplit(
        scenario=scenario,
        train=records[:k],
        test=records[k:],
        train_fraction_used=k / n,
    )


# ---------------------------------------------------------------------------
# Manifest output
# ---------------------------------------------------------------------------

MANIFEST_HEADER = ("name", "attack_type", "interval_start", "interval_end",
                   "benign_train", "malicious_train", "benign_test", "malicious_test")


def write_manifest(splits: Sequence[ScenarioSplit], target: str | Path | TextIO,
                   discarded: int | None = None, notes: str = "") -> None:
    """Write a per-scenario record-count manifest as tab-separated text."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as handle:
            write_manifest(splits, handle, discarded=discarded, notes=notes)
            return

    target.write("\t".join(MANIFEST_HEADER) + "\n")
    for sp in splits:
        bt = sum(1 for r in sp.train if not r.is_malicious)
        mt = len(sp.train) - bt
        be = sum(1 for r in sp.test if not r.is_malicious)
        me = len(sp.test) - be
        iv = sp.scenario.interval
        target.write("\t".join(map(str, (
            sp.scenario.name, sp.scenario.attack_type, repr(iv.start), repr(iv.end),
            bt, mt, be, me,
        ))) + "\n")
    if discarded is not None:
        target.write(f"# discarded\t{discarded}\n")
    if notes:
        target.write(f"# notes\t{notes}\n")


def read_manifest_counts(source: str | Path) -> list[dict]:
    """Parse a manifest back into row dictionaries (counts as ints)."""
    rows = []
    with open(source, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n").split("\t")
        for line in handle:
            if line.startswith("#"):
                continue
            values = line.rstrip("\n").split("\t")
            row = dict(zip(header, values))
            for key in MANIFEST_HEADER[4:]:
                row[key] = int(row[key])
            row["interval_start"] = float(row["interval_start"])
            row["interval_end"] = float(row["interval_end"])
            rows.append(row)
    return rows
