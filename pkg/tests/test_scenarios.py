import math

import numpy as np
import pytest

from flownids.errors import DataError, ScenarioError
from flownids.flows import BENIGN, FlowDataset
from flownids.scenarios import (Interval, Scenario, beacon_period,
                                detect_intervals, extract_scenarios,
                                make_benign_scenarios, merge_intervals,
                                split_scenario)

from conftest import make_record, random_dataset

# the worked botnet example: 19 flows at offsets 0..18, malicious at
# offsets 5, 6, 9, 12, 14
BOTNET_OFFSETS = (5, 6, 9, 12, 14)


def botnet_window_dataset(t0=100.0):
    records = [
        make_record(t0 + i, attack_type="botnet" if i in BOTNET_OFFSETS else None)
        for i in range(19)
    ]
    return FlowDataset(tuple(records))


def oracle_gap_scan(timestamps, gap_threshold):
    """Brute-force interval clustering for comparison."""
    intervals = []
    start = prev = timestamps[0]
    for t in timestamps[1:]:
        if t - prev > gap_threshold:
            intervals.append((start, prev))
            start = t
        prev = t
    intervals.append((start, prev))
    return intervals


class TestDetectIntervals:
    def test_single_record_degenerate_interval(self):
        dataset = FlowDataset((make_record(100.0, attack_type="botnet"),))
        (iv,) = detect_intervals(dataset, "botnet", padding=0.0)
        assert (iv.start, iv.end) == (100.0, 100.0)

    def test_botnet_window_single_interval(self):
        dataset = botnet_window_dataset()
        (iv,) = detect_intervals(dataset, "botnet", gap_threshold=3.0, padding=0.0)
        assert (iv.start, iv.end) == (105.0, 114.0)

    def test_two_clusters(self):
        records = [make_record(float(t), attack_type="botnet")
                   for t in (0, 1, 2, 100, 101)]
        dataset = FlowDataset(tuple(records))
        intervals = detect_intervals(dataset, "botnet", gap_threshold=10.0)
        assert [(iv.start, iv.end) for iv in intervals] == [(0.0, 2.0), (100.0, 101.0)]

    def test_against_gap_scan_oracle(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            ts = np.sort(rng.random(40) * 500.0)
            records = tuple(make_record(float(t), attack_type="scan") for t in ts)
            dataset = FlowDataset(records)
            threshold = float(rng.random() * 30 + 1)
            expected = oracle_gap_scan(list(ts), threshold)
            got = detect_intervals(dataset, "scan", gap_threshold=threshold)
            assert [(iv.start, iv.end) for iv in got] == expected

    def test_padding_clamped_to_dataset_bounds(self):
        dataset = botnet_window_dataset()
        (iv,) = detect_intervals(dataset, "botnet", gap_threshold=10.0, padding=50.0)
        assert (iv.start, iv.end) == (100.0, 118.0)

    def test_padding_merges_overlaps(self):
        records = [make_record(float(t), attack_type="botnet")
                   for t in (0, 1, 2, 100, 101)]
        records.append(make_record(200.0))
        records.sort(key=lambda r: r.timestamp)
        dataset = FlowDataset(tuple(records))
        intervals = detect_intervals(dataset, "botnet", gap_threshold=10.0,
                                     padding=60.0)
        assert len(intervals) == 1
        assert intervals[0].start == 0.0 and intervals[0].end == 161.0

    def test_absent_type_is_error(self):
        dataset = botnet_window_dataset()
        with pytest.raises(DataError, match="no malicious records"):
            detect_intervals(dataset, "ransomware")

    def test_covers_every_malicious_timestamp(self):
        for seed in range(5):
            dataset = random_dataset(np.random.default_rng(seed), 60,
                                     malicious_fraction=0.3)
            intervals = detect_intervals(dataset, "botnet")
            for r in dataset.records:
                if r.is_malicious:
                    assert any(iv.contains(r.timestamp) for iv in intervals)


def oracle_autocorr_period(timestamps, bin_width, max_lag):
    """Direct binned-autocorrelation computation, written independently."""
    ts = sorted(timestamps)
    n_bins = int((ts[-1] - ts[0]) / bin_width) + 1
    x = np.zeros(n_bins)
    for t in ts:
        x[min(int((t - ts[0]) / bin_width), n_bins - 1)] += 1.0
    mu = x.mean()
    denominator = np.sum((x - mu) ** 2)
    lags = range(1, min(max_lag, n_bins - 2) + 1)
    values = []
    for lag in lags:
        total = 0.0
        for i in range(n_bins - lag):
            total += (x[i] - mu) * (x[i + lag] - mu)
        values.append(total / denominator)
    values = np.array(values)
    best = int(np.argmax(values))
    rest = np.delete(values, best)
    if values[best] < rest.mean() + 3 * rest.std():
        return None
    return (best + 1) * bin_width


class TestBeaconPeriod:
    def test_period_ten(self):
        ts = [0.0, 10.0, 20.0, 30.0, 40.0]
        assert beacon_period(ts, 1.0, 20) == 10.0
        assert oracle_autocorr_period(ts, 1.0, 20) == 10.0

    def test_period_seven(self):
        ts = [0.0, 7.0, 14.0, 21.0, 28.0, 35.0]
        assert beacon_period(ts, 1.0, 20) == 7.0
        assert oracle_autocorr_period(ts, 1.0, 20) == 7.0

    def test_matches_oracle_on_jittered_periodic_events(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            ts = [30.0 * k + float(rng.random() * 2) for k in range(25)]
            assert beacon_period(ts, 1.0, 50) == oracle_autocorr_period(ts, 1.0, 50)

    def test_too_few_events_is_none(self):
        assert beacon_period([0.0, 10.0, 20.0], 1.0, 20) is None

    def test_invalid_bin_width(self):
        with pytest.raises(ValueError):
            beacon_period([0.0, 1.0, 2.0, 3.0], 0.0, 10)

    def test_constant_series_is_none(self):
        # every bin occupied equally: no variance, no evidence
        assert beacon_period([0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 1.0, 4) is None

    def test_random_timestamps_mostly_none(self):
        nones = 0
        trials = 40
        for seed in range(trials):
            rng = np.random.default_rng(seed)
            ts = np.sort(rng.random(50) * 1000.0)
            if beacon_period(list(ts), 1.0, 20) is None:
                nones += 1
        assert nones >= 0.95 * trials


class TestExtractScenarios:
    def test_botnet_window_extraction(self):
        dataset = botnet_window_dataset()
        scenarios, discarded = extract_scenarios(
            dataset, [Interval(105.0, 114.0, "botnet")]
        )
        (scenario,) = scenarios
        assert len(scenario) == 10
        assert scenario.n_malicious == 5
        assert scenario.n_benign == 5
        assert discarded == 9
        mal_ts = [r.timestamp for r in scenario.records if r.is_malicious]
        assert mal_ts == [105.0, 106.0, 109.0, 112.0, 114.0]

    def test_empty_interval_gives_empty_scenario(self, caplog):
        dataset = botnet_window_dataset()
        scenarios, discarded = extract_scenarios(
            dataset, [Interval(50.0, 60.0, "botnet")]
        )
        assert len(scenarios[0]) == 0
        assert discarded == 19

    def test_overlapping_intervals_rejected(self):
        dataset = botnet_window_dataset()
        with pytest.raises(ScenarioError, match="overlap"):
            extract_scenarios(dataset, [Interval(100, 110, "botnet"),
                                        Interval(105, 120, "botnet")])

    def test_conservation_on_random_data(self):
        # oracle: every record is in exactly one scenario or discarded
        for seed in range(10):
            rng = np.random.default_rng(seed)
            dataset = random_dataset(rng, 100, attack_type="botnet")
            cuts = np.sort(rng.random(6) * 1000.0)
            intervals = [Interval(cuts[i], cuts[i + 1] - 1e-9, "botnet")
                         for i in range(0, 6, 2)]
            scenarios, discarded = extract_scenarios(dataset, intervals)
            assert sum(len(s) for s in scenarios) + discarded == len(dataset)

    def test_idempotence(self):
        dataset = botnet_window_dataset()
        scenarios, _ = extract_scenarios(dataset, [Interval(105.0, 114.0, "botnet")])
        scenario = scenarios[0]
        again, discarded = extract_scenarios(
            FlowDataset(scenario.records), [scenario.interval]
        )
        assert again[0].records == scenario.records
        assert discarded == 0

    def test_foreign_malicious_record_rejected(self):
        records = (make_record(1.0, attack_type="botnet"),
                   make_record(2.0, attack_type="ddos"))
        dataset = FlowDataset(records)
        with pytest.raises(ScenarioError, match="foreign"):
            extract_scenarios(dataset, [Interval(0.0, 10.0, "botnet")])


class TestMakeBenignScenarios:
    def test_even_split(self):
        records = tuple(make_record(float(i)) for i in range(100))
        scenarios = make_benign_scenarios(FlowDataset(records), 2, target_len=50)
        assert [len(s) for s in scenarios] == [50, 50]

    def test_remainder_goes_to_earlier(self):
        records = tuple(make_record(float(i)) for i in range(101))
        scenarios = make_benign_scenarios(FlowDataset(records), 2)
        assert [len(s) for s in scenarios] == [51, 50]

    def test_zero_malicious_in_each(self):
        records = tuple(make_record(float(i)) for i in range(40))
        scenarios = make_benign_scenarios(FlowDataset(records), 2)
        assert all(s.n_malicious == 0 for s in scenarios)
        assert all(s.attack_type == BENIGN for s in scenarios)

    def test_malicious_span_rejected(self):
        records = (make_record(0.0), make_record(1.0, attack_type="botnet"))
        with pytest.raises(ScenarioError):
            make_benign_scenarios(FlowDataset(records), 1)

    def test_too_few_records_warns_and_shrinks(self, caplog):
        records = (make_record(0.0),)
        scenarios = make_benign_scenarios(FlowDataset(records), 3)
        assert len(scenarios) == 1


def oracle_smallest_prefix(records, train_fraction, min_frac):
    """Smallest prefix >= the base fraction holding the malicious quota."""
    n = len(records)
    base = math.ceil(train_fraction * n)
    n_mal = sum(1 for r in records if r.is_malicious)
    if n_mal == 0:
        return base
    need = math.ceil(min_frac * n_mal)
    for k in range(base, n + 1):
        if sum(1 for r in records[:k] if r.is_malicious) >= need:
            return k if k < n else base
    return base


def scenario_of(records):
    iv = Interval(records[0].timestamp, records[-1].timestamp,
                  records[0].attack_type or next(
                      (r.attack_type for r in records if r.is_malicious), BENIGN))
    attack = next((r.attack_type for r in records if r.is_malicious), BENIGN)
    return Scenario("s", attack, tuple(records), Interval(
        records[0].timestamp, records[-1].timestamp, attack))


class TestSplitScenario:
    def test_even_malicious_split(self):
        records = [make_record(float(i), attack_type="botnet" if i % 3 == 0 else None)
                   for i in range(10)]
        split = split_scenario(scenario_of(records))
        assert len(split.train) == 7 and len(split.test) == 3

    def test_prefix_extended_for_malicious_quota(self):
        # 10 records, 4 malicious packed at the end: quota of
        # ceil(0.7 * 4) = 3 forces the boundary past the 9th record
        records = [make_record(float(i),
                               attack_type="botnet" if i >= 6 else None)
                   for i in range(10)]
        split = split_scenario(scenario_of(records))
        expected = oracle_smallest_prefix(records, 0.7, 0.7)
        assert len(split.train) == expected == 9

    def test_matches_smallest_prefix_oracle(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(5, 60))
            records = [make_record(float(i),
                                   attack_type="x" if rng.random() < 0.3 else None)
                       for i in range(n)]
            split = split_scenario(scenario_of(records))
            assert len(split.train) == oracle_smallest_prefix(records, 0.7, 0.7)

    def test_benign_only_is_plain_fraction(self):
        records = [make_record(float(i)) for i in range(100)]
        split = split_scenario(scenario_of(records))
        assert len(split.train) == 70 and len(split.test) == 30

    def test_boundary_never_splits_equal_timestamps(self):
        ts = [0, 1, 2, 3, 4, 5, 6, 6, 6, 9]
        records = [make_record(float(t)) for t in ts]
        split = split_scenario(scenario_of(records))
        # plain prefix would cut at 7, inside the run of 6s: moves to 9
        assert len(split.train) == 9
        assert split.train[-1].timestamp <= split.test[0].timestamp

    def test_all_malicious_tail_falls_back(self, caplog):
        # quota satisfiable only with an empty test set -> plain prefix
        records = [make_record(float(i),
                               attack_type="x" if i == 9 else None)
                   for i in range(10)]
        split = split_scenario(scenario_of(records))
        assert len(split.train) == 7
        assert len(split.test) == 3

    def test_temporal_purity(self):
        for seed in range(10):
            dataset = random_dataset(np.random.default_rng(seed), 50)
            split = split_scenario(scenario_of(list(dataset.records)))
            if split.train and split.test:
                assert max(r.timestamp for r in split.train) <= \
                    min(r.timestamp for r in split.test)

    def test_empty_scenario_rejected(self):
        with pytest.raises(ScenarioError):
            split_scenario(Scenario("s", BENIGN, (), Interval(0, 1, BENIGN)))


class TestMergeIntervals:
    def test_merge_same_type(self):
        merged = merge_intervals([Interval(0, 5, "a"), Interval(3, 8, "a")])
        assert [(iv.start, iv.end) for iv in merged] == [(0, 8)]

    def test_disjoint_kept_sorted(self):
        merged = merge_intervals([Interval(10, 12, "a"), Interval(0, 5, "a")])
        assert [(iv.start, iv.end) for iv in merged] == [(0, 5), (10, 12)]
