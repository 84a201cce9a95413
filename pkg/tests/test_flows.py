import io

import numpy as np
import pytest

from flownids.errors import DataError, SchemaError
from flownids.flows import (Direction, FlowDataset, FlowRecord, FlowSchema,
                            InvalidRecord, canonical_schema, classify_direction,
                            filter_hosts, parse_flows, roundtrip_labels,
                            write_flows)

from conftest import make_record, random_dataset

SPEC_COLUMNS = {
    "timestamp": "ts", "duration": "dur", "protocol": "proto",
    "src_port": "sport", "dst_port": "dport", "direction": "dir",
    "total_packets": "pkts", "total_bytes": "bytes", "src_bytes": "sbytes",
}

SPEC_SCHEMA = FlowSchema(
    columns=SPEC_COLUMNS,
    label_column="label",
    malicious_labels={"botnet": "botnet"},
    direction_values={"out": "outbound", "in": "inbound", "both": "bidirectional"},
)

HEADER = "ts,dur,proto,sport,dport,dir,pkts,bytes,sbytes,label\n"


def parse_text(text, schema=SPEC_SCHEMA):
    return parse_flows(io.StringIO(text), schema)


class TestParseFlows:
    def test_single_row_field_mapping(self):
        result = parse_text(HEADER + "1.5,0.2,tcp,4444,80,out,10,900,500,botnet\n")
        assert not result.rejections
        (record,) = result.dataset.records
        assert record == FlowRecord(
            timestamp=1.5, duration=0.2, protocol="tcp", src_port=4444,
            dst_port=80, direction=Direction.OUTBOUND, total_packets=10,
            total_bytes=900, src_bytes=500, attack_type="botnet",
        )

    def test_benign_label(self):
        result = parse_text(HEADER + "1.0,0.1,udp,53,53,in,1,60,60,normal\n")
        assert result.dataset.records[0].attack_type is None
        assert not result.dataset.records[0].is_malicious

    def test_negative_duration_rejected_with_line_number(self):
        text = HEADER + (
            "1.0,0.1,tcp,1,2,out,1,60,60,normal\n"
            "2.0,-1,tcp,1,2,out,1,60,60,normal\n"
        )
        result = parse_text(text)
        assert len(result.dataset) == 1
        assert len(result.rejections) == 1
        assert result.rejections[0].startswith("line 3:")

    def test_unparseable_numeric_rejected(self):
        result = parse_text(HEADER + "abc,0.1,tcp,1,2,out,1,60,60,normal\n")
        assert len(result.dataset) == 0
        assert "timestamp" in result.rejections[0]

    def test_empty_input_is_empty_dataset(self):
        result = parse_text("")
        assert len(result.dataset) == 0
        assert not result.rejections

    def test_header_only_is_empty_dataset(self):
        result = parse_text(HEADER)
        assert len(result.dataset) == 0

    def test_missing_mandatory_column_is_schema_error(self):
        bad_header = HEADER.replace("ts,", "when,")
        with pytest.raises(SchemaError, match="ts"):
            parse_text(bad_header + "1,0.1,tcp,1,2,out,1,60,60,normal\n")

    def test_absent_port_token(self):
        result = parse_text(HEADER + "1.0,0.1,icmp,-,-,out,1,60,60,normal\n")
        record = result.dataset.records[0]
        assert record.src_port is None and record.dst_port is None

    def test_port_out_of_range_rejected(self):
        result = parse_text(HEADER + "1.0,0.1,tcp,70000,80,out,1,60,60,normal\n")
        assert len(result.dataset) == 0
        assert "port" in result.rejections[0]

    def test_src_bytes_exceeding_total_rejected(self):
        result = parse_text(HEADER + "1.0,0.1,tcp,1,2,out,1,60,600,normal\n")
        assert len(result.dataset) == 0

    def test_unknown_direction_token_rejected(self):
        result = parse_text(HEADER + "1.0,0.1,tcp,1,2,sideways,1,60,60,normal\n")
        assert "direction" in result.rejections[0]

    def test_sorted_by_timestamp(self):
        text = HEADER + (
            "5.0,0.1,tcp,1,2,out,1,60,60,normal\n"
            "1.0,0.1,tcp,1,2,out,1,60,60,normal\n"
            "3.0,0.1,tcp,1,2,out,1,60,60,normal\n"
        )
        result = parse_text(text)
        assert result.dataset.timestamps() == [1.0, 3.0, 5.0]

    def test_stable_sort_keeps_file_order_for_ties(self):
        text = HEADER + (
            "1.0,0.1,tcp,1,2,out,10,600,60,normal\n"
            "1.0,0.1,tcp,1,2,out,20,600,60,normal\n"
        )
        result = parse_text(text)
        assert [r.total_packets for r in result.dataset.records] == [10, 20]

    def test_parsing_is_deterministic(self):
        text = HEADER + "1.5,0.2,tcp,4444,80,out,10,900,500,botnet\n"
        assert parse_text(text).dataset == parse_text(text).dataset

    def test_direction_derived_from_hosts_when_no_column(self):
        columns = dict(SPEC_COLUMNS)
        del columns["direction"]
        columns["src_host"] = "src"
        columns["dst_host"] = "dst"
        schema = FlowSchema(
            columns=columns, label_column="label",
            malicious_labels={}, internal_hosts=frozenset({"10.0.0.*"}),
        )
        text = ("ts,dur,proto,sport,dport,src,dst,pkts,bytes,sbytes,label\n"
                "1.0,0.1,tcp,1,2,10.0.0.7,8.8.8.8,1,60,60,normal\n")
        result = parse_flows(io.StringIO(text), schema)
        assert result.dataset.records[0].direction is Direction.OUTBOUND

    def test_schema_without_direction_source_rejected(self):
        columns = dict(SPEC_COLUMNS)
        del columns["direction"]
        with pytest.raises(SchemaError, match="direction"):
            FlowSchema(columns=columns, label_column="label")

    def test_iat_required_for_cicids_style(self):
        columns = {**SPEC_COLUMNS, "iat_min": "imin", "iat_max": "imax",
                   "iat_avg": "iavg"}
        schema = FlowSchema(columns=columns, label_column="label",
                            schema_id="cicids-style",
                            direction_values={"out": "outbound"})
        text = ("ts,dur,proto,sport,dport,dir,pkts,bytes,sbytes,imin,imax,iavg,label\n"
                "1.0,0.1,tcp,1,2,out,1,60,60,0.1,0.9,0.5,normal\n"
                "2.0,0.1,tcp,1,2,out,1,60,60,,,,normal\n")
        result = parse_flows(io.StringIO(text), schema)
        assert len(result.dataset) == 1
        assert "iat" in result.rejections[0]


class TestRecordInvariants:
    def test_negative_duration(self):
        with pytest.raises(InvalidRecord):
            make_record(0.0, duration=-0.1)

    def test_iat_ordering(self):
        with pytest.raises(InvalidRecord):
            make_record(0.0, iat_min=2.0, iat_avg=1.0, iat_max=3.0)

    def test_dataset_must_be_sorted(self):
        with pytest.raises(DataError):
            FlowDataset((make_record(2.0), make_record(1.0)))


class TestRoundTrip:
    def test_serialize_then_parse_identity(self, rng):
        # oracle: equality of the full record tuples after a write/read cycle
        for seed in range(5):
            dataset = random_dataset(np.random.default_rng(seed), 60)
            buffer = io.StringIO()
            write_flows(dataset, buffer)
            buffer.seek(0)
            schema = canonical_schema(malicious_labels=roundtrip_labels(dataset))
            result = parse_flows(buffer, schema)
            assert not result.rejections
            assert result.dataset.records == dataset.records


class TestClassifyDirection:
    INTERNAL = frozenset({"10.0.0.1", "10.0.0.2"})

    def test_outbound(self):
        assert classify_direction("10.0.0.1", "8.8.8.8", self.INTERNAL) is Direction.OUTBOUND

    def test_inbound(self):
        assert classify_direction("8.8.8.8", "10.0.0.1", self.INTERNAL) is Direction.INBOUND

    def test_both_internal(self):
        assert classify_direction("10.0.0.1", "10.0.0.2", self.INTERNAL) is Direction.BIDIRECTIONAL

    def test_both_external(self):
        assert classify_direction("8.8.8.8", "9.9.9.9", self.INTERNAL) is Direction.BIDIRECTIONAL

    def test_prefix_entries(self):
        internal = frozenset({"192.168.*"})
        assert classify_direction("192.168.1.4", "8.8.8.8", internal) is Direction.OUTBOUND

    def test_empty_internal_set_rejected(self):
        with pytest.raises(ValueError):
            classify_direction("a", "b", frozenset())


class TestFilterHosts:
    def test_simple_filter(self):
        records = [make_record(float(i), src_host="H" if i < 2 else "A",
                               dst_host="B") for i in range(5)]
        dataset = FlowDataset(tuple(records))
        filtered = filter_hosts(dataset, {"H"})
        assert len(filtered) == 3

    def test_empty_exclusion_is_identity(self):
        records = [make_record(float(i)) for i in range(4)]
        dataset = FlowDataset(tuple(records))
        assert filter_hosts(dataset, set()) is dataset

    def test_count_oracle_and_order(self, rng):
        # oracle: brute-force count of records touching the excluded hosts
        for seed in range(5):
            local = np.random.default_rng(seed)
            dataset = random_dataset(local, 80)
            excluded = {f"10.0.0.{i}" for i in range(1, 8)}
            touching = sum(
                1 for r in dataset.records
                if r.src_host in excluded or r.dst_host in excluded
            )
            filtered = filter_hosts(dataset, excluded)
            assert len(filtered) == len(dataset) - touching
            survivors = [r for r in dataset.records
                         if r.src_host not in excluded and r.dst_host not in excluded]
            assert list(filtered.records) == survivors
