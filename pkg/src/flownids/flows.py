"""NetFlow record model and delimited-text ingestion.

A flow is a metadata summary of one network connection: timing, endpoints,
protocol, volume counters and a ground-truth label. Datasets are immutable,
time-ordered collections of such records, read from delimited text files
under a user-declared column mapping (`FlowSchema`).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

from .errors import DataError, SchemaError


class Direction(str, Enum):
    """Connection orientation relative to the monitored network."""

    INBOUND = "inbound"
    OUTBOUND = "outbound"
    BIDIRECTIONAL = "bidirectional"


#: Tokens understood by the canonical reader/writer.
CANONICAL_DIRECTION_TOKENS = {d.value: d.value for d in Direction}

#: Label string used for benign records in canonical files and scenarios.
BENIGN = "benign"


class InvalidRecord(DataError):
    """A field combination violates a record invariant."""


@dataclass(frozen=True)
class FlowRecord:
    """One labelled NetFlow.

    ``attack_type`` is ``None`` for benign traffic. Ports are ``None`` for
    protocols without a port concept (0 is a legal port, so absence is kept
    distinct). Inter-arrival-time statistics are optional and only required
    by cicids-style datasets.
    """

    timestamp: float
    duration: float
    protocol: str
    src_port: int | None
    dst_port: int | None
    direction: Direction
    total_packets: int
    total_bytes: int
    src_bytes: int
    src_host: str = ""
    dst_host: str = ""
    attack_type: str | None = None
    iat_min: float | None = None
    iat_max: float | None = None
    iat_avg: float | None = None

    def __post_init__(self):
        if self.duration < 0:
            raise InvalidRecord(f"negative duration {self.duration}")
        if self.total_packets < 0 or self.total_bytes < 0 or self.src_bytes < 0:
            raise InvalidRecord("negative volume counter")
        if self.src_bytes > self.total_bytes:
            raise InvalidRecord(
                f"src_bytes {self.src_bytes} exceeds total_bytes {self.total_bytes}"
            )
        for port in (self.src_port, self.dst_port):
            if port is not None and not 0 <= port <= 65535:
                raise InvalidRecord(f"port {port} out of range")
        iats = (self.iat_min, self.iat_avg, self.iat_max)
        if all(v is not None for v in iats):
            if not (self.iat_min <= self.iat_avg <= self.iat_max):
                raise InvalidRecord("inter-arrival times out of order")
        for v in iats:
            if v is not None and v < 0:
                raise InvalidRecord("negative inter-arrival time")

    @property
    def is_malicious(self) -> bool:
        return self.attack_type is not None

    @property
    def label(self) -> str:
        return self.attack_type if self.attack_type is not None else BENIGN


@dataclass(frozen=True)
class FlowDataset:
    """Time-ordered, immutable sequence of flow records."""

    records: tuple[FlowRecord, ...]
    schema_id: str = "ctu13-style"
    source_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for earlier, later in zip(self.records, self.records[1:]):
            if earlier.timestamp > later.timestamp:
                raise DataError("records not sorted by timestamp")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[FlowRecord]:
        return iter(self.records)

    def timestamps(self) -> list[float]:
        return [r.timestamp for r in self.records]

    def attack_types(self) -> list[str]:
        """Distinct malicious attack types, in order of first appearance."""
        seen: dict[str, None] = {}
        for r in self.records:
            if r.attack_type is not None:
                seen.setdefault(r.attack_type, None)
        return list(seen)


# ---------------------------------------------------------------------------
# Schema and parsing
# ---------------------------------------------------------------------------

#: Columns every schema must map. Everything else is optional.
MANDATORY_FIELDS = ("timestamp", "duration", "protocol", "total_packets", "total_bytes")

#: Optional numeric columns, parsed when mapped.
OPTIONAL_FIELDS = (
    "src_bytes",
    "src_port",
    "dst_port",
    "direction",
    "src_host",
    "dst_host",
    "iat_min",
    "iat_max",
    "iat_avg",
)

IAT_FIELDS = ("iat_min", "iat_max", "iat_avg")


@dataclass(frozen=True)
class FlowSchema:
    """Column mapping for a delimited flow file.

    ``columns`` maps FlowRecord field names to header names in the file.
    ``malicious_labels`` maps raw label strings to canonical attack types;
    any label not listed is benign. Direction comes either from a mapped
    ``direction`` column (tokens translated via ``direction_values``) or is
    derived from the hosts against ``internal_hosts`` (entries ending in
    ``*`` match as prefixes).
    """

    columns: Mapping[str, str]
    label_column: str
    malicious_labels: Mapping[str, str] = field(default_factory=dict)
    schema_id: str = "ctu13-style"
    delimiter: str = ","
    direction_values: Mapping[str, str] = field(
        default_factory=lambda: dict(CANONICAL_DIRECTION_TOKENS)
    )
    internal_hosts: frozenset[str] = frozenset()
    absent_tokens: frozenset[str] = frozenset({"", "-"})
    epoch: str = "unix"

    def __post_init__(self):
        for f_name in MANDATORY_FIELDS:
            if f_name not in self.columns:
                raise SchemaError(f"schema missing mandatory field '{f_name}'")
        unknown = set(self.columns) - set(MANDATORY_FIELDS) - set(OPTIONAL_FIELDS)
        if unknown:
            raise SchemaError(f"schema maps unknown fields: {sorted(unknown)}")
        if "direction" not in self.columns and not self.internal_hosts:
            raise SchemaError(
                "schema needs a direction column or a nonempty internal host set"
            )
        if self.schema_id not in ("ctu13-style", "cicids-style"):
            raise SchemaError(f"unknown schema_id '{self.schema_id}'")

    def requires_iat(self) -> bool:
        return self.schema_id == "cicids-style"


def canonical_schema(schema_id: str = "ctu13-style",
                     malicious_labels: Mapping[str, str] | None = None) -> FlowSchema:
    """Schema matching the files produced by :func:`write_flows`."""
    fields = list(MANDATORY_FIELDS) + list(OPTIONAL_FIELDS)
    labels = dict(malicious_labels) if malicious_labels else {}
    return FlowSchema(
        columns={f: f for f in fields},
        label_column="label",
        malicious_labels=labels,
        schema_id=schema_id,
    )


@dataclass(frozen=True)
class ParseResult:
    dataset: FlowDataset
    rejections: tuple[str, ...]


class _RowError(Exception):
    """Internal: one row failed, carry the reason."""


def _parse_float(raw: str, name: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise _RowError(f"unparseable {name} '{raw}'") from None


def _parse_count(raw: str, name: str) -> int:
    try:
        value = int(float(raw)) if "." in raw else int(raw)
    except ValueError:
        raise _RowError(f"unparseable {name} '{raw}'") from None
    if value < 0:
        raise _RowError(f"negative {name} {value}")
    return value


def parse_flows(source: str | Path | TextIO | Iterable[str],
                schema: FlowSchema) -> ParseResult:
    """Read a delimited flow file into a sorted dataset.

    Rows that fail to parse or violate record invariants are dropped and
    logged as ``"line N: reason"``; an empty input yields an empty dataset.
    A missing mandatory column raises :class:`SchemaError`. Sorting by
    timestamp is stable, so equal timestamps keep file order.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            return parse_flows(handle, schema)
    if isinstance(source, bytes):
        return parse_flows(io.StringIO(source.decode("utf-8")), schema)

    reader = csv.reader(source, delimiter=schema.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        return ParseResult(FlowDataset((), schema.schema_id), ())

    header = [h.strip() for h in header]
    index: dict[str, int] = {}
    for f_name, column in schema.columns.items():
        if column not in header:
            raise SchemaError(f"input missing column '{column}' (field '{f_name}')")
        index[f_name] = header.index(column)
    if schema.label_column not in header:
        raise SchemaError(f"input missing label column '{schema.label_column}'")
    label_idx = header.index(schema.label_column)

    dir_tokens = {k.strip().lower(): v for k, v in schema.direction_values.items()}

    records: list[FlowRecord] = []
    rejections: list[str] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            records.append(_parse_row(row, index, label_idx, schema, dir_tokens))
        except (_RowError, InvalidRecord, IndexError) as exc:
            reason = "short row" if isinstance(exc, IndexError) else str(exc)
            rejections.append(f"line {line_no}: {reason}")

    records.sort(key=lambda r: r.timestamp)  # stable: ties keep file order
    dataset = FlowDataset(tuple(records), schema.schema_id)
    return ParseResult(dataset, tuple(rejections))


def _parse_row(row: list[str], index: Mapping[str, int], label_idx: int,
               schema: FlowSchema, dir_tokens: Mapping[str, str]) -> FlowRecord:
    def cell(f_name: str) -> str | None:
        if f_name not in index:
            return None
        return row[index[f_name]].strip()

    def optional_port(f_name: str) -> int | None:
        raw = cell(f_name)
        if raw is None or raw in schema.absent_tokens:
            return None
        try:
            value = int(raw, 0) if raw.lower().startswith("0x") else int(raw)
        except ValueError:
            raise _RowError(f"unparseable {f_name} '{raw}'") from None
        return value

    def optional_float(f_name: str) -> float | None:
        raw = cell(f_name)
        if raw is None or raw in schema.absent_tokens:
            if f_name in IAT_FIELDS and schema.requires_iat():
                raise _RowError(f"missing {f_name} (required by {schema.schema_id})")
            return None
        return _parse_float(raw, f_name)

    raw_dir = cell("direction")
    if raw_dir is not None:
        token = raw_dir.lower()
        if token not in dir_tokens:
            raise _RowError(f"unknown direction token '{raw_dir}'")
        direction = Direction(dir_tokens[token])
    else:
        direction = classify_direction(
            cell("src_host") or "", cell("dst_host") or "", schema.internal_hosts
        )

    raw_label = row[label_idx].strip()
    attack_type = schema.malicious_labels.get(raw_label)

    src_bytes_raw = cell("src_bytes")
    return FlowRecord(
        timestamp=_parse_float(cell("timestamp"), "timestamp"),
        duration=_parse_float(cell("duration"), "duration"),
        protocol=(cell("protocol") or "").lower(),
        src_port=optional_port("src_port"),
        dst_port=optional_port("dst_port"),
        direction=direction,
        total_packets=_parse_count(cell("total_packets"), "total_packets"),
        total_bytes=_parse_count(cell("total_bytes"), "total_bytes"),
        src_bytes=_parse_count(src_bytes_raw, "src_bytes") if src_bytes_raw not in (None, "") else 0,
        src_host=cell("src_host") or "",
        dst_host=cell("dst_host") or "",
        attack_type=attack_type,
        iat_min=optional_float("iat_min"),
        iat_max=optional_float("iat_max"),
        iat_avg=optional_float("iat_avg"),
    )


def write_flows(dataset: FlowDataset, target: str | Path | TextIO) -> None:
    """Write a dataset in the canonical delimited format.

    Floats are written with shortest round-trip repr, so
    parse(write(dataset)) reproduces the dataset exactly under
    :func:`canonical_schema` with a matching label vocabulary.
    """
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as handle:
            write_flows(dataset, handle)
            return

    fields = list(MANDATORY_FIELDS) + list(OPTIONAL_FIELDS)
    writer = csv.writer(target)
    writer.writerow(fields + ["label"])

    def fmt(value) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        if isinstance(value, Direction):
            return value.value
        return str(value)

    for r in dataset.records:
        writer.writerow([fmt(getattr(r, f)) for f in fields] + [r.label])


def roundtrip_labels(dataset: FlowDataset) -> dict[str, str]:
    """Identity label vocabulary for re-reading a canonical file."""
    return {t: t for t in dataset.attack_types()}


# ---------------------------------------------------------------------------
# Host-based operations
# ---------------------------------------------------------------------------

def _host_matches(host: str, entries: frozenset[str] | set[str]) -> bool:
    for entry in entries:
        if entry.endswith("*"):
            if host.startswith(entry[:-1]):
                return True
        elif host == entry:
            return True
    return False


def classify_direction(src_host: str, dst_host: str,
                       internal_set: frozenset[str] | set[str]) -> Direction:
    """Orient a connection against a set of internal hosts/prefixes.

    internal source and external destination -> outbound; the reverse ->
    inbound; both internal or both external -> bidirectional.
    """
    if not internal_set:
        raise ValueError("internal host set must be nonempty")
    src_internal = _host_matches(src_host, internal_set)
    dst_internal = _host_matches(dst_host, internal_set)
    if src_internal and not dst_internal:
        return Direction.OUTBOUND
    if dst_internal and not src_internal:
        return Direction.INBOUND
    return Direction.BIDIRECTIONAL


def filter_hosts(dataset: FlowDataset, excluded_hosts: set[str] | frozenset[str]) -> FlowDataset:
    """Drop records whose src or dst host is excluded; order preserved."""
    if not excluded_hosts:
        return dataset
    kept = tuple(
        r for r in dataset.records
        if r.src_host not in excluded_hosts and r.dst_host not in excluded_hosts
    )
    return replace(dataset, records=kept)
