import numpy as np
import pytest

from flownids.flows import Direction, FlowDataset, FlowRecord


def make_record(timestamp, attack_type=None, **overrides):
    """Minimal valid record with tweakable fields."""
    fields = dict(
        timestamp=timestamp,
        duration=0.5,
        protocol="tcp",
        src_port=51000,
        dst_port=80,
        direction=Direction.OUTBOUND,
        total_packets=10,
        total_bytes=900,
        src_bytes=500,
        src_host="10.0.0.1",
        dst_host="203.0.113.5",
        attack_type=attack_type,
    )
    fields.update(overrides)
    return FlowRecord(**fields)


def random_record(rng: np.random.Generator, timestamp: float,
                  attack_type=None) -> FlowRecord:
    protocol = rng.choice(["tcp", "udp", "icmp"])
    total_bytes = int(rng.integers(40, 100000))
    iats = None
    if rng.random() < 0.5:
        lo, mid, hi = np.sort(rng.random(3) * 10.0)
        iats = (float(lo), float(mid), float(hi))
    return FlowRecord(
        timestamp=timestamp,
        duration=float(rng.random() * 100),
        protocol=str(protocol),
        src_port=None if protocol == "icmp" else int(rng.integers(0, 65536)),
        dst_port=None if protocol == "icmp" else int(rng.integers(0, 65536)),
        direction=Direction(rng.choice([d.value for d in Direction])),
        total_packets=int(rng.integers(1, 1000)),
        total_bytes=total_bytes,
        src_bytes=int(rng.integers(0, total_bytes + 1)),
        src_host=f"10.0.0.{int(rng.integers(1, 20))}",
        dst_host=f"198.51.100.{int(rng.integers(1, 20))}",
        attack_type=attack_type,
        iat_min=iats[0] if iats else None,
        iat_avg=iats[1] if iats else None,
        iat_max=iats[2] if iats else None,
    )


def random_dataset(rng: np.random.Generator, n: int, malicious_fraction=0.2,
                   attack_type="botnet", span=1000.0) -> FlowDataset:
    timestamps = np.sort(rng.random(n) * span)
    records = []
    for t in timestamps:
        mal = attack_type if rng.random() < malicious_fraction else None
        records.append(random_record(rng, float(t), mal))
    return FlowDataset(tuple(records))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
