import random

import pytest

from mfstl.flows import ABNORMAL, NORMAL, FlowRecord, SamplePartition

_ACCEPTANCE_LINES: list[str] = []

ADDRS = ["10.0.0.1", "10.0.0.2", "10.0.1.7", "192.168.0.0", "192.168.128.0",
         "172.16.5.4", "203.0.113.66", "8.8.8.8"]
PORTS = [80, 443, 53, 22, 6881, 6885, 6889, 1234, 40000, 51515]
PROTOS = [6, 6, 6, 17, 17, 1]
SIZES = [0, 40, 64, 512, 1024, 1500]


def flow(ts=0.0, sa="10.0.0.1", da="10.0.0.2", sp=1234, dp=80, pr=6, ps=512, label=None):
    return FlowRecord.make(ts, sa, da, sp, dp, pr, ps, label)


def random_records(rng: random.Random, n: int, span: float, labeled=False):
    """Random flows drawn from small pools so similar pairs and repeated keys occur."""
    recs = []
    for _ in range(n):
        ts = round(rng.uniform(0, span), 6)
        lab = (ABNORMAL if rng.random() < 0.1 else NORMAL) if labeled else None
        recs.append(flow(ts, rng.choice(ADDRS), rng.choice(ADDRS), rng.choice(PORTS),
                         rng.choice(PORTS), rng.choice(PROTOS), rng.choice(SIZES), lab))
    recs.sort(key=lambda r: r.ts)
    return recs


def random_sample(rng: random.Random, n: int, span: float, index=0):
    recs = random_records(rng, n, span)
    return SamplePartition(index, 0.0, span, tuple(recs))


def record_acceptance(line: str) -> None:
    print(line)
    _ACCEPTANCE_LINES.append(line)


@pytest.fixture
def acceptance_log():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
