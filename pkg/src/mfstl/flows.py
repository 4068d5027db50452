"""Flow records: CSV ingestion, time sampling, labeling, splitting and synthesis."""

from __future__ import annotations

import csv
import io
import ipaddress
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

IPAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]

NORMAL = "normal"
ABNORMAL = "abnormal"
LABELS = (NORMAL, ABNORMAL)

CSV_HEADER = ("ts", "sa", "da", "sp", "dp", "pr", "ps", "label")

FIVE_TUPLE = "five-tuple"
TWO_TUPLE = "two-tuple"
NODE_MODES = (FIVE_TUPLE, TWO_TUPLE)

DEFAULT_DT = 60.0
DEFAULT_LABEL_THRESHOLD = 0.001
DEFAULT_SPLIT = 0.75


class FlowFormatError(ValueError):
    """Raised when a flow CSV row cannot be parsed."""

    def __init__(self, line: int, field_name: str, message: str):
        self.line = line
        self.field = field_name
        super().__init__(f"line {line}: field {field_name!r}: {message}")


@dataclass(frozen=True, slots=True)
class FlowRecord:
    """One timestamped flow.

    Attributes:
        ts: Start time in seconds since the epoch, microsecond resolution.
        sa: Source address.
        da: Destination address.
        sp: Source port.
        dp: Destination port.
        pr: IP protocol number.
        ps: Payload size in bytes.
        label: ``"normal"``, ``"abnormal"`` or None when unlabeled.
    """

    ts: float
    sa: IPAddress
    da: IPAddress
    sp: int
    dp: int
    pr: int
    ps: int
    label: Optional[str] = None

    def __post_init__(self):
        if not math.isfinite(self.ts) or self.ts < 0:
            raise ValueError(f"timestamp must be finite and non-negative: {self.ts}")
        for name in ("sp", "dp"):
            value = getattr(self, name)
            if not 0 <= value <= 65535:
                raise ValueError(f"{name} port out of range: {value}")
        if not 0 <= self.pr <= 255:
            raise ValueError(f"protocol out of range: {self.pr}")
        if self.ps < 0:
            raise ValueError(f"payload size must be >= 0: {self.ps}")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"unknown label: {self.label!r}")

    @classmethod
    def make(cls, ts, sa, da, sp, dp, pr, ps, label=None) -> "FlowRecord":
        """Build a record from loosely typed values (addresses as text)."""
        return cls(
            ts=round(float(ts), 6),
            sa=ipaddress.ip_address(sa),
            da=ipaddress.ip_address(da),
            sp=int(sp),
            dp=int(dp),
            pr=int(pr),
            ps=int(ps),
            label=label or None,
        )

    def key(self, mode: str = FIVE_TUPLE) -> tuple:
        """Node identity of this flow under ``mode``."""
        if mode == FIVE_TUPLE:
            return (str(self.sa), str(self.da), self.sp, self.dp, self.pr)
        if mode == TWO_TUPLE:
            return (str(self.sa), str(self.da))
        raise ValueError(f"unknown node mode: {mode!r}")

    def to_row(self) -> list[str]:
        return [
            f"{self.ts:.6f}",
            str(self.sa),
            str(self.da),
            str(self.sp),
            str(self.dp),
            str(self.pr),
            str(self.ps),
            self.label or "",
        ]


def format_key(key: tuple) -> str:
    """Render a flow key as a single token for text exports."""
    if len(key) == 5:
        sa, da, sp, dp, pr = key
        return f"{sa}:{sp}>{da}:{dp}/{pr}"
    sa, da = key
    return f"{sa}>{da}"


@dataclass(frozen=True)
class SamplePartition:
    """Flows falling in the half-open window ``[start, end)``."""

    index: int
    start: float
    end: float
    records: tuple[FlowRecord, ...] = ()
    label: Optional[str] = None

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class DatasetSplit:
    train: list[SamplePartition]
    test: list[SamplePartition]
    ratio: float


# --------------------------------------------------------------------------- #
# CSV I/O
# --------------------------------------------------------------------------- #

def _parse_int(text: str, line: int, name: str, lo: int, hi: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise FlowFormatError(line, name, f"not an integer: {text!r}") from None
    if not lo <= value <= hi:
        raise FlowFormatError(line, name, f"{what} out of range: {value}")
    return value


def _parse_row(row: Sequence[str], line: int) -> FlowRecord:
    if len(row) != len(CSV_HEADER):
        raise FlowFormatError(line, "row", f"expected {len(CSV_HEADER)} fields, got {len(row)}")
    ts_text, sa_text, da_text, sp_text, dp_text, pr_text, ps_text, label = (c.strip() for c in row)
    try:
        ts = float(ts_text)
    except ValueError:
        raise FlowFormatError(line, "ts", f"not a number: {ts_text!r}") from None
    if not math.isfinite(ts) or ts < 0:
        raise FlowFormatError(line, "ts", f"timestamp must be finite and non-negative: {ts_text!r}")
    addrs = []
    for name, text in (("sa", sa_text), ("da", da_text)):
        try:
            addrs.append(ipaddress.ip_address(text))
        except ValueError:
            raise FlowFormatError(line, name, f"invalid IP address: {text!r}") from None
    sp = _parse_int(sp_text, line, "sp", 0, 65535, "port")
    dp = _parse_int(dp_text, line, "dp", 0, 65535, "port")
    pr = _parse_int(pr_text, line, "pr", 0, 255, "protocol")
    ps = _parse_int(ps_text, line, "ps", 0, 2**63 - 1, "payload size")
    if label and label not in LABELS:
        raise FlowFormatError(line, "label", f"unknown label: {label!r}")
    return FlowRecord(round(ts, 6), addrs[0], addrs[1], sp, dp, pr, ps, label or None)


def iter_flows(source: IO[str]) -> Iterator[FlowRecord]:
    """Stream records from a flow CSV in file order."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise FlowFormatError(1, "header", f"expected {','.join(CSV_HEADER)}")
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        yield _parse_row(row, reader.line_num)


def parse_flows(source: Union[IO[str], str]) -> list[FlowRecord]:
    """Parse a flow CSV (file object or path) into records sorted by time.

    Sorting is stable so records sharing a timestamp keep their input order.
    """
    if isinstance(source, str):
        with open(source, newline="") as fh:
            records = list(iter_flows(fh))
    else:
        records = list(iter_flows(source))
    records.sort(key=lambda r: r.ts)
    return records


def write_flows(records: Iterable[FlowRecord], sink: Union[IO[str], str]) -> None:
    if isinstance(sink, str):
        with open(sink, "w", newline="") as fh:
            write_flows(records, fh)
        return
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.to_row())


def flows_to_csv(records: Iterable[FlowRecord]) -> str:
    buf = io.StringIO()
    write_flows(records, buf)
    return buf.getvalue()


# --------------------------------------------------------------------------- #
# Sampling, labeling, splitting
# --------------------------------------------------------------------------- #

def partition_samples(records: Sequence[FlowRecord], dt: float = DEFAULT_DT) -> list[SamplePartition]:
    """Cut a sorted record list into contiguous windows of width ``dt``.

    Windows start at the first record's timestamp. Empty windows between
    populated ones are kept so the sample index stays a uniform time axis.
    """
    if not dt > 0:
        raise ValueError(f"sampling window must be positive: {dt}")
    if not records:
        return []
    t0 = records[0].ts
    n = int((records[-1].ts - t0) // dt) + 1
    buckets: list[list[FlowRecord]] = [[] for _ in range(n)]
    prev = t0
    for r in records:
        if r.ts < prev:
            raise ValueError("records must be sorted by timestamp")
        prev = r.ts
        idx = min(int((r.ts - t0) // dt), n - 1)
        buckets[idx].append(r)
    return [
        SamplePartition(i, t0 + i * dt, t0 + (i + 1) * dt, tuple(b))
        for i, b in enumerate(buckets)
    ]


def label_sample(p: SamplePartition, threshold: float = DEFAULT_LABEL_THRESHOLD) -> str:
    """Label a sample abnormal when its abnormal-flow ratio reaches ``threshold``."""
    if not p.records:
        return NORMAL
    abnormal = 0
    for r in p.records:
        if r.label is None:
            raise ValueError(f"sample {p.index}: unlabeled record at ts={r.ts}")
        abnormal += r.label == ABNORMAL
    return ABNORMAL if abnormal / len(p.records) >= threshold else NORMAL


def label_samples(samples: Sequence[SamplePartition],
                  threshold: float = DEFAULT_LABEL_THRESHOLD) -> list[SamplePartition]:
    return [replace(p, label=label_sample(p, threshold)) for p in samples]


def split_chronological(samples: Sequence, ratio: float = DEFAULT_SPLIT) -> DatasetSplit:
    """First ``floor(ratio * n)`` samples train, the rest test."""
    if not 0 < ratio < 1:
        raise ValueError(f"split ratio must lie in (0, 1): {ratio}")
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to split")
    cut = math.floor(ratio * len(samples))
    return DatasetSplit(list(samples[:cut]), list(samples[cut:]), ratio)


# --------------------------------------------------------------------------- #
# Synthetic traces
# --------------------------------------------------------------------------- #

# (destination port, protocol, relative frequency, median payload bytes)
_SERVICES = (
    (80, 6, 0.30, 900),
    (443, 6, 0.30, 1400),
    (53, 17, 0.15, 80),
    (22, 6, 0.05, 300),
    (25, 6, 0.05, 2000),
    (123, 17, 0.05, 48),
    (6881, 6, 0.05, 16000),
    (21, 6, 0.05, 600),
)


@dataclass
class SynthConfig:
    """Parameters of a synthetic labeled trace.

    Background flows arrive as a Poisson process at ``rate`` flows/s between
    ``clients`` internal hosts and ``servers`` external hosts. Each attack
    window injects a scan from one source to many destinations at
    ``attack_rate`` flows/s, all with destination port ``attack_port`` and
    payload ``attack_payload``.
    """

    duration: float = 600.0
    rate: float = 10.0
    attack_windows: list[tuple[float, float]] = field(default_factory=list)
    attack_rate: float = 20.0
    attack_pattern: str = "scan"
    attack_port: int = 445
    attack_payload: int = 64
    clients: int = 200
    servers: int = 400
    start_ts: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.rate > 0 or not self.attack_rate > 0:
            raise ValueError("rates must be positive")
        if self.attack_pattern != "scan":
            raise ValueError(f"unsupported attack pattern: {self.attack_pattern!r}")
        windows = sorted(self.attack_windows)
        for lo, hi in windows:
            if not 0 <= lo < hi <= self.duration:
                raise ValueError(f"attack window ({lo}, {hi}) outside [0, {self.duration}]")
        for (_, hi), (lo, _) in zip(windows, windows[1:]):
            if lo < hi:
                raise ValueError("attack windows overlap")


def _arrivals(rng: np.random.Generator, rate: float, lo: float, hi: float) -> np.ndarray:
    # Draw a Poisson count then sort uniforms; equivalent to exponential gaps.
    n = rng.poisson(rate * (hi - lo))
    return np.sort(rng.uniform(lo, hi, size=n))


def synth_trace(config: SynthConfig) -> list[FlowRecord]:
    """Generate a labeled trace, deterministic for ``config.seed``."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    clients = [ipaddress.IPv4Address(0x0A000000 + 256 + i) for i in range(config.clients)]
    servers = [ipaddress.IPv4Address(int(x)) for x in
               rng.integers(0x0B000000, 0xDF000000, size=config.servers)]
    probs = np.array([s[2] for s in _SERVICES])
    probs /= probs.sum()
    # each server offers one service so client/server/port choices stay coherent
    server_service = rng.choice(len(_SERVICES), size=config.servers, p=probs)
    client_weights = rng.pareto(1.5, size=config.clients) + 1.0
    client_weights /= client_weights.sum()

    times = _arrivals(rng, config.rate, 0.0, config.duration)
    n = len(times)
    ci = rng.choice(config.clients, size=n, p=client_weights)
    si = rng.integers(0, config.servers, size=n)
    sport = rng.integers(49152, 65536, size=n)
    noise = rng.lognormal(0.0, 0.6, size=n)

    rows: list[tuple] = []
    for k in range(n):
        dport, proto, _, median = _SERVICES[server_service[si[k]]]
        rows.append((float(times[k]), clients[ci[k]], servers[si[k]], int(sport[k]),
                     dport, proto, max(0, int(median * noise[k])), NORMAL))

    attacker = ipaddress.IPv4Address("203.0.113.66")
    for lo, hi in sorted(config.attack_windows):
        at = _arrivals(rng, config.attack_rate, lo, hi)
        targets = rng.integers(0x0A010000, 0x0A020000, size=len(at))
        ports = rng.integers(49152, 65536, size=len(at))
        for t, d, p in zip(at, targets, ports):
            rows.append((float(t), attacker, ipaddress.IPv4Address(int(d)), int(p),
                         config.attack_port, 6, config.attack_payload, ABNORMAL))

    rows.sort(key=lambda r: r[0])
    return [FlowRecord(round(config.start_ts + t, 6), sa, da, sp, dp, pr, ps, lab)
            for t, sa, da, sp, dp, pr, ps, lab in rows]
