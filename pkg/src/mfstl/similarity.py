"""Pairwise flow similarity and entropy-method feature weights."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .flows import FlowRecord

DEFAULT_PAIR_CAP = 100_000


@dataclass(frozen=True)
class SimilarityWeights:
    """Weights of the address, port, protocol and payload similarities."""

    w_a: float = 0.25
    w_po: float = 0.25
    w_pr: float = 0.25
    w_ps: float = 0.25

    def __post_init__(self):
        values = self.as_tuple()
        if any(not 0.0 <= w <= 1.0 for w in values):
            raise ValueError(f"weights must lie in [0, 1]: {values}")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1: {values}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_a, self.w_po, self.w_pr, self.w_ps)

    @classmethod
    def uniform(cls) -> "SimilarityWeights":
        return cls()


class ServicePortMap:
    """Maps port numbers to service names.

    Ports without an entry are their own service, so equal ports always
    match and distinct unmapped ports never do.
    """

    def __init__(self, singles: Optional[dict[int, str]] = None,
                 ranges: Iterable[tuple[int, int, str]] = ()):
        self._singles = dict(singles or {})
        self._ranges = sorted(ranges)
        for lo, hi, _ in self._ranges:
            if not 0 <= lo <= hi <= 65535:
                raise ValueError(f"bad port range {lo}-{hi}")
        for (_, hi, a), (lo, _, b) in zip(self._ranges, self._ranges[1:]):
            if lo <= hi:
                raise ValueError(f"overlapping port ranges for {a!r} and {b!r}")
        for port in self._singles:
            if self._range_service(port) is not None:
                raise ValueError(f"port {port} mapped both singly and by range")
        self._starts = [lo for lo, _, _ in self._ranges]
        self._cache: dict[int, str] = {}

    def _range_service(self, port: int) -> Optional[str]:
        i = bisect.bisect_right([lo for lo, _, _ in self._ranges], port) - 1
        if i >= 0:
            lo, hi, name = self._ranges[i]
            if lo <= port <= hi:
                return name
        return None

    def service(self, port: int) -> str:
        cached = self._cache.get(port)
        if cached is not None:
            return cached
        name = self._singles.get(port)
        if name is None:
            i = bisect.bisect_right(self._starts, port) - 1
            if i >= 0 and port <= self._ranges[i][1]:
                name = self._ranges[i][2]
            else:
                name = f"port/{port}"
        self._cache[port] = name
        return name

    def entries(self) -> list[tuple[int, int, str]]:
        out = [(p, p, s) for p, s in self._singles.items()] + list(self._ranges)
        return sorted(out)

    @classmethod
    def default(cls) -> "ServicePortMap":
        return cls(dict(WELL_KNOWN_SERVICES), [(6881, 6889, "bittorrent")])

    @classmethod
    def load(cls, path: str) -> "ServicePortMap":
        """Read ``port_or_range,service_name`` lines; ``#`` starts a comment."""
        singles: dict[int, str] = {}
        ranges: list[tuple[int, int, str]] = []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    ports, name = (part.strip() for part in line.split(",", 1))
                    if "-" in ports:
                        lo, hi = (int(x) for x in ports.split("-", 1))
                        ranges.append((lo, hi, name))
                    else:
                        singles[int(ports)] = name
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: expected 'port_or_range,service'") from None
        return cls(singles, ranges)


# Named well-known services. Every other port below 1024 is its own service
# under the unmapped-port rule, which matches one-name-per-port assignments.
WELL_KNOWN_SERVICES = {
    20: "ftp-data", 21: "ftp", 22: "ssh", 23: "telnet", 25: "smtp", 53: "dns",
    67: "dhcp-server", 68: "dhcp-client", 69: "tftp", 80: "http", 110: "pop3",
    119: "nntp", 123: "ntp", 135: "msrpc", 137: "netbios-ns", 138: "netbios-dgm",
    139: "netbios-ssn", 143: "imap", 161: "snmp", 162: "snmptrap", 179: "bgp",
    194: "irc", 389: "ldap", 443: "https", 445: "microsoft-ds", 465: "smtps",
    514: "syslog", 587: "submission", 636: "ldaps", 993: "imaps", 995: "pop3s",
    5554: "sasser",
}


def _lcp_bits(a, b) -> int:
    bits = a.max_prefixlen
    return bits - (int(a) ^ int(b)).bit_length()


def ip_similarity(fi: FlowRecord, fj: FlowRecord) -> float:
    """Longest common address prefix over the four address pairings, scaled to [0, 1]."""
    best = 0
    bits = 0
    for a in (fi.sa, fi.da):
        for b in (fj.sa, fj.da):
            if a.version != b.version:
                continue
            bits = a.max_prefixlen
            best = max(best, _lcp_bits(a, b))
    return best / bits if bits else 0.0


def port_similarity(fi: FlowRecord, fj: FlowRecord,
                    port_map: Optional[ServicePortMap] = None) -> int:
    port_map = port_map or _DEFAULT_MAP
    si = {port_map.service(fi.sp), port_map.service(fi.dp)}
    return int(port_map.service(fj.sp) in si or port_map.service(fj.dp) in si)


def protocol_similarity(fi: FlowRecord, fj: FlowRecord) -> int:
    return int(fi.pr == fj.pr)


def payload_similarity(fi: FlowRecord, fj: FlowRecord) -> float:
    a, b = fi.ps, fj.ps
    hi = max(a, b)
    if hi == 0:
        return 1.0
    return min(a, b) / hi


def component_similarities(fi: FlowRecord, fj: FlowRecord,
                           port_map: Optional[ServicePortMap] = None) -> tuple[float, int, int, float]:
    return (ip_similarity(fi, fj), port_similarity(fi, fj, port_map),
            protocol_similarity(fi, fj), payload_similarity(fi, fj))


def combined_similarity(fi: FlowRecord, fj: FlowRecord, weights: SimilarityWeights,
                        port_map: Optional[ServicePortMap] = None) -> float:
    comps = component_similarities(fi, fj, port_map)
    return sum(w * c for w, c in zip(weights.as_tuple(), comps))


def entropy_weights(samples) -> SimilarityWeights:
    """Entropy-method weights from an ``n x 4`` matrix of component similarities.

    Columns whose values are spread evenly across rows carry little
    information and get low weight; a constant column gets zero weight.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 4:
        raise ValueError(f"expected an n x 4 matrix, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise ValueError("entropy weights need at least 2 rows")
    if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
        raise ValueError("similarity entries must lie in [0, 1]")
    col_sum = x.sum(axis=0)
    entropy = np.ones(4)
    for j in range(4):
        if col_sum[j] == 0:
            continue
        p = x[:, j] / col_sum[j]
        nz = p[p > 0]
        entropy[j] = -float(np.sum(nz * np.log(nz))) / math.log(n)
    d = np.clip(1.0 - entropy, 0.0, None)
    total = d.sum()
    if total <= 0:
        return SimilarityWeights.uniform()
    w = d / total
    return SimilarityWeights(*(float(v) for v in w))


def candidate_pair_components(records: Sequence[FlowRecord], dw: float,
                              port_map: Optional[ServicePortMap] = None,
                              protocols: Optional[frozenset] = None,
                              node_mode: str = "five-tuple") -> list[tuple]:
    """Component similarities of all record pairs within ``dw`` of each other.

    Pairs sharing a flow key are skipped since they never become edges.
    """
    recs = [r for r in records if protocols is None or r.pr in protocols]
    keys = [r.key(node_mode) for r in recs]
    out = []
    n = len(recs)
    for i in range(n):
        ti = recs[i].ts
        j = i + 1
        while j < n and recs[j].ts <= ti + dw:
            if keys[i] != keys[j]:
                out.append(component_similarities(recs[i], recs[j], port_map))
            j += 1
    return out


def train_entropy_weights(samples: Iterable, dw: float,
                          port_map: Optional[ServicePortMap] = None,
                          protocols: Optional[frozenset] = None,
                          node_mode: str = "five-tuple",
                          cap: int = DEFAULT_PAIR_CAP) -> SimilarityWeights:
    """Fit weights on every candidate pair of the training samples.

    Above ``cap`` pairs, a deterministic stride keeps the sample bounded.
    Falls back to uniform weights when fewer than 2 pairs exist.
    """
    rows: list[tuple] = []
    for p in samples:
        rows.extend(candidate_pair_components(p.records, dw, port_map, protocols, node_mode))
    if len(rows) > cap:
        stride = len(rows) / cap
        rows = [rows[int(k * stride)] for k in range(cap)]
    if len(rows) < 2:
        return SimilarityWeights.uniform()
    return entropy_weights(rows)


_DEFAULT_MAP = ServicePortMap.default()
