"""Flow-interaction graphs built from temporal locality and flow similarity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .flows import FIVE_TUPLE, NODE_MODES, FlowRecord, SamplePartition, format_key
from .similarity import ServicePortMap, SimilarityWeights

UWE = "UWE"
WE = "WE"
EDGE_MODES = (UWE, WE)

TCP, UDP = 6, 17
DEFAULT_DW = 0.1
DEFAULT_RC = 0.65


@dataclass(frozen=True)
class BuildParams:
    """Graph construction knobs.

    Attributes:
        dw: Temporal locality window in seconds; a later flow within
            ``dw`` of an earlier one is a link candidate.
        rc: Minimum combined similarity for a link.
        node_mode: ``"five-tuple"`` or ``"two-tuple"`` node identity.
        edge_mode: ``"WE"`` counts repeated links, ``"UWE"`` keeps one.
        protocols: Protocol numbers admitted as nodes, None for all.
    """

    dw: float = DEFAULT_DW
    rc: float = DEFAULT_RC
    node_mode: str = FIVE_TUPLE
    edge_mode: str = WE
    protocols: Optional[frozenset] = frozenset({TCP, UDP})

    def __post_init__(self):
        if not self.dw > 0:
            raise ValueError(f"dw must be positive: {self.dw}")
        if not 0.0 <= self.rc <= 1.0:
            raise ValueError(f"rc must lie in [0, 1]: {self.rc}")
        if self.node_mode not in NODE_MODES:
            raise ValueError(f"unknown node mode: {self.node_mode!r}")
        if self.edge_mode not in EDGE_MODES:
            raise ValueError(f"unknown edge mode: {self.edge_mode!r}")
        if self.protocols is not None:
            object.__setattr__(self, "protocols", frozenset(self.protocols))


@dataclass
class MfstlGraph:
    """Directed weighted graph of interacting flows for one sample."""

    nodes: set = field(default_factory=set)
    edges: dict = field(default_factory=dict)
    index: int = 0

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def add_edge(self, u, v, weighted: bool = True) -> None:
        if u == v:
            return
        if weighted:
            self.edges[(u, v)] = self.edges.get((u, v), 0) + 1
        else:
            self.edges[(u, v)] = 1

    def write_edge_list(self, edge_path: str, node_path: str) -> None:
        """Write ``src<TAB>dst<TAB>weight`` lines and a one-key-per-line node file."""
        with open(edge_path, "w") as fh:
            for (u, v), w in sorted(self.edges.items()):
                fh.write(f"{format_key(u)}\t{format_key(v)}\t{w}\n")
        with open(node_path, "w") as fh:
            for n in sorted(self.nodes):
                fh.write(format_key(n) + "\n")


class _Prepared:
    """Per-record values the pair kernel touches, computed once."""

    __slots__ = ("ts", "key", "addrs", "services", "pr", "ps")

    def __init__(self, r: FlowRecord, node_mode: str, port_map: ServicePortMap):
        self.ts = r.ts
        self.key = r.key(node_mode)
        self.addrs = ((r.sa.version, r.sa.max_prefixlen, int(r.sa)),
                      (r.da.version, r.da.max_prefixlen, int(r.da)))
        self.services = (port_map.service(r.sp), port_map.service(r.dp))
        self.pr = r.pr
        self.ps = r.ps


def _pair_similarity(a: _Prepared, b: _Prepared, weights: tuple) -> float:
    best = 0
    bits = 0
    for va, la, xa in a.addrs:
        for vb, _, xb in b.addrs:
            if va == vb:
                bits = la
                lcp = la - (xa ^ xb).bit_length()
                if lcp > best:
                    best = lcp
    ra = best / bits if bits else 0.0
    s0, s1 = a.services
    rpo = 1 if (b.services[0] == s0 or b.services[0] == s1
                or b.services[1] == s0 or b.services[1] == s1) else 0
    rpr = 1 if a.pr == b.pr else 0
    hi = a.ps if a.ps > b.ps else b.ps
    rps = 1.0 if hi == 0 else (b.ps if a.ps > b.ps else a.ps) / hi
    return weighted_sum(weights, (ra, rpo, rpr, rps))


def weighted_sum(weights: Sequence[float], comps: Sequence[float]) -> float:
    return sum(w * c for w, c in zip(weights, comps))


def build_mfstl(p: SamplePartition, params: BuildParams = BuildParams(),
                weights: SimilarityWeights = SimilarityWeights(),
                port_map: Optional[ServicePortMap] = None) -> MfstlGraph:
    """Build the interaction graph of one sample.

    Each record links forward to every later record inside its ``dw``
    window whose combined similarity reaches ``rc``. Only the window is
    scanned, so cost scales with the number of in-window pairs.
    """
    port_map = port_map or ServicePortMap.default()
    recs = p.records
    if params.protocols is not None:
        recs = [r for r in recs if r.pr in params.protocols]
    prepared = [_Prepared(r, params.node_mode, port_map) for r in recs]
    g = MfstlGraph(nodes={x.key for x in prepared}, index=p.index)
    w = weights.as_tuple()
    weighted = params.edge_mode == WE
    rc, dw = params.rc, params.dw
    n = len(prepared)
    for i in range(n):
        a = prepared[i]
        limit = a.ts + dw
        for j in range(i + 1, n):
            b = prepared[j]
            if b.ts > limit:
                break
            if a.key == b.key:
                continue
            if _pair_similarity(a, b, w) >= rc:
                g.add_edge(a.key, b.key, weighted)
    return g


def undirected_projection(g: MfstlGraph) -> dict:
    """Adjacency map ``{node: {neighbor: weight}}`` with reciprocal edges merged."""
    adj: dict = {n: {} for n in g.nodes}
    for (u, v), w in g.edges.items():
        adj.setdefault(u, {})
        adj.setdefault(v, {})
        adj[u][v] = adj[u].get(v, 0) + w
        adj[v][u] = adj[v].get(u, 0) + w
    return adj
