"""Complex-network characteristics of a flow-interaction graph."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .graph import BuildParams, MfstlGraph, build_mfstl, undirected_projection
from .similarity import ServicePortMap, SimilarityWeights

CHARACTERISTICS = (
    "node_number", "edge_number", "mean_degree", "max_degree", "mdr", "kcore",
    "clique", "clustering", "assortative", "entropy", "spl", "diameter_max",
    "diameter_mean", "power_law",
)


@dataclass(frozen=True)
class CharacteristicVector:
    node_number: float = 0.0
    edge_number: float = 0.0
    mean_degree: float = 0.0
    max_degree: float = 0.0
    mdr: float = 0.0
    kcore: float = 0.0
    clique: float = 0.0
    clustering: float = 0.0
    assortative: float = 0.0
    entropy: float = 0.0
    spl: float = 0.0
    diameter_max: float = 0.0
    diameter_mean: float = 0.0
    power_law: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


assert tuple(f.name for f in fields(CharacteristicVector)) == CHARACTERISTICS


def _index_adjacency(adj: dict) -> list[list[int]]:
    # sorted node order only fixes array positions; no metric depends on it
    order = sorted(adj, key=repr)
    pos = {n: i for i, n in enumerate(order)}
    return [sorted(pos[v] for v in adj[n]) for n in order]


def core_numbers(nbrs: Sequence[Sequence[int]]) -> list[int]:
    """Core number of every node by bucketed minimum-degree peeling."""
    n = len(nbrs)
    deg = [len(x) for x in nbrs]
    if n == 0:
        return []
    max_deg = max(deg)
    buckets: list[set] = [set() for _ in range(max_deg + 1)]
    for v, d in enumerate(deg):
        buckets[d].add(v)
    core = [0] * n
    removed = [False] * n
    k = 0
    for _ in range(n):
        d = 0
        while not buckets[d]:
            d += 1
        v = buckets[d].pop()
        k = max(k, d)
        core[v] = k
        removed[v] = True
        for u in nbrs[v]:
            if not removed[u]:
                du = deg[u]
                buckets[du].discard(u)
                deg[u] = du - 1
                buckets[du - 1].add(u)
    return core


def max_clique_size(nbrs: Sequence[Sequence[int]]) -> int:
    """Exact maximum clique size by branch and bound.

    Vertices are visited in degeneracy order and each search is confined to
    a vertex's later neighbours; a greedy colouring bounds every branch.
    """
    n = len(nbrs)
    if n == 0:
        return 0
    adj = [set(x) for x in nbrs]
    core = core_numbers(nbrs)
    order = sorted(range(n), key=lambda v: (core[v], len(adj[v]), v))
    rank = {v: i for i, v in enumerate(order)}
    best = 1

    def colour_sort(cands: list[int]) -> tuple[list[int], list[int]]:
        colours: list[list[int]] = []
        for v in cands:
            for cls in colours:
                if not adj[v].intersection(cls):
                    cls.append(v)
                    break
            else:
                colours.append([v])
        verts, bounds = [], []
        for c, cls in enumerate(colours, 1):
            for v in cls:
                verts.append(v)
                bounds.append(c)
        return verts, bounds

    def expand(size: int, cands: list[int]) -> None:
        nonlocal best
        verts, bounds = colour_sort(cands)
        for i in range(len(verts) - 1, -1, -1):
            if size + bounds[i] <= best:
                return
            v = verts[i]
            rest = [u for u in verts[:i] if u in adj[v]]
            if rest:
                expand(size + 1, rest)
            elif size + 1 > best:
                best = size + 1

    for v in order:
        if core[v] + 1 <= best:
            continue
        later = [u for u in adj[v] if rank[u] > rank[v]]
        if len(later) + 1 <= best:
            continue
        expand(1, later)
    return best


def _component_paths(nbrs: Sequence[Sequence[int]]) -> tuple[float, float, float]:
    """SPL, max and mean eccentricity over the largest connected component.

    Among equally large components the one with the greatest
    ``(spl, diameter_max, diameter_mean)`` wins, which is label-independent.
    """
    n = len(nbrs)
    rows = [i for i, x in enumerate(nbrs) for _ in x]
    cols = [j for x in nbrs for j in x]
    mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, comp = connected_components(mat, directed=False)
    sizes = np.bincount(comp)
    biggest = sizes.max()
    best = (0.0, 0.0, 0.0)
    for c in np.flatnonzero(sizes == biggest):
        members = np.flatnonzero(comp == c)
        if len(members) < 2:
            continue
        sub = mat[members][:, members]
        dist = shortest_path(sub, method="D", directed=False, unweighted=True)
        k = len(members)
        spl = float(dist.sum() / (k * (k - 1)))
        ecc = dist.max(axis=1)
        cand = (spl, float(ecc.max()), float(ecc.mean()))
        best = max(best, cand)
    return best


def _assortativity(nbrs: Sequence[Sequence[int]], deg: np.ndarray) -> float:
    src = np.array([i for i, x in enumerate(nbrs) for _ in x])
    if len(src) == 0:
        return 0.0
    dst = np.array([j for x in nbrs for j in x])
    x = deg[src].astype(float)
    y = deg[dst].astype(float)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0:
        return 0.0
    return float(np.clip(float(xc @ yc) / denom, -1.0, 1.0))


def _power_law_slope(deg: np.ndarray) -> float:
    counts = Counter(int(d) for d in deg if d > 0)
    if len(counts) < 2:
        return 0.0
    ks = sorted(counts)
    x = np.log(np.array(ks, dtype=float))
    y = np.log(np.array([counts[k] for k in ks], dtype=float))
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def characteristics_of_adjacency(adj: dict) -> CharacteristicVector:
    """All 14 characteristics of an undirected simple graph given as adjacency."""
    nbrs = _index_adjacency(adj)
    n = len(nbrs)
    if n == 0:
        return CharacteristicVector()
    deg = np.array([len(x) for x in nbrs])
    m = int(deg.sum()) // 2
    max_deg = int(deg.max())
    mdr = max_deg / (n - 1) if n > 1 else 0.0

    adj_sets = [set(x) for x in nbrs]
    triangles = 0
    for v in range(n):
        for u in nbrs[v]:
            if u > v:
                triangles += sum(1 for w in adj_sets[v] & adj_sets[u] if w > u)
    wedges = int(sum(d * (d - 1) // 2 for d in deg))
    clustering = 3 * triangles / wedges if wedges else 0.0

    probs = np.bincount(deg) / n
    probs = probs[probs > 0]
    entropy = float(-np.sum(probs * np.log(probs)))

    spl, dmax, dmean = _component_paths(nbrs) if m else (0.0, 0.0, 0.0)
    return CharacteristicVector(
        node_number=float(n),
        edge_number=float(m),
        mean_degree=2.0 * m / n,
        max_degree=float(max_deg),
        mdr=mdr,
        kcore=float(max(core_numbers(nbrs))),
        clique=float(max_clique_size(nbrs)),
        clustering=clustering,
        assortative=_assortativity(nbrs, deg),
        entropy=entropy,
        spl=spl,
        diameter_max=dmax,
        diameter_mean=dmean,
        power_law=_power_law_slope(deg),
    )


def characteristics(g: MfstlGraph) -> CharacteristicVector:
    """Characteristics of a flow graph, measured on its undirected projection."""
    return characteristics_of_adjacency(undirected_projection(g))


def characteristic_series(samples: Iterable, params: BuildParams = BuildParams(),
                          weights: SimilarityWeights = SimilarityWeights(),
                          port_map: Optional[ServicePortMap] = None) -> np.ndarray:
    """``14 x n`` matrix whose column ``i`` characterises sample ``i``."""
    port_map = port_map or ServicePortMap.default()
    cols = [characteristics(build_mfstl(p, params, weights, port_map)).as_array()
            for p in samples]
    if not cols:
        return np.zeros((len(CHARACTERISTICS), 0))
    return np.column_stack(cols)


def write_series_csv(path: str, series: np.ndarray, labels: Sequence[Optional[str]],
                     indices: Optional[Sequence[int]] = None) -> None:
    indices = list(indices) if indices is not None else list(range(series.shape[1]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sample_index", "label") + CHARACTERISTICS)
        for k in range(series.shape[1]):
            w.writerow([indices[k], labels[k] or ""] + [repr(float(v)) for v in series[:, k]])
