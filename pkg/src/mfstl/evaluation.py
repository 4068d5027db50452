"""Detector scoring and parameter sweeps."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .flows import ABNORMAL, SamplePartition
from .graph import BuildParams
from .metrics import CHARACTERISTICS, characteristic_series
from .similarity import ServicePortMap, SimilarityWeights

DEFAULT_DW_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
DEFAULT_RC_GRID = tuple(round(0.1 * k, 1) for k in range(10))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class DetectionScore:
    counts: ConfusionCounts
    acc: float
    pre: float
    rec: float
    f1: float

    def as_row(self) -> dict:
        c = self.counts
        return {"TP": c.tp, "TN": c.tn, "FP": c.fp, "FN": c.fn,
                "acc": self.acc, "pre": self.pre, "rec": self.rec, "f1": self.f1}


def metrics_from_counts(c: ConfusionCounts) -> DetectionScore:
    """Accuracy, precision, recall and F1 with abnormal as the positive class.

    Undefined ratios (zero denominators) are reported as 0.
    """
    acc = (c.tp + c.tn) / c.total if c.total else 0.0
    pre = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    rec = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * pre * rec / (pre + rec) if pre + rec else 0.0
    return DetectionScore(c, acc, pre, rec, f1)


def score_detector(verdicts: Sequence[str], truths: Sequence[str]) -> DetectionScore:
    if len(verdicts) != len(truths):
        raise ValueError(f"{len(verdicts)} verdicts but {len(truths)} truths")
    if not verdicts:
        raise ValueError("nothing to score")
    tp = tn = fp = fn = 0
    for v, t in zip(verdicts, truths):
        pos, real = v == ABNORMAL, t == ABNORMAL
        if pos and real:
            tp += 1
        elif pos:
            fp += 1
        elif real:
            fn += 1
        else:
            tn += 1
    return metrics_from_counts(ConfusionCounts(tp, tn, fp, fn))


# --------------------------------------------------------------------------- #
# Sweeps
# --------------------------------------------------------------------------- #

@dataclass
class SweepGrid:
    """Mean characteristic vector for every ``(dw, rc)`` cell."""

    dw_values: tuple
    rc_values: tuple
    means: np.ndarray  # shape (len(dw), len(rc), 14)

    def rows(self):
        for a, dw in enumerate(self.dw_values):
            for b, rc in enumerate(self.rc_values):
                for k, name in enumerate(CHARACTERISTICS):
                    yield dw, rc, k, name, float(self.means[a, b, k])

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("dw", "rc", "metric", "name", "value"))
            for dw, rc, k, name, value in self.rows():
                w.writerow((repr(dw), repr(rc), k, name, repr(value)))


def _sweep_cell(args) -> np.ndarray:
    samples, params, weights, port_map = args
    series = characteristic_series(samples, params, weights, port_map)
    if series.shape[1] == 0:
        return np.zeros(len(CHARACTERISTICS))
    return series.mean(axis=1)


def param_sweep(samples: Sequence[SamplePartition],
                dw_values: Sequence[float] = DEFAULT_DW_GRID,
                rc_values: Sequence[float] = DEFAULT_RC_GRID,
                weights: SimilarityWeights = SimilarityWeights(),
                base: BuildParams = BuildParams(),
                port_map: Optional[ServicePortMap] = None,
                workers: int = 1) -> SweepGrid:
    """Average characteristics over ``samples`` for every grid cell.

    Cells are independent; with ``workers > 1`` they run in a process pool
    and are gathered back in grid order.
    """
    if not dw_values or not rc_values:
        raise ValueError("sweep grids must be non-empty")
    port_map = port_map or ServicePortMap.default()
    samples = list(samples)
    cells = [(samples, replace(base, dw=dw, rc=rc), weights, port_map)
             for dw in dw_values for rc in rc_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    means = np.array(results).reshape(len(dw_values), len(rc_values), len(CHARACTERISTICS))
    return SweepGrid(tuple(dw_values), tuple(rc_values), means)


def cluster_sweep(train_samples: Sequence[SamplePartition], test_samples: Sequence[SamplePartition],
                  m_values: Sequence[int], cfg, port_map: Optional[ServicePortMap] = None) -> list[tuple[int, float]]:
    """IFSE-AD test accuracy for each interval count ``m``.

    Graphs and characteristic series are computed once; only the fuzzy
    models are retrained per ``m``.
    """
    from .pipeline import classify_series, train

    if any(m < 2 for m in m_values):
        raise ValueError("interval counts must be at least 2")
    port_map = port_map or cfg.load_port_map()
    base = train(train_samples, replace(cfg, m=m_values[0]), port_map)
    test_series = characteristic_series(test_samples, base.params, base.weights, port_map)
    truths = [p.label for p in test_samples]
    out = []
    for m in m_values:
        det = train(train_samples, replace(cfg, m=m), port_map,
                    series=base.train_series, weights=base.weights)
        results = classify_series(det, test_series, test_samples)
        acc = score_detector([r.decision.verdict for r in results], truths).acc
        out.append((m, acc))
    return out


def write_cluster_csv(path: str, rows: Sequence[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("m", "acc"))
        for m, acc in rows:
            w.writerow((m, repr(acc)))
