"""Multi-characteristic fusion and the Gaussian threshold baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from .flows import ABNORMAL, NORMAL
from .ifs import CharacteristicModel, IntuitionisticValue, ifs_of_value

DEFAULT_TAU_C = 0.5
DEFAULT_EPSILON = 0.1
FALLBACK_TOP = 3

IFWA = "ifwa"
MAX_MEMBERSHIP = "max"


def ifwa(values: Sequence[IntuitionisticValue],
         weights: Sequence[float]) -> IntuitionisticValue:
    """Weighted average: ``(1 - prod (1 - mu)^w, prod gamma^w)``."""
    if len(values) != len(weights) or not values:
        raise ValueError("need one weight per value")
    keep_mu = 1.0
    gamma = 1.0
    for v, w in zip(values, weights):
        keep_mu *= (1.0 - v.mu) ** w
        gamma *= v.gamma ** w
    return IntuitionisticValue.of(1.0 - keep_mu, gamma)


def ifwg(values: Sequence[IntuitionisticValue],
         weights: Sequence[float]) -> IntuitionisticValue:
    """Weighted geometric: ``(prod mu^w, 1 - prod (1 - gamma)^w)``."""
    if len(values) != len(weights) or not values:
        raise ValueError("need one weight per value")
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("weights must be non-negative and sum to 1")
    mu = 1.0
    keep_gamma = 1.0
    for v, w in zip(values, weights):
        mu *= v.mu ** w
        keep_gamma *= (1.0 - v.gamma) ** w
    return IntuitionisticValue.of(mu, 1.0 - keep_gamma)


def score(v: IntuitionisticValue) -> float:
    return v.mu - v.gamma


def precision(v: IntuitionisticValue) -> float:
    return v.mu + v.gamma


def compare(a: IntuitionisticValue, b: IntuitionisticValue) -> int:
    """-1, 0 or 1 as ``a`` ranks below, level with, or above ``b``."""
    sa, sb = score(a), score(b)
    if sa != sb:
        return 1 if sa > sb else -1
    ha, hb = precision(a), precision(b)
    if ha != hb:
        return 1 if ha > hb else -1
    return 0


def build_b_matrix(observation: Sequence[float],
                   models: Sequence[CharacteristicModel]) -> list[list[IntuitionisticValue]]:
    """Row ``i`` holds the triples of value ``i`` against model ``i``'s intervals."""
    if len(observation) != len(models):
        raise ValueError("one model per characteristic value required")
    return [ifs_of_value(c, mdl) for c, mdl in zip(observation, models)]


def collapse_to_states(row: Sequence[IntuitionisticValue], model: CharacteristicModel,
                       method: str = IFWA) -> tuple[IntuitionisticValue, IntuitionisticValue]:
    """Merge a row over the abnormal and normal interval sets.

    Returns ``(abnormal, normal)``. The default averages each set with equal
    weights; ``method="max"`` keeps the set member with the largest membership.
    """
    out = []
    for members in (model.ac, model.nc):
        vals = [row[i] for i in members]
        if method == IFWA:
            out.append(ifwa(vals, [1.0 / len(vals)] * len(vals)))
        elif method == MAX_MEMBERSHIP:
            out.append(max(vals, key=lambda v: v.mu))
        else:
            raise ValueError(f"unknown collapse method: {method!r}")
    return out[0], out[1]


@dataclass
class EnsembleModel:
    """Selected characteristics with their fusion weights."""

    models: list
    selected: list
    weights: list
    tau_c: float = DEFAULT_TAU_C
    collapse: str = IFWA
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"selected": list(self.selected), "weights": list(self.weights),
                "tau_c": self.tau_c, "collapse": self.collapse,
                "degenerate": self.degenerate}


def select_and_weight(models: Sequence[Optional[CharacteristicModel]],
                      tau_c: float = DEFAULT_TAU_C,
                      collapse: str = IFWA) -> EnsembleModel:
    """Keep characteristics whose distinction index reaches ``tau_c``.

    With none qualifying the three best are kept. Weights are proportional
    to the distinction index, uniform when every kept index is zero.
    Untrainable characteristics (None) are never selected.
    """
    usable = [i for i, m in enumerate(models) if m is not None]
    if not usable:
        raise ValueError("no trained characteristic models")
    selected = [i for i in usable if models[i].tau >= tau_c]
    if not selected:
        ranked = sorted(usable, key=lambda i: (-models[i].tau, i))
        selected = sorted(ranked[:FALLBACK_TOP])
    taus = [models[i].tau for i in selected]
    total = sum(taus)
    degenerate = total <= 0
    if degenerate:
        weights = [1.0 / len(selected)] * len(selected)
    else:
        weights = [t / total for t in taus]
    return EnsembleModel(list(models), selected, weights, tau_c, collapse, degenerate)


# --------------------------------------------------------------------------- #
# Log-domain fusion
#
# Far outside a characteristic's training domain every Gaussian membership
# underflows to 0 and every fused triple saturates at (0, 1), so two states
# would tie at score -1. The decision path below carries log(mu) and
# log(1 - gamma) instead, which ranks the states as exact arithmetic would.
# --------------------------------------------------------------------------- #

_SMALL = -30.0  # below this, first-order expansions are exact to double precision


def _log1mexp(lx: float) -> float:
    """``log(1 - exp(lx))`` for ``lx <= 0``."""
    if lx == -math.inf:
        return 0.0
    if lx >= 0:
        return -math.inf
    if lx > -0.6931471805599453:
        return math.log(-math.expm1(lx))
    return math.log1p(-math.exp(lx))


def _log_keep(log_mu: float, beta: float) -> float:
    """``log(1 - gamma)`` for the Yager complement of ``exp(log_mu)``."""
    t = beta * log_mu
    if t < _SMALL:
        return t - math.log(beta)
    return _log1mexp(_log1mexp(t) / beta)


def _log_union(logs: Sequence[float], weights: Sequence[float]) -> float:
    """``log(1 - prod (1 - exp(l))^w)``, the IFWA membership in logs."""
    top = max(logs)
    if top < _SMALL:
        return top + math.log(sum(w * math.exp(l - top) for l, w in zip(logs, weights)))
    s = sum(w * _log1mexp(l) for l, w in zip(logs, weights))
    return _log1mexp(s) if s < 0 else -math.inf


@dataclass(frozen=True)
class _LogIFS:
    log_mu: float
    log_keep: float

    def value(self) -> IntuitionisticValue:
        return IntuitionisticValue.of(math.exp(self.log_mu), -math.expm1(self.log_keep))


def _log_row(x: float, model: CharacteristicModel) -> list[_LogIFS]:
    return [_LogIFS(float(l), _log_keep(float(l), model.beta)) for l in model.log_memberships(x)]


def _log_collapse(row: Sequence[_LogIFS], members: Sequence[int], method: str) -> _LogIFS:
    vals = [row[i] for i in members]
    if method == MAX_MEMBERSHIP:
        return max(vals, key=lambda v: v.log_mu)
    w = [1.0 / len(vals)] * len(vals)
    return _LogIFS(_log_union([v.log_mu for v in vals], w),
                   _log_union([v.log_keep for v in vals], w))


def _log_ifwg(vals: Sequence[_LogIFS], weights: Sequence[float]) -> _LogIFS:
    lm = sum(w * v.log_mu for v, w in zip(vals, weights) if w > 0)
    lk = sum(w * v.log_keep for v, w in zip(vals, weights) if w > 0)
    return _LogIFS(lm, lk)


def _log_compare(a: _LogIFS, b: _LogIFS) -> int:
    # score = mu + keep - 1; at equal scores precision = mu - keep + 1 orders like mu
    sa = np.logaddexp(a.log_mu, a.log_keep)
    sb = np.logaddexp(b.log_mu, b.log_keep)
    if sa != sb:
        return 1 if sa > sb else -1
    if a.log_mu != b.log_mu:
        return 1 if a.log_mu > b.log_mu else -1
    return 0


@dataclass(frozen=True)
class StateDecision:
    """Fused abnormal/normal triples and the verdict.

    ``log_scores`` holds ``log(score + 1)`` of each state, which still
    separates the states when both triples round to ``(0, 1)``.
    """

    abnormal: IntuitionisticValue
    normal: IntuitionisticValue
    verdict: str
    log_scores: tuple = (0.0, 0.0)

    @property
    def scores(self) -> tuple[float, float]:
        return score(self.abnormal), score(self.normal)

    @property
    def precisions(self) -> tuple[float, float]:
        return precision(self.abnormal), precision(self.normal)


def ifse_ad_classify(observation: Sequence[float], em: EnsembleModel) -> StateDecision:
    """Fuse the selected characteristics of one sample into a verdict.

    ``observation`` holds one value per model in ``em.models``. Each
    selected row is collapsed onto the abnormal and normal interval sets,
    the rows are fused with the weighted geometric operator, and the two
    fused states are ranked by score then precision. An exact tie yields
    normal.
    """
    ab, no = [], []
    for i in em.selected:
        mdl = em.models[i]
        row = _log_row(float(observation[i]), mdl)
        ab.append(_log_collapse(row, mdl.ac, em.collapse))
        no.append(_log_collapse(row, mdl.nc, em.collapse))
    fused_ab = _log_ifwg(ab, em.weights)
    fused_no = _log_ifwg(no, em.weights)
    verdict = ABNORMAL if _log_compare(fused_ab, fused_no) > 0 else NORMAL
    logs = (float(np.logaddexp(fused_ab.log_mu, fused_ab.log_keep)),
            float(np.logaddexp(fused_no.log_mu, fused_no.log_keep)))
    return StateDecision(fused_ab.value(), fused_no.value(), verdict, logs)


# --------------------------------------------------------------------------- #
# Gaussian-Dist baseline
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class GaussianBaseline:
    """Two-sided ``mean +/- lambda * std`` band fitted on normal samples."""

    mean: float
    std: float
    epsilon: float = DEFAULT_EPSILON

    @property
    def lam(self) -> float:
        return NormalDist().inv_cdf(1.0 - self.epsilon / 2.0)

    def detect(self, x: float) -> str:
        if self.std == 0:
            return NORMAL if x == self.mean else ABNORMAL
        half = self.lam * self.std
        return NORMAL if self.mean - half <= x <= self.mean + half else ABNORMAL

    @classmethod
    def fit(cls, series: Sequence[float], labels: Optional[Sequence[str]] = None,
            epsilon: float = DEFAULT_EPSILON) -> "GaussianBaseline":
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1): {epsilon}")
        x = np.asarray(series, dtype=float)
        if labels is not None:
            x = x[[lab != ABNORMAL for lab in labels]]
        if len(x) < 2:
            raise ValueError("need at least 2 normal training values")
        return cls(float(x.mean()), float(x.std(ddof=1)), epsilon)


def gaussian_dist_detect(series: Sequence[float], x: float,
                         epsilon: float = DEFAULT_EPSILON,
                         labels: Optional[Sequence[str]] = None) -> str:
    return GaussianBaseline.fit(series, labels, epsilon).detect(x)
