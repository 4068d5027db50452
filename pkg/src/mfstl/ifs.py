"""Intuitionistic fuzzy sets over one characteristic's value domain.

A training series is clustered into ``m`` intervals; every interval carries
a Gaussian membership function and a Yager non-membership. Intervals are
then split into an abnormal set and a normal set by maximising the
distinction index, which also scores how well the characteristic
separates the two network states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .flows import ABNORMAL, NORMAL

DEFAULT_M = 10
DEFAULT_ALPHA = 0.2
DEFAULT_BETA = 0.8
DEFAULT_MARGIN = 0.05

FCM_FUZZIFIER = 2.0
FCM_TOL = 1e-6
FCM_MAX_ITER = 300


class InsufficientDataError(ValueError):
    """The training series cannot support the requested model."""


@dataclass(frozen=True, slots=True)
class IntuitionisticValue:
    """Membership ``mu``, non-membership ``gamma`` and hesitation ``pi``."""

    mu: float
    gamma: float
    pi: float

    @classmethod
    def of(cls, mu: float, gamma: float) -> "IntuitionisticValue":
        """Build a triple, clipping float noise so ``mu + gamma <= 1`` holds."""
        mu = min(max(float(mu), 0.0), 1.0)
        gamma = min(max(float(gamma), 0.0), 1.0 - mu)
        return cls(mu, gamma, 1.0 - mu - gamma)

    def score(self) -> float:
        return self.mu - self.gamma

    def precision(self) -> float:
        return self.mu + self.gamma


# --------------------------------------------------------------------------- #
# Clustering and domain partition
# --------------------------------------------------------------------------- #

def _fcm_1d(x: np.ndarray, centers: np.ndarray, fuzzifier: float,
            tol: float, max_iter: int) -> np.ndarray:
    power = 2.0 / (fuzzifier - 1.0)
    for _ in range(max_iter):
        dist = np.abs(x[:, None] - centers[None, :])
        zero = dist == 0
        with np.errstate(divide="ignore"):
            inv = dist ** -power
        hit = zero.any(axis=1)
        inv[hit] = zero[hit].astype(float)
        u = inv / inv.sum(axis=1, keepdims=True)
        um = u ** fuzzifier
        new = (um * x[:, None]).sum(axis=0) / um.sum(axis=0)
        shift = float(np.max(np.abs(new - centers)))
        centers = new
        if shift < tol:
            break
    return centers


def fcm_centers(values: Sequence[float], m: int = DEFAULT_M) -> np.ndarray:
    """Ascending cluster centres from one-dimensional fuzzy C-means.

    Values are rescaled to ``[0, 1]`` before clustering so the stopping
    tolerance is relative to the data range. Centres start at the
    ``(k - 0.5) / m`` quantiles of the series, falling back to quantiles of
    the distinct values when repeated values make starting centres coincide.
    """
    x = np.asarray(values, dtype=float)
    if m < 2:
        raise ValueError(f"need at least 2 intervals, got {m}")
    uniq = np.unique(x)
    if len(uniq) < m:
        raise InsufficientDataError(
            f"insufficient distinct values: {len(uniq)} distinct, {m} intervals")
    lo, span = float(uniq[0]), float(uniq[-1] - uniq[0])
    z = (x - lo) / span
    q = (np.arange(1, m + 1) - 0.5) / m
    init = np.quantile(z, q)
    if np.any(np.diff(init) <= 0):
        init = np.quantile((uniq - lo) / span, q)
    centers = np.sort(_fcm_1d(z, init, FCM_FUZZIFIER, FCM_TOL, FCM_MAX_ITER))
    if np.any(np.diff(centers) <= 1e-9):
        raise InsufficientDataError("clustering produced coincident centres")
    return lo + centers * span


def partition_domain(values: Sequence[float], centers: Sequence[float],
                     eps1: float, eps2: float) -> np.ndarray:
    """Interval bounds: margins outside the data range, midpoints between centres."""
    if not (eps1 > 0 and eps2 > 0):
        raise ValueError("margins must be positive")
    x = np.asarray(values, dtype=float)
    v = np.asarray(centers, dtype=float)
    inner = (v[:-1] + v[1:]) / 2.0
    return np.concatenate(([x.min() - eps1], inner, [x.max() + eps2]))


# --------------------------------------------------------------------------- #
# Membership functions
# --------------------------------------------------------------------------- #

def _spacings(centers: np.ndarray) -> np.ndarray:
    gaps = np.diff(centers)
    return np.concatenate(([gaps[0]], gaps))


def membership_widths(centers: Sequence[float], alpha: float) -> np.ndarray:
    """Gaussian variance of every interval.

    The variance puts membership ``(1 - alpha) / 2`` at the midpoint between
    an interval's centre and its left neighbour; the first interval borrows
    the gap to its right neighbour.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1): {alpha}")
    s = _spacings(np.asarray(centers, dtype=float))
    return -(s ** 2) / (8.0 * math.log((1.0 - alpha) / 2.0))


def nonmembership(mu: float, beta: float = DEFAULT_BETA) -> float:
    """Yager complement ``(1 - mu**beta) ** (1 / beta)``."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1]: {beta}")
    return (1.0 - mu ** beta) ** (1.0 / beta)


@dataclass
class CharacteristicModel:
    """Trained fuzzy model of one characteristic.

    Interval indices in ``ac``/``nc`` are 0-based. ``tallies[i]`` is the
    ``(abnormal, normal)`` count of training samples in interval ``i``.
    """

    name: str
    centers: np.ndarray
    bounds: np.ndarray
    eps1: float
    eps2: float
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    ac: tuple = ()
    nc: tuple = ()
    tau: float = 0.0
    tallies: list = field(default_factory=list)
    degenerate: bool = False

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.bounds = np.asarray(self.bounds, dtype=float)
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1): {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1]: {self.beta}")
        self._var = membership_widths(self.centers, self.alpha)

    @property
    def m(self) -> int:
        return len(self.centers)

    def log_memberships(self, x: float) -> np.ndarray:
        return -((x - self.centers) ** 2) / (2.0 * self._var)

    def memberships(self, x: float) -> np.ndarray:
        return np.exp(self.log_memberships(x))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "centers": [float(v) for v in self.centers],
            "bounds": [float(v) for v in self.bounds],
            "eps1": self.eps1,
            "eps2": self.eps2,
            "alpha": self.alpha,
            "beta": self.beta,
            "ac": list(self.ac),
            "nc": list(self.nc),
            "tau": self.tau,
            "tallies": [list(t) for t in self.tallies],
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CharacteristicModel":
        return cls(
            name=d["name"], centers=d["centers"], bounds=d["bounds"],
            eps1=d["eps1"], eps2=d["eps2"], alpha=d["alpha"], beta=d["beta"],
            ac=tuple(d["ac"]), nc=tuple(d["nc"]), tau=d["tau"],
            tallies=[tuple(t) for t in d["tallies"]], degenerate=d.get("degenerate", False),
        )


def membership(x: float, i: int, model: CharacteristicModel) -> float:
    """Membership of ``x`` in interval ``i`` (0-based)."""
    return float(model.memberships(x)[i])


def ifs_of_value(x: float, model: CharacteristicModel) -> list[IntuitionisticValue]:
    return [IntuitionisticValue.of(mu, nonmembership(mu, model.beta))
            for mu in model.memberships(float(x))]


# --------------------------------------------------------------------------- #
# Abnormal / normal interval sets
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Partition:
    ac: tuple
    nc: tuple
    tau: float
    eta: float
    degenerate: bool


def _ratios(tallies, members) -> tuple[Fraction, Fraction]:
    a = sum(tallies[i][0] for i in members)
    n = sum(tallies[i][1] for i in members)
    if a + n == 0:
        return Fraction(0), Fraction(0)
    return Fraction(a, a + n), Fraction(n, a + n)


def distinction_partition(tallies: Sequence[tuple[int, int]]) -> Partition:
    """Best split of intervals into abnormal (AC) and normal (NC) sets.

    Every proper non-empty bipartition is scored by
    ``eta = TT - TF + FF - FT`` where ``TT``/``TF`` are the pooled abnormal
    and normal shares of the AC intervals and ``FF``/``FT`` the normal and
    abnormal shares of the NC intervals. Ratios are exact fractions so ties
    are real ties; they go to the smaller AC, then the lexicographically
    first one.
    """
    m = len(tallies)
    if m < 2:
        raise ValueError("need at least 2 intervals")
    tallies = [(int(a), int(n)) for a, n in tallies]
    if any(a < 0 or n < 0 for a, n in tallies):
        raise ValueError("tallies must be non-negative")
    total_a = sum(a for a, _ in tallies)
    total_n = sum(n for _, n in tallies)
    if total_a + total_n == 0:
        raise ValueError("no training instances")
    best_key = None
    best = None
    full = (1 << m) - 1
    for mask in range(1, full):
        ac = tuple(i for i in range(m) if mask >> i & 1)
        nc = tuple(i for i in range(m) if not mask >> i & 1)
        tt, tf = _ratios(tallies, ac)
        ft, ff = _ratios(tallies, nc)
        eta = tt - tf + ff - ft
        key = (-eta, len(ac), ac)
        if best_key is None or key < best_key:
            best_key = key
            best = (ac, nc, eta, tt + tf + ff + ft)
    ac, nc, eta, denom = best
    tau = float(eta / denom) if denom else 0.0
    return Partition(ac, nc, tau, float(eta), total_a == 0 or total_n == 0)


def interval_of(x: float, bounds: Sequence[float]) -> int:
    """Index of the domain interval holding ``x``; outside values clamp to the ends."""
    inner = np.asarray(bounds)[1:-1]
    return int(np.searchsorted(inner, x, side="right"))


def train_characteristic(name: str, values: Sequence[float], labels: Sequence[str],
                         m: int = DEFAULT_M, alpha: float = DEFAULT_ALPHA,
                         beta: float = DEFAULT_BETA,
                         margin: float = DEFAULT_MARGIN) -> CharacteristicModel:
    """Fit the fuzzy model of one characteristic from labeled training values."""
    x = np.asarray(values, dtype=float)
    if len(x) != len(labels):
        raise ValueError("values and labels differ in length")
    centers = fcm_centers(x, m)
    span = float(x.max() - x.min())
    eps = margin * span
    bounds = partition_domain(x, centers, eps, eps)
    tallies = [[0, 0] for _ in range(m)]
    for value, lab in zip(x, labels):
        tallies[interval_of(value, bounds)][0 if lab == ABNORMAL else 1] += 1
    part = distinction_partition(tallies)
    return CharacteristicModel(
        name=name, centers=centers, bounds=bounds, eps1=eps, eps2=eps,
        alpha=alpha, beta=beta, ac=part.ac, nc=part.nc, tau=part.tau,
        tallies=[tuple(t) for t in tallies], degenerate=part.degenerate,
    )


def ifs_ad_classify(x: float, model: CharacteristicModel) -> str:
    """State of the interval with the largest membership for ``x``.

    Memberships are compared as logarithms so values far outside the
    training domain, where every membership underflows, still rank.
    Equal memberships go to the interval whose centre is nearer ``x``.
    """
    mu = model.log_memberships(float(x))
    top = mu.max()
    cands = np.flatnonzero(mu == top)
    if len(cands) > 1:
        dist = np.abs(model.centers[cands] - x)
        cands = cands[dist == dist.min()]
    return ABNORMAL if int(cands[0]) in model.ac else NORMAL
