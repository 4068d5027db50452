"""End-to-end training and detection over sampled flow traces."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .ensemble import (DEFAULT_EPSILON, DEFAULT_TAU_C, IFWA, EnsembleModel, GaussianBaseline,
                       StateDecision, ifse_ad_classify, select_and_weight)
from .flows import (ABNORMAL, DEFAULT_DT, DEFAULT_LABEL_THRESHOLD, DEFAULT_SPLIT, FIVE_TUPLE,
                    FlowRecord, SamplePartition, label_samples, partition_samples,
                    split_chronological)
from .graph import DEFAULT_DW, DEFAULT_RC, WE, BuildParams
from .ifs import (DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_M, CharacteristicModel,
                  InsufficientDataError, ifs_ad_classify, train_characteristic)
from .metrics import CHARACTERISTICS, characteristic_series
from .similarity import DEFAULT_PAIR_CAP, ServicePortMap, SimilarityWeights, train_entropy_weights

log = logging.getLogger(__name__)

MODEL_FORMAT = "mfstl-model/1"

# knobs that change what a sample's characteristic vector means
GRAPH_KEYS = ("dt", "dw", "rc", "node_mode", "edge_mode", "protocols", "label_threshold")


class ConfigError(ValueError):
    """Invalid or incompatible run configuration."""


@dataclass
class RunConfig:
    trace: Optional[str] = None
    model: Optional[str] = None
    out_dir: Optional[str] = None
    dt: float = DEFAULT_DT
    dw: float = DEFAULT_DW
    rc: float = DEFAULT_RC
    m: int = DEFAULT_M
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    tau_c: float = DEFAULT_TAU_C
    epsilon: float = DEFAULT_EPSILON
    split: float = DEFAULT_SPLIT
    node_mode: str = FIVE_TUPLE
    edge_mode: str = WE
    protocols: Optional[list] = field(default_factory=lambda: [6, 17])
    label_threshold: float = DEFAULT_LABEL_THRESHOLD
    collapse: str = IFWA
    pair_cap: int = DEFAULT_PAIR_CAP
    seed: int = 0
    port_map: Optional[str] = None

    def validate(self) -> None:
        checks = [
            (self.dt > 0, "dt must be positive"),
            (self.m >= 2, "m must be at least 2"),
            (0 <= self.alpha < 1, "alpha must lie in [0, 1)"),
            (0 < self.beta <= 1, "beta must lie in (0, 1]"),
            (0 <= self.tau_c <= 1, "tau-c must lie in [0, 1]"),
            (0 < self.epsilon < 1, "epsilon must lie in (0, 1)"),
            (0 < self.split < 1, "split must lie in (0, 1)"),
            (0 <= self.label_threshold <= 1, "label threshold must lie in [0, 1]"),
            (self.collapse in ("ifwa", "max"), "collapse must be 'ifwa' or 'max'"),
            (self.pair_cap >= 2, "pair cap must be at least 2"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            self.build_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def build_params(self) -> BuildParams:
        protocols = None if self.protocols is None else frozenset(self.protocols)
        return BuildParams(self.dw, self.rc, self.node_mode, self.edge_mode, protocols)

    def load_port_map(self) -> ServicePortMap:
        return ServicePortMap.load(self.port_map) if self.port_map else ServicePortMap.default()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def prepare_samples(records: Sequence[FlowRecord], cfg: RunConfig) -> list[SamplePartition]:
    samples = partition_samples(records, cfg.dt)
    return label_samples(samples, cfg.label_threshold)


@dataclass
class Detector:
    """Everything ``detect`` needs, as written to the model file."""

    config: RunConfig
    weights: SimilarityWeights
    models: list
    ensemble: EnsembleModel
    baselines: list
    train_series: np.ndarray = field(repr=False, default=None)
    train_labels: list = field(repr=False, default_factory=list)

    @property
    def params(self) -> BuildParams:
        return self.config.build_params()

    def to_dict(self) -> dict:
        chars = []
        for name, mdl, base in zip(CHARACTERISTICS, self.models, self.baselines):
            chars.append({
                "name": name,
                "status": "trained" if mdl is not None else "untrainable",
                "model": mdl.to_dict() if mdl is not None else None,
                "gaussian": asdict(base) if base is not None else None,
            })
        return {
            "format": MODEL_FORMAT,
            "version": __version__,
            "config": self.config.to_dict(),
            "similarity_weights": asdict(self.weights),
            "build_params": {"dw": self.config.dw, "rc": self.config.rc,
                             "node_mode": self.config.node_mode,
                             "edge_mode": self.config.edge_mode,
                             "protocols": self.config.protocols},
            "characteristics": chars,
            "ensemble": self.ensemble.to_dict(),
        }

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "Detector":
        if d.get("format") != MODEL_FORMAT:
            raise ConfigError(f"not a model file (format {d.get('format')!r})")
        cfg = RunConfig.from_dict(d["config"])
        models = [CharacteristicModel.from_dict(c["model"]) if c["model"] else None
                  for c in d["characteristics"]]
        baselines = [GaussianBaseline(**c["gaussian"]) if c["gaussian"] else None
                     for c in d["characteristics"]]
        e = d["ensemble"]
        ens = EnsembleModel(models, e["selected"], e["weights"], e["tau_c"],
                            e["collapse"], e["degenerate"])
        return cls(cfg, SimilarityWeights(**d["similarity_weights"]), models, ens, baselines)

    @classmethod
    def load(cls, path: str) -> "Detector":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _train_one(name: str, values: np.ndarray, labels: list, cfg: RunConfig) -> Optional[CharacteristicModel]:
    distinct = len(np.unique(values))
    m = min(cfg.m, distinct)
    while m >= 2:
        try:
            return train_characteristic(name, values, labels, m, cfg.alpha, cfg.beta)
        except InsufficientDataError:
            m -= 1
    log.warning("characteristic %s has %d distinct training values; left untrained", name, distinct)
    return None


def fit_models(series: np.ndarray, labels: list, cfg: RunConfig) -> tuple[list, list]:
    """Fuzzy model and Gaussian baseline per characteristic row of ``series``."""
    models, baselines = [], []
    normal_count = sum(lab != ABNORMAL for lab in labels)
    for k, name in enumerate(CHARACTERISTICS):
        row = series[k]
        models.append(_train_one(name, row, labels, cfg))
        baselines.append(GaussianBaseline.fit(row, labels, cfg.epsilon) if normal_count >= 2 else None)
    return models, baselines


def train(train_samples: Sequence[SamplePartition], cfg: RunConfig,
          port_map: Optional[ServicePortMap] = None,
          series: Optional[np.ndarray] = None,
          weights: Optional[SimilarityWeights] = None) -> Detector:
    """Train on labeled samples.

    ``series`` and ``weights`` may be passed in to reuse work across runs
    that only change the fuzzy-model knobs.
    """
    cfg.validate()
    if len(train_samples) < 2:
        raise ValueError("need at least 2 training samples")
    labels = [p.label for p in train_samples]
    if any(lab is None for lab in labels):
        raise ValueError("training samples must be labeled")
    port_map = port_map or cfg.load_port_map()
    params = cfg.build_params()
    if weights is None:
        weights = train_entropy_weights(train_samples, params.dw, port_map, params.protocols,
                                        params.node_mode, cfg.pair_cap)
    if series is None:
        series = characteristic_series(train_samples, params, weights, port_map)
    models, baselines = fit_models(series, labels, cfg)
    ens = select_and_weight(models, cfg.tau_c, cfg.collapse)
    return Detector(cfg, weights, models, ens, baselines, series, labels)


@dataclass(frozen=True)
class SampleResult:
    index: int
    truth: Optional[str]
    decision: StateDecision
    single: tuple
    gaussian: tuple


def classify_series(det: Detector, series: np.ndarray, samples: Sequence[SamplePartition]) -> list[SampleResult]:
    out = []
    for k, p in enumerate(samples):
        obs = series[:, k]
        single = tuple(ifs_ad_classify(obs[i], m) if m is not None else None
                       for i, m in enumerate(det.models))
        gauss = tuple(b.detect(obs[i]) if b is not None else None
                      for i, b in enumerate(det.baselines))
        out.append(SampleResult(p.index, p.label, ifse_ad_classify(obs, det.ensemble), single, gauss))
    return out


def detect(det: Detector, samples: Sequence[SamplePartition],
           port_map: Optional[ServicePortMap] = None) -> list[SampleResult]:
    port_map = port_map or det.config.load_port_map()
    series = characteristic_series(samples, det.params, det.weights, port_map)
    return classify_series(det, series, samples)


def check_compatible(model_cfg: RunConfig, run_cfg: RunConfig, explicit: Sequence[str]) -> None:
    """Refuse graph settings that differ from the ones the model was trained with."""
    for key in GRAPH_KEYS:
        if key in explicit and getattr(model_cfg, key) != getattr(run_cfg, key):
            raise ConfigError(
                f"model was trained with {key}={getattr(model_cfg, key)!r}, "
                f"run requests {getattr(run_cfg, key)!r}")


def split_trace(records: Sequence[FlowRecord], cfg: RunConfig):
    samples = prepare_samples(records, cfg)
    return split_chronological(samples, cfg.split)
