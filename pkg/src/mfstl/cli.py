"""Command-line entry point: ``mfstl synth | train | detect | sweep``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .evaluation import (DEFAULT_DW_GRID, DEFAULT_RC_GRID, cluster_sweep, param_sweep,
                         score_detector, write_cluster_csv)
from .flows import FlowFormatError, SynthConfig, parse_flows, synth_trace, write_flows
from .metrics import CHARACTERISTICS
from .pipeline import (ConfigError, Detector, RunConfig, check_compatible, detect, split_trace,
                       train)

log = logging.getLogger("mfstl")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

# flag dest -> RunConfig field
_KNOBS = {
    "dt": float, "dw": float, "rc": float, "m": int, "alpha": float, "beta": float,
    "tau_c": float, "epsilon": float, "split": float, "seed": int, "port_map": str,
    "node_mode": str, "edge_mode": str,
}


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END seconds, got {text!r}") from None


def _add_knobs(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model settings (default: config file, then built-in)")
    g.add_argument("--config", help="JSON file of RunConfig fields; flags override it")
    g.add_argument("--dt", type=float, help="sampling window in seconds (60)")
    g.add_argument("--dw", type=float, help="temporal locality window in seconds (0.1)")
    g.add_argument("--rc", type=float, help="similarity threshold for an edge (0.65)")
    g.add_argument("--m", type=int, help="clustering interval count (10)")
    g.add_argument("--alpha", type=float, help="boundary hesitation parameter (0.2)")
    g.add_argument("--beta", type=float, help="Yager complement exponent (0.8)")
    g.add_argument("--tau-c", dest="tau_c", type=float, help="distinction index threshold (0.5)")
    g.add_argument("--epsilon", type=float, help="Gaussian baseline significance (0.1)")
    g.add_argument("--split", type=float, help="chronological train fraction (0.75)")
    g.add_argument("--seed", type=int, help="random seed (0)")
    g.add_argument("--port-map", dest="port_map", help="port-to-service map file")
    g.add_argument("--node-mode", dest="node_mode", choices=("five-tuple", "two-tuple"))
    g.add_argument("--edge-mode", dest="edge_mode", choices=("WE", "UWE"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfstl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labeled flow trace")
    p.add_argument("--out", required=True, help="output flow CSV")
    p.add_argument("--duration", type=float, default=7200.0)
    p.add_argument("--rate", type=float, default=10.0, help="background flows per second")
    p.add_argument("--attack", type=_window, action="append", default=[],
                   help="attack window START:END in seconds (repeatable)")
    p.add_argument("--attack-rate", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a detector on the training split of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", required=True, help="model file to write")
    _add_knobs(p)

    p = sub.add_parser("detect", help="classify the test split of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--all", action="store_true", help="classify every sample, not just the test split")
    _add_knobs(p)

    p = sub.add_parser("sweep", help="parameter and clustering-interval sweeps")
    p.add_argument("--trace", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dw-grid", type=_float_list, default=list(DEFAULT_DW_GRID))
    p.add_argument("--rc-grid", type=_float_list, default=list(DEFAULT_RC_GRID))
    p.add_argument("--m-grid", type=_int_list, default=list(range(2, 13)))
    p.add_argument("--max-samples", type=int, default=None,
                   help="limit the parameter sweep to the first N samples")
    p.add_argument("--workers", type=int, default=1)
    _add_knobs(p)
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, list[str]]:
    """Merge defaults, the optional config file and explicit flags (flags win)."""
    cfg = RunConfig()
    explicit: list[str] = []
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        cfg = RunConfig.from_dict({**cfg.to_dict(), **data})
        explicit.extend(data)
    for name in _KNOBS:
        value = getattr(args, name, None)
        if value is not None:
            cfg = replace(cfg, **{name: value})
            explicit.append(name)
    for name in ("trace", "model", "out_dir"):
        if getattr(args, name, None) is not None:
            cfg = replace(cfg, **{name: getattr(args, name)})
    cfg.validate()
    return cfg, explicit


def _load_trace(path: str):
    if not os.path.isfile(path):
        raise ConfigError(f"trace not found: {path}")
    return parse_flows(path)


def _ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from None


def cmd_synth(args) -> int:
    cfg = SynthConfig(duration=args.duration, rate=args.rate, attack_windows=list(args.attack),
                      attack_rate=args.attack_rate, seed=args.seed)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    records = synth_trace(cfg)
    try:
        write_flows(records, args.out)
    except OSError as exc:
        raise ConfigError(f"cannot write {args.out}: {exc}") from None
    log.info("wrote %d flows to %s", len(records), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, _ = resolve_config(args)
    split = split_trace(_load_trace(cfg.trace), cfg)
    det = train(split.train, cfg)
    try:
        det.save(cfg.model)
    except OSError as exc:
        raise ConfigError(f"cannot write model {cfg.model}: {exc}") from None
    sel = ", ".join(CHARACTERISTICS[i] for i in det.ensemble.selected)
    print(f"trained on {len(split.train)} samples; selected: {sel}")
    return EXIT_OK


def _summaries(results, truths) -> list[tuple[str, object]]:
    rows = [("ifse-ad", score_detector([r.decision.verdict for r in results], truths))]
    for prefix, attr in (("ifs-ad", "single"), ("gaussian", "gaussian")):
        for k, name in enumerate(CHARACTERISTICS):
            verdicts = [getattr(r, attr)[k] for r in results]
            if any(v is None for v in verdicts):
                continue
            rows.append((f"{prefix}:{name}", score_detector(verdicts, truths)))
    return rows


def cmd_detect(args) -> int:
    cfg, explicit = resolve_config(args)
    try:
        det = Detector.load(cfg.model)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load model {cfg.model}: {exc}") from None
    check_compatible(det.config, cfg, explicit)
    run_cfg = replace(det.config, **{k: getattr(cfg, k) for k in explicit if k == "split"})
    split = split_trace(_load_trace(cfg.trace), run_cfg)
    samples = split.train + split.test if args.all else split.test
    if any(p.label is None for p in samples):
        raise ValueError("trace must be labeled to score detections")
    results = detect(det, samples)
    _ensure_dir(cfg.out_dir)
    with open(os.path.join(cfg.out_dir, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sample_index", "truth", "verdict", "S_abnormal", "S_normal",
                    "H_abnormal", "H_normal"))
        for r in results:
            s_ab, s_no = r.decision.scores
            h_ab, h_no = r.decision.precisions
            w.writerow((r.index, r.truth, r.decision.verdict,
                        repr(s_ab), repr(s_no), repr(h_ab), repr(h_no)))
    truths = [p.label for p in samples]
    summaries = _summaries(results, truths)
    with open(os.path.join(cfg.out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("detector", "TP", "TN", "FP", "FN", "acc", "pre", "rec", "f1"))
        for name, s in summaries:
            c = s.counts
            w.writerow((name, c.tp, c.tn, c.fp, c.fn, f"{s.acc:.4f}", f"{s.pre:.4f}",
                        f"{s.rec:.4f}", f"{s.f1:.4f}"))
    best = summaries[0][1]
    print(f"IFSE-AD on {len(samples)} samples: Acc {best.acc:.4f} Pre {best.pre:.4f} "
          f"Rec {best.rec:.4f} F1 {best.f1:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, _ = resolve_config(args)
    _ensure_dir(cfg.out_dir)
    split = split_trace(_load_trace(cfg.trace), cfg)
    samples = split.train + split.test
    det = train(split.train, cfg)
    subset = samples[: args.max_samples] if args.max_samples else samples
    grid = param_sweep(subset, args.dw_grid, args.rc_grid, det.weights, cfg.build_params(),
                       cfg.load_port_map(), workers=args.workers)
    grid.write_csv(os.path.join(cfg.out_dir, "param_sweep.csv"))
    rows = cluster_sweep(split.train, split.test, args.m_grid, cfg)
    write_cluster_csv(os.path.join(cfg.out_dir, "cluster_sweep.csv"), rows)
    print(f"swept {len(args.dw_grid)}x{len(args.rc_grid)} grid and {len(rows)} interval counts")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "detect": cmd_detect, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"mfstl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FlowFormatError, OSError) as exc:
        print(f"mfstl: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
