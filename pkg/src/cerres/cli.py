"""Command-line entry point.

Subcommands: calibrate, run, sweep, consolidate, report.
Exit codes: 0 success, 2 config error, 3 numerical divergence,
4 missing prerequisite artifact.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from . import config as cfgmod
from . import harness
from .consolidation import load_adapter, save_adapter
from .errors import (
    ConfigError,
    MissingArtifactError,
    NonFiniteInputError,
    NumericalDivergenceError,
)
from .plant import FaultSpec
from .reference import save_reference_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_MISSING = 4


def _load_config(args) -> cfgmod.ExperimentConfig:
    if args.config:
        cfg = cfgmod.load(args.config)
    else:
        cfg = cfgmod.ExperimentConfig()
    if args.fast:
        cfg = cfgmod.fast_profile(cfg)
    if getattr(args, "method", None):
        cfg.sweep.methods = tuple(args.method.split(","))
    if getattr(args, "seed", None) is not None:
        cfg.sweep.seeds = (args.seed,)
    if getattr(args, "ablate", None):
        for flag in args.ablate.split(","):
            flag = flag.strip()
            if flag not in cfgmod.ABLATION_FLAGS:
                raise ConfigError(f"unknown ablation flag {flag!r}")
            setattr(cfg.ablation, flag, True)
    if args.out:
        cfg.out_dir = args.out
    return cfg


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    calib = harness.calibrate(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    save_reference_csv(calib.reference, os.path.join(cfg.out_dir, "reference.csv"))
    with open(os.path.join(cfg.out_dir, "calibration.txt"), "w") as f:
        f.write(f"dominant_joint={calib.estimator.dominant_joint}\n")
        f.write(f"velocity_scale={calib.estimator.velocity_scale!r}\n")
        f.write(f"smoothing={calib.estimator.smoothing!r}\n")
        f.write(f"r_nom={calib.r_nom!r}\n")
        f.write(f"nominal_return={calib.nominal_return!r}\n")
        f.write(f"nominal_rms={calib.nominal_rms!r}\n")
    print(f"calibration written to {cfg.out_dir} "
          f"(nominal return {calib.nominal_return:.6f}, rms {calib.nominal_rms:.6f})")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    calib = harness.calibrate(cfg)
    fault = None
    if args.family:
        fault = FaultSpec(family=args.family, severity=args.severity,
                          onset_step=cfg.sweep.onset_step,
                          removal_step=cfg.sweep.removal_step if cfg.sweep.removal_step >= 0 else None)
    method = cfg.sweep.methods[0]
    seed = cfg.sweep.seeds[0]
    res = harness.run_episode(cfg, calib, method, fault, seed, 0)
    print(f"method={method} seed={seed} return={res.return_:.6f} "
          f"rms={res.rms_error:.6f} e_res={res.e_res:.6g}")
    if res.meta_trace:
        os.makedirs(cfg.out_dir, exist_ok=True)
        harness.write_meta_trace(os.path.join(cfg.out_dir, "meta_trace.csv"), res.meta_trace)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    calib = harness.calibrate(cfg)
    rows, summary = harness.run_sweep(cfg, calib, cfg.out_dir)
    print(f"{len(rows)} result rows, {len(summary)} summary rows -> {cfg.out_dir}")
    return EXIT_OK


def cmd_consolidate(args) -> int:
    cfg = _load_config(args)
    calib = harness.calibrate(cfg)
    adapter = harness.consolidate_cell(cfg, calib, args.family, args.severity)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"adapter_{args.family}_{args.severity:g}.csv")
    save_adapter(adapter, path, {
        "fault_id": adapter.fault_id, "family": args.family,
        "severity": args.severity, "M": cfg.features.M, "seed": cfg.features.seed,
    })
    report = harness.evaluate_adapter(cfg, calib, adapter, args.family, args.severity)
    for label, m in report["metrics"].items():
        print(f"{label}: mean_return={m['mean_return']:.6f} mean_eres={m['mean_eres']:.6g}")
    print(f"adapter written to {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load_config(args)
    path = os.path.join(cfg.out_dir, "results.csv")
    if not os.path.exists(path):
        raise MissingArtifactError(f"no results at {path}; run sweep first")
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    for r in rows:
        r["success"] = int(r["success"])
    summary = harness.summarize(rows)
    harness._write_csv(os.path.join(cfg.out_dir, "summary.csv"), harness.SUMMARY_COLUMNS, summary)
    for s in summary:
        rel = f"{s['rel_improvement']:+.2%}" if s["rel_improvement"] != "" else "   -  "
        print(f"{s['family']:>20} sev={s['severity']:<5g} {s['method']:>8} "
              f"return={s['mean_return']:.5f}±{s['std_return']:.5f} "
              f"rms={s['mean_rms']:.5f} rel={rel}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cerres", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--fast", action="store_true")
        sp.add_argument("--method", type=str, default=None)
        sp.add_argument("--ablate", type=str, default=None)

    sp = sub.add_parser("calibrate", help="build reference and nominal baselines")
    common(sp)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("run", help="run a single cell")
    common(sp)
    sp.add_argument("--family", type=str, default=None)
    sp.add_argument("--severity", type=float, default=0.6)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run the full fault grid")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("consolidate", help="fit and evaluate a static adapter")
    common(sp)
    sp.add_argument("--family", type=str, required=True)
    sp.add_argument("--severity", type=float, required=True)
    sp.set_defaults(func=cmd_consolidate)

    sp = sub.add_parser("report", help="summarize result CSVs")
    common(sp)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalDivergenceError, NonFiniteInputError) as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
