#!/usr/bin/env python3
"""Consolidate one fault cell into a static adapter and evaluate the transfer.

Collects stabilized (feature, residual) pairs from online episodes, fits the
ridge adapter, saves it, and compares frozen / online / adapter / online-on-
adapter performance on the same cell.
"""

import argparse
import os

from cerres import config as cfgmod
from cerres import harness
from cerres.consolidation import save_adapter


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--family", default="actuator_scale")
    p.add_argument("--severity", type=float, default=0.6)
    p.add_argument("--out", default="out/consolidation")
    p.add_argument("--full", action="store_true",
                   help="use the full-width feature expansion (slower)")
    args = p.parse_args()

    cfg = cfgmod.ExperimentConfig()
    if not args.full:
        cfg = cfgmod.fast_profile(cfg)
    calib = harness.calibrate(cfg)
    adapter = harness.consolidate_cell(cfg, calib, args.family, args.severity)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"adapter_{args.family}_{args.severity:g}.csv")
    save_adapter(adapter, path, {
        "fault_id": adapter.fault_id, "family": args.family,
        "severity": args.severity, "M": cfg.features.M, "seed": cfg.features.seed,
    })
    report = harness.evaluate_adapter(cfg, calib, adapter, args.family, args.severity)
    m = report["metrics"]
    for label in ("frozen", "ours", "adapter", "ours_on_adapter"):
        print(f"{label:>16}: mean_return={m[label]['mean_return']:.5f} "
              f"mean_eres={m[label]['mean_eres']:.4g}")
    ratio = m["ours_on_adapter"]["mean_eres"] / m["ours"]["mean_eres"]
    print(f"online residual energy on top of the adapter: {ratio:.1%} of baseline")
    print(f"adapter written to {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
