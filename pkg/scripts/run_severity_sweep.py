#!/usr/bin/env python3
"""Full fault-grid sweep: every method on every (family, severity) cell.

Writes results.csv and summary.csv and prints the summary table.
"""

import argparse

from cerres import config as cfgmod
from cerres import harness


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="out/sweep")
    p.add_argument("--full", action="store_true",
                   help="use the full-width feature expansion (slower)")
    args = p.parse_args()

    cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
    if not args.full:
        cfg = cfgmod.fast_profile(cfg)
    calib = harness.calibrate(cfg)
    rows, summary = harness.run_sweep(cfg, calib, args.out)
    print(f"{len(rows)} result rows -> {args.out}/results.csv")
    for s in summary:
        rel = f"{s['rel_improvement']:+.2%}" if s["rel_improvement"] != "" else "  -  "
        print(f"{s['family']:>20} sev={s['severity']:<5g} {s['method']:>8} "
              f"return={s['mean_return']:.5f} rms={s['mean_rms']:.5f} rel={rel}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
