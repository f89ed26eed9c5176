#!/usr/bin/env python3
"""Width campaigns for every material and coupling regime studied here.

Each campaign sweeps ribbon width at fixed (material, L, U, V) and writes one
CSV per campaign into the output directory.  A one-line summary with the
straight-line quality of 1/C versus width is printed as each finishes, since
the inverse-width law is the headline trend for the insulating regimes.

Run `python3 scripts/run_figure_campaigns.py --help` for knobs.  The full
default grid (widths 3..28, eight campaigns) takes a while on one core;
use --widths and --only to cut it down.
"""

import argparse
import pathlib
import sys
import time

import numpy as np

from nanocap.driver import SweepConfig, run_sweep
from nanocap.scf import ScfControls

# name -> (material, length, u, v)
CAMPAIGNS = {
    "sp-semiconducting": ("C", 20, 1.0, 0.0),
    "sp-metallic": ("C", 18, 1.0, 0.0),
    "cp-semiconducting": ("C", 20, 0.0, 0.5),
    "cp-metallic": ("C", 18, 0.0, 0.5),
    "bn-u0": ("BN", 20, 0.0, 0.0),
    "bn-u1": ("BN", 20, 1.0, 0.0),
    "bn-u2": ("BN", 20, 2.0, 0.0),
    "bcn-u0": ("BCN", 20, 0.0, 0.0),
    "bcn-u1": ("BCN", 20, 1.0, 0.0),
}


def inverse_width_fit(rows) -> float:
    rows = [r for r in rows if r.converged]
    if len(rows) < 3:
        return float("nan")
    x = np.array([r.width_angstrom for r in rows])
    y = np.array([1.0 / r.c_natural for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - slope * x - intercept) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot


def parse_widths(text: str) -> tuple[int, ...]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(tok) for tok in text.split(","))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results", type=pathlib.Path)
    parser.add_argument("--widths", default="3..28", type=parse_widths,
                        help="row counts, 'lo..hi' or comma list")
    parser.add_argument("--only", default=None,
                        help="substring filter on campaign names")
    parser.add_argument("--jobs", default=1, type=int)
    parser.add_argument("--delta-v", default=0.01, type=float)
    parser.add_argument("--tol", default=1e-8, type=float)
    parser.add_argument("--max-iter", default=5000, type=int)
    args = parser.parse_args(argv)

    names = [n for n in CAMPAIGNS if args.only is None or args.only in n]
    if not names:
        print(f"no campaign matches {args.only!r}", file=sys.stderr)
        return 1
    args.out_dir.mkdir(parents=True, exist_ok=True)
    controls = ScfControls(tol=args.tol, max_iter=args.max_iter)

    for name in names:
        material, length, u, v = CAMPAIGNS[name]
        config = SweepConfig(
            material=material, length=length, n_rows=args.widths,
            u=u, v=v, delta_v=args.delta_v, controls=controls,
            out_path=args.out_dir / f"{name}.csv", jobs=args.jobs)
        t0 = time.time()
        rows = run_sweep(config)
        n_ok = sum(r.converged for r in rows)
        print(f"{name:18s} {material:3s} L={length} U={u} V={v}: "
              f"R2(1/C vs W)={inverse_width_fit(rows):.5f} "
              f"converged {n_ok}/{len(rows)} "
              f"[{time.time() - t0:.0f}s] -> {config.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
