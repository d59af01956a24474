#!/usr/bin/env python3
"""Phase-1 error scaling sweep: drive strength 1/n versus measured error.

For each n the script runs the periodic drive for the pair (j, k), scans the
short window around the nominal transfer time for the best fidelity, and
reports the measured distances against the certified bounds.  The squared
distance should decay like 1/n (log-log slope -1) and stay below the bound
computed from the published constants.

Usage:
    python3 scripts/steering_sweep.py [--ns 50 100 200 400] [--cutoff 12]
                                      [--pair 2 1] [--csv PATH]
"""

import argparse
import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np  # noqa: E402

from bse_control.bounds import approx_bound_L2, constants_for  # noqa: E402
from bse_control.spectral import coupling_x2  # noqa: E402
from bse_control.steering import SteeringPlan, approximate_steer  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--cutoff", type=int, default=12)
    ap.add_argument("--pair", type=int, nargs=2, default=[2, 1], metavar=("J", "K"))
    ap.add_argument("--csv", type=str, default=None)
    args = ap.parse_args()

    j, k = args.pair
    B = coupling_x2(args.cutoff)
    tab = constants_for(B, j, k, "tabulated")
    rows = []
    print(f"pair ({j},{k}), cutoff {args.cutoff}")
    print(f"{'n':>5}  {'T_n':>12}  {'err_L2':>10}  {'err^2':>10}  "
          f"{'bound on err^2':>14}  {'err_H3':>10}  {'secs':>6}")
    for n in args.ns:
        t0 = time.time()
        res = approximate_steer(SteeringPlan(j=j, k=k, n=n), B)
        bound_sq = approx_bound_L2(tab, j, k, n).bound
        dt = time.time() - t0
        rows.append((n, res.T_n, res.err_L2, res.err_L2**2, bound_sq, res.err_H3, dt))
        print(
            f"{n:>5}  {res.T_n:>12.4f}  {res.err_L2:>10.3e}  {res.err_L2**2:>10.3e}  "
            f"{bound_sq:>14.3e}  {res.err_H3:>10.3e}  {dt:>6.1f}"
        )

    if len(rows) >= 2:
        lx = [math.log(r[0]) for r in rows]
        ly = [math.log(r[2]) for r in rows]
        slope = float(np.polyfit(lx, ly, 1)[0])
        print(f"log-log slope of err_L2 vs n: {slope:.3f} (expect about -1)")

    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("n, T_n, err_L2, err_L2_sq, bound_err_sq, err_H3, seconds\n")
            for r in rows:
                fh.write(", ".join(repr(float(v)) for v in r) + "\n")
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
