#!/usr/bin/env python3
"""Print the computed-vs-published table for the worked two-level example.

Every constant of the transfer certificate for the pair (2, 1) under the x^2
coupling is recomputed from scratch and compared against its published value,
with the comparison rule and a match flag per row.  The one deliberate
mismatch is the coupling matrix element itself: direct quadrature gives twice
the published closed form, and all downstream computed values use the
quadrature-confirmed entries.

Usage:
    python3 scripts/case_study.py [--cutoff 40] [--json PATH]
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from bse_control.cli import PhysicalUnitReport, case_study_rows  # noqa: E402
from bse_control.moments import DEFAULT_HORIZON  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cutoff", type=int, default=40, help="truncation for the norms")
    ap.add_argument("--json", type=str, default=None, help="also write the rows here")
    args = ap.parse_args()

    rows = case_study_rows(args.cutoff)
    units = PhysicalUnitReport()

    name_w = max(len(r["quantity"]) for r in rows)
    print(f"{'quantity':<{name_w}}  {'computed':>13}  {'published':>13}  "
          f"{'rule':<24} match")
    print("-" * (name_w + 62))
    for r in rows:
        print(
            f"{r['quantity']:<{name_w}}  {r['computed']:>13.6g}  "
            f"{r['published']:>13.6g}  {r['rule']:<24} "
            f"{'yes' if r['match'] else 'NO'}"
        )
        if r["note"]:
            print(f"{'':<{name_w}}  note: {r['note']}")
    matches = sum(1 for r in rows if r["match"])
    print("-" * (name_w + 62))
    print(f"{matches}/{len(rows)} rows match")
    print(
        f"unit scale: 1 dimensionless time unit = {units.time_scale_seconds} s, "
        f"interval length = {units.length_scale_meters} m"
    )
    print(
        f"correction horizon 4/pi = {DEFAULT_HORIZON:.6f} "
        f"-> {units.seconds(DEFAULT_HORIZON):.6f} s"
    )

    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"rows": rows}, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0 if matches == len(rows) - 1 else 1


if __name__ == "__main__":
    raise SystemExit(main())
