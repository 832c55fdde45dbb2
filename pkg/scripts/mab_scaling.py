"""Communication and regret of DEMAB and its baselines across horizons.

Example:
    python scripts/mab_scaling.py --M 8 --K 16 --horizons 20000,200000 --seeds 20
    python scripts/mab_scaling.py --M 2 --K 4 --horizons 100000,1000000,10000000 --seeds 10
"""
import argparse
import csv
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from distbandits.env import MabInstance
from distbandits.harness import fmt
from distbandits.mab import SmallHorizonWarning, burn_in_params, demab_run, immediate_sharing_mab_run, independent_run

PROTOCOLS = {
    "demab": demab_run,
    "mab-immediate": immediate_sharing_mab_run,
    "mab-independent": independent_run,
}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--M", type=int, default=8)
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--low", type=float, default=0.2)
    p.add_argument("--high", type=float, default=0.8)
    p.add_argument("--horizons", default="20000,200000")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--protocols", default=",".join(PROTOCOLS))
    p.add_argument("--out", type=Path, help="optional CSV path")
    args = p.parse_args()

    inst = MabInstance.spaced(args.K, args.low, args.high)
    horizons = [int(h) for h in args.horizons.split(",")]
    rows = []
    warnings.simplefilter("ignore", SmallHorizonWarning)
    print(f"M={args.M} K={args.K} comm cap 50 M ln(MK) = {50 * args.M * math.log(args.M * args.K):.0f}")
    print(f"{'protocol':>16} {'T':>9} {'D':>7} {'l0':>3} {'regret':>12} {'comm':>12}")
    for name in args.protocols.split(","):
        for T in horizons:
            results = [PROTOCOLS[name](inst, args.M, T, s) for s in range(args.seeds)]
            regret = float(np.mean([r.final_regret for r in results]))
            comm = float(np.mean([r.comm_total for r in results]))
            D, l0 = burn_in_params(T, args.M, args.K)
            print(f"{name:>16} {T:>9} {D:>7} {l0:>3} {regret:>12.1f} {comm:>12.1f}")
            rows.append([name, T, fmt(regret), fmt(comm)])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["protocol", "T", "mean_final_regret", "mean_final_comm"])
            writer.writerows(rows)
        print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
