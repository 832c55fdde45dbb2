"""DELB and DisLinUCB on a random unit-sphere instance across horizons.

Example:
    python scripts/linear_scaling.py --horizons 10000,100000 --seeds 3
    python scripts/linear_scaling.py --d 2 --n-actions 10 --protocols delb --horizons 100000,1000000
"""
import argparse
from pathlib import Path

import numpy as np

from distbandits.env import LinearInstance
from distbandits.harness import fmt
from distbandits.linear import delb_run, dislinucb_run, pooled_linucb_run

PROTOCOLS = {"delb": delb_run, "dislinucb": dislinucb_run, "linucb-pooled": pooled_linucb_run}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--n-actions", type=int, default=50)
    p.add_argument("--instance-seed", type=int, default=12345)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--horizons", default="10000,100000")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--protocols", default="delb,dislinucb")
    p.add_argument("--out", type=Path, help="optional CSV path")
    args = p.parse_args()

    inst = LinearInstance.random_sphere(args.d, args.n_actions, np.random.default_rng(args.instance_seed), args.sigma)
    lines = ["protocol,T,mean_final_regret,mean_final_comm,mean_events"]
    for name in args.protocols.split(","):
        for T in (int(h) for h in args.horizons.split(",")):
            results = [PROTOCOLS[name](inst, args.M, T, s) for s in range(args.seeds)]
            regret = np.mean([r.final_regret for r in results])
            comm = np.mean([r.comm_total for r in results])
            # completed DELB phases, or DisLinUCB sync rounds
            events = np.mean([sum(e["event"] in ("eliminate", "sync") for e in r.log) for r in results])
            lines.append(f"{name},{T},{fmt(regret)},{fmt(comm)},{fmt(events)}")
            print(lines[-1], flush=True)
    if args.out:
        args.out.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
