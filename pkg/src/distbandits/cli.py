"""Command line entry point: ``distbandits run|sweep|validate CONFIG``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .env import UsageError
from .harness import ConfigError, dump_config, emit_csv, emit_sweep_csv, fmt, parse_config, run, sweep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distbandits", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("config", type=Path)
        sp.add_argument("--seed", type=int, help="override the base seed")
        sp.add_argument("--replications", type=int, help="override the replication count")
        sp.add_argument("--out", type=Path, default=Path("results"), help="output directory")

    common(sub.add_parser("run", help="run every replication and write runs.csv + summary.csv"))
    sp = sub.add_parser("sweep", help="run at several horizons with matched seeds")
    common(sp)
    sp.add_argument("--horizons", required=True, help="comma separated, ascending, e.g. 10000,100000")
    sub.add_parser("validate", help="parse a config and print its normalized form").add_argument("config", type=Path)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = parse_config(args.config.read_text())
        if args.command == "validate":
            sys.stdout.write(dump_config(cfg))
            return 0
        overrides = {k: getattr(args, k) for k in ("seed", "replications") if getattr(args, k) is not None}
        if overrides:
            cfg = cfg.replace(**overrides)
        if args.command == "run":
            results = run(cfg)
            runs_path, summary_path = emit_csv(results, args.out)
            for res in results:
                print(f"seed={res.seed} regret={fmt(res.final_regret)} comm={res.final_comm}")
            print(f"wrote {runs_path} and {summary_path}")
        else:
            horizons = [int(h) for h in args.horizons.split(",") if h.strip()]
            rows = sweep(cfg, horizons)
            print("T,mean_final_regret,mean_final_comm")
            for row in rows:
                print(f"{row.T},{fmt(row.mean_final_regret)},{fmt(row.mean_final_comm)}")
            print(f"wrote {emit_sweep_csv(rows, args.out)}")
    except (ConfigError, UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
