"""Solve G-optimal designs on random action sets and report g / d' and support sizes."""
import argparse
import time

import numpy as np

from distbandits.design import core_set_bound, g_value, solve_g_optimal, span_dim


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sets", type=int, default=100)
    p.add_argument("--max-d", type=int, default=10)
    p.add_argument("--max-n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    ratios, fill = [], []
    start = time.perf_counter()
    for _ in range(args.sets):
        d = int(rng.integers(2, args.max_d + 1))
        X = rng.standard_normal((int(rng.integers(1, args.max_n + 1)), d))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        r = span_dim(X)
        des = solve_g_optimal(X)
        ratios.append(g_value(des, X) / r)
        fill.append(len(des.support) / core_set_bound(r))
    print(f"{args.sets} sets in {time.perf_counter() - start:.2f}s")
    print(f"g/d': min {min(ratios):.4f} max {max(ratios):.4f} (target <= 2)")
    print(f"support / bound: max {max(fill):.3f}")


if __name__ == "__main__":
    main()
