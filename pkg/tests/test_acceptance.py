"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary lists one
PASS/FAIL line per criterion.
"""
import math
import time

import mpmath
import numpy as np
import pytest

from distbandits.comm import agent_rng
from distbandits.design import core_set_bound, g_value, solve_g_optimal, span_dim
from distbandits.env import LinearInstance, MabInstance
from distbandits.linear import (
    conf_radius,
    delb_run,
    dislinucb_run,
    pooled_linucb_run,
    regression,
)
from distbandits.mab import demab_run, immediate_sharing_mab_run, independent_run, single_elim_trace

pytestmark = pytest.mark.slow

SEEDS = range(20)
MAB_M, MAB_K = 8, 16
MAB_HORIZONS = (20_000, 200_000)
LIN_D, LIN_N, LIN_M = 5, 50, 4
LIN_HORIZONS = (10_000, 100_000)
LIN_INSTANCE_SEED = 12345


def linear_instance(sigma: float = 1.0) -> LinearInstance:
    return LinearInstance.random_sphere(LIN_D, LIN_N, np.random.default_rng(LIN_INSTANCE_SEED), sigma)


@pytest.fixture(scope="module")
def demab_runs():
    inst = MabInstance.spaced(MAB_K, 0.2, 0.8)
    start = time.perf_counter()
    runs = {T: [demab_run(inst, MAB_M, T, s) for s in SEEDS] for T in MAB_HORIZONS}
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def sharing_runs():
    inst = MabInstance.spaced(MAB_K, 0.2, 0.8)
    return {T: [immediate_sharing_mab_run(inst, MAB_M, T, s) for s in SEEDS] for T in MAB_HORIZONS}


@pytest.fixture(scope="module")
def delb_runs():
    inst = linear_instance()
    return {T: [delb_run(inst, LIN_M, T, s) for s in range(10)] for T in LIN_HORIZONS}


def test_demab_communication_independent_of_horizon(demab_runs, report):
    runs, elapsed = demab_runs
    short, long = (np.mean([r.comm_total for r in runs[T]]) for T in MAB_HORIZONS)
    cap = 50 * MAB_M * math.log(MAB_M * MAB_K)
    ratio = max(short, long) / min(short, long)
    ok = ratio <= 1.25 and max(short, long) <= cap and elapsed <= 120
    report(1, ok, f"mean comm {short:.1f} vs {long:.1f} (ratio {ratio:.2f} <= 1.25), cap {cap:.0f}, {elapsed:.1f}s")
    assert ratio <= 1.25
    assert max(short, long) <= cap
    assert elapsed <= 120


def test_demab_regret_shape(demab_runs, sharing_runs, report):
    runs, _ = demab_runs
    lines, ok = [], True
    for T in MAB_HORIZONS:
        ours = np.mean([r.final_regret for r in runs[T]])
        base = np.mean([r.final_regret for r in sharing_runs[T]])
        bound = 30 * math.sqrt(MAB_M * MAB_K * T * math.log(T))
        ok &= ours <= bound and ours <= 2 * base
        lines.append(f"T={T}: {ours:.0f} (bound {bound:.0f}, sharing {base:.0f})")
    report(2, ok, "; ".join(lines))
    assert ok


def test_single_agent_reduction(report):
    inst = MabInstance.spaced(8, 0.3, 0.7)
    T = 100_000
    matches = 0
    for seed in range(10):
        res = demab_run(inst, 1, T, seed, burn_in=False)
        _, trace = single_elim_trace(inst, range(inst.K), T, agent_rng(seed, 0), 1, inst.K, T)
        matches += bool(np.array_equal(res.trace[0], trace))
    report(3, matches == 10, f"{matches}/10 traces bitwise equal")
    assert matches == 10


def test_best_arm_survives(report):
    inst = MabInstance.spaced(8, 0.3, 0.8)
    survived = sum(inst.best_arm in demab_run(inst, 4, 20_000, s).log[-1]["remaining"] for s in range(200))
    report(4, survived >= 190, f"best arm survived {survived}/200 runs")
    assert survived >= 190


def test_rebalance_invariant(demab_runs, report):
    runs, _ = demab_runs
    checked, bad = 0, 0
    for results in runs.values():
        for res in results:
            for e in res.log:
                if e["event"] == "phase" and e["mode"] == "distributed" and e["reallocated"]:
                    checked += 1
                    n_bar = e["N"] // MAB_M
                    bad += not all(n_bar <= n <= n_bar + 1 for n in e["sizes"])
    report(5, checked > 0 and bad == 0, f"{checked} reallocations checked, {bad} violations")
    assert checked > 0 and bad == 0


def test_g_optimal_postconditions(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    failures, spanning = 0, 0
    for _ in range(100):
        d = int(rng.integers(2, 11))
        n = int(rng.integers(1, 201))
        X = rng.standard_normal((n, d))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        design = solve_g_optimal(X)
        g = g_value(design, X)
        ok = g <= 2 * d and len(design.support) <= core_set_bound(d)
        if span_dim(X) == d:
            spanning += 1
            ok &= g >= d * (1 - 1e-9)
        failures += not ok
    elapsed = time.perf_counter() - start
    report(6, failures == 0 and elapsed <= 60, f"{failures} failures over 100 sets ({spanning} spanning), {elapsed:.1f}s")
    assert failures == 0
    assert elapsed <= 60


def test_delb_communication_scaling(delb_runs, report):
    short, long = (np.mean([r.comm_total for r in delb_runs[T]]) for T in LIN_HORIZONS)
    d, M = LIN_D, LIN_M
    caps = [10 * (M * d + d * math.log(math.log(d))) * math.log(T) for T in LIN_HORIZONS]
    ratio = long / short
    ok = ratio <= 1.6 and short <= caps[0] and long <= caps[1]
    report(7, ok, f"mean comm {short:.0f} -> {long:.0f} (ratio {ratio:.2f}), caps {caps[0]:.0f}/{caps[1]:.0f}")
    assert ok


def test_delb_regret(delb_runs, report):
    lines, ok = [], True
    for T in LIN_HORIZONS:
        mean = np.mean([r.final_regret for r in delb_runs[T]])
        bound = 30 * LIN_D * math.sqrt(LIN_M * T * math.log(T))
        ok &= mean <= bound
        lines.append(f"T={T}: {mean:.0f} vs {bound:.0f}")

    # the noiseless run needs a horizon long enough to finish phase 1
    quiet = linear_instance(sigma=1e-12)
    res = delb_run(quiet, LIN_M, 1_000_000, 0)
    first = next((e for e in res.log if e["event"] == "eliminate"), None)
    best = int(np.argmax(quiet.action_means))
    clean = first is not None and first["phase"] == 1 and first["kept"] == [best]
    kept = "phase 1 unfinished" if first is None else f"{len(first['kept'])} actions kept after phase 1"
    lines.append(f"noiseless: {kept}")
    report(8, ok and clean, "; ".join(lines))
    assert ok
    assert clean


def test_dislinucb_epochs_and_comm(report):
    inst = linear_instance()
    short = dislinucb_run(inst, LIN_M, LIN_HORIZONS[0], 0)
    long = dislinucb_run(inst, LIN_M, LIN_HORIZONS[1], 0)
    rounds = sum(e["event"] == "sync" for e in long.log)
    cap = 10 * math.sqrt(LIN_M) * LIN_D
    ratio = max(short.comm_total, long.comm_total) / min(short.comm_total, long.comm_total)
    ok = rounds <= cap and ratio <= 2
    report(9, ok, f"{rounds} sync rounds (cap {cap:.0f}); comm {short.comm_total} vs {long.comm_total}")
    assert ok


def test_dislinucb_vs_pooled(report):
    inst = linear_instance()
    T = 2000
    ours = np.mean([dislinucb_run(inst, LIN_M, T, s).final_regret for s in SEEDS])
    pooled = np.mean([pooled_linucb_run(inst, LIN_M, T, s).final_regret for s in SEEDS])
    report(10, ours <= 3 * pooled, f"mean regret {ours:.0f} vs pooled {pooled:.0f} (ratio {ours / pooled:.2f})")
    assert ours <= 3 * pooled


def test_regression_and_radius_oracles(report):
    rng = np.random.default_rng(11)
    worst = 0.0
    for d in range(1, 9):
        theta = rng.uniform(-1, 1, d)
        X = rng.standard_normal((2 * d + 3, d))
        est, _ = regression(X, X @ theta)
        worst = max(worst, float(np.max(np.abs(est - theta))))

    mpmath.mp.dps = 40
    radius_err = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 9))
        A = rng.standard_normal((d, d))
        lam = float(rng.uniform(0.1, 3.0))
        V = lam * np.eye(d) + A @ A.T
        delta = float(rng.uniform(1e-8, 0.9))
        direct = mpmath.sqrt(
            2 * mpmath.log(mpmath.sqrt(mpmath.det(mpmath.matrix(V.tolist()))) * mpmath.mpf(lam) ** (-d / 2) / delta)
        ) + mpmath.sqrt(lam)
        radius_err = max(radius_err, abs(conf_radius(V, lam, delta) - float(direct)))
    ok = worst <= 1e-9 and radius_err <= 1e-12
    report(11, ok, f"max theta error {worst:.1e}, max radius error {radius_err:.1e}")
    assert ok


def test_independent_agents_pay_without_communication(report):
    K, M, T = 16, 16, 100_000
    gap = math.sqrt(K / T)
    inst = MabInstance(np.r_[np.full(K - 1, 0.5 - gap), 0.5])
    ours = np.mean([demab_run(inst, M, T, s).final_regret for s in SEEDS])
    alone = np.mean([independent_run(inst, M, T, s).final_regret for s in SEEDS])
    ratio = alone / ours
    report(12, ratio >= 1.5, f"independent {alone:.0f} vs demab {ours:.0f} (ratio {ratio:.2f} >= 1.5)")
    assert ratio >= 1.5
