"""Multi-armed bandit protocols.

``demab_run`` is distributed elimination: a communication-free burn-in,
then a random split of the surviving arms across agents, then synchronized
elimination phases. Phases run in distributed mode (each agent owns a
disjoint block of arms) until at most M arms remain, after which the server
holds the arms and schedules pulls directly (centralized mode).

Baselines: ``immediate_sharing_mab_run`` (every reward is forwarded to every
agent) and ``independent_run`` (no communication at all).
"""
from __future__ import annotations

import math
import warnings
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .comm import CommLedger, PublicRandomness, Server, agent_rng, agent_rngs, public_rand_assign, record_every_step
from .env import MabInstance, UsageError, mab_sample_sum
from .result import RunResult, build_result, step_regret_from_trace
from .tape import Tape


class SmallHorizonWarning(UserWarning):
    """T is below the range the burn-in constants were designed for."""


def phase_budget(l: int, M: int, K: int, T: int) -> int:
    """Pulls per arm in phase ``l``: ceil(4^(l+3) ln(MKT))."""
    if l < 1:
        raise UsageError("phases are numbered from 1")
    return math.ceil(4 ** (l + 3) * math.log(M * K * T))


def burn_in_params(T: int, M: int, K: int) -> tuple[int, int]:
    """Burn-in length D and the number of phases l0 it is credited with."""
    if T <= max(M * math.log(M) / K, M, K, 2):
        warnings.warn(
            f"T={T} is not larger than max(M ln M / K, M, K, 2) for M={M}, K={K}",
            SmallHorizonWarning,
            stacklevel=2,
        )
    D = -(-T // (M * K))
    ratio = 3 * D / (67 * K * math.log(M * K * T))
    l0 = max(0, math.floor(math.log(ratio) / math.log(4)))
    return D, l0


def elim_filter(phase_means: Mapping[int, float], l: int, u_star: float | None = None) -> list[int]:
    """Keep arms whose phase mean is within 2^-l of the best (``u_star``)."""
    if not phase_means:
        raise UsageError("no arms to filter")
    if u_star is None:
        u_star = max(phase_means.values())
    width = 2.0 ** -l
    return sorted(a for a, u in phase_means.items() if u + width >= u_star)


def is_balanced(counts: Sequence[int]) -> bool:
    if len(counts) == 0:
        raise UsageError("empty count vector")
    return max(counts) <= 2 * min(counts)


def _eliminate(
    arms: Iterable[int],
    steps: int,
    budget: Callable[[int], int],
    tape: Tape,
    draw: Callable[[int, int, int], int],
) -> list[int]:
    """Single-agent elimination for ``steps`` pulls on ``tape``.

    ``draw(arm, start, n)`` returns the reward sum of the ``n`` pulls starting
    at tape position ``start``. An unfinished phase is discarded.
    """
    active = sorted(arms)
    end = min(tape.used + steps, tape.capacity)
    l = 1
    while tape.used < end:
        m = budget(l)
        means = {}
        for a in active:
            start = tape.used
            if tape.pull(a, min(m, end - tape.used)) < m:
                return active
            means[a] = draw(a, start, m) / m
        active = elim_filter(means, l)
        l += 1
    return active


def _agent_draw(instance: MabInstance, rng: np.random.Generator) -> Callable[[int, int, int], int]:
    return lambda arm, start, n: mab_sample_sum(instance, arm, n, rng)


def single_elim_trace(
    instance: MabInstance,
    arms: Iterable[int],
    steps: int,
    rng: np.random.Generator,
    M: int,
    K: int,
    T: int,
) -> tuple[list[int], np.ndarray]:
    """Like :func:`single_elim_run` but also returns the pulled-arm sequence."""
    tape = Tape(steps)
    active = _eliminate(arms, steps, lambda l: phase_budget(l, M, K, T), tape, _agent_draw(instance, rng))
    return active, tape.array()


def single_elim_run(
    instance: MabInstance,
    arms: Iterable[int],
    steps: int,
    rng: np.random.Generator,
    M: int,
    K: int,
    T: int,
) -> list[int]:
    arms = list(arms)
    if any(not 0 <= a < instance.K for a in arms):
        raise UsageError("arm set must be a subset of [0, K)")
    return single_elim_trace(instance, arms, steps, rng, M, K, T)[0]


def reallocate(sets: Sequence[Sequence[int]], server: Server | None = None) -> list[list[int]]:
    """Rebalance per-agent arm sets through the server.

    Agents above the floor average donate their highest-index surplus arms;
    the server fills agents below the floor, then hands any leftovers to
    agents 1, 2, ... one each.
    """
    M = len(sets)
    sets = [sorted(s) for s in sets]
    N = sum(len(s) for s in sets)
    n_bar = N // M
    if server is not None:
        server.broadcast("reallocate-announce", 1, M)
    pool: list[int] = []
    for i, s in enumerate(sets):
        if len(s) > n_bar:
            surplus = len(s) - n_bar
            pool.extend(s[-surplus:])
            sets[i] = s[:-surplus]
    if server is not None:
        server.upload("reallocate-donate", len(pool))
    moved = len(pool)
    for i, s in enumerate(sets):
        if len(s) < n_bar:
            need = n_bar - len(s)
            s.extend(pool[:need])
            del pool[:need]
    for i in range(len(pool)):
        sets[i].append(pool[i])
    if server is not None:
        server.upload("reallocate-deliver", moved)
    sets = [sorted(s) for s in sets]
    if N >= M and not all(n_bar <= len(s) <= n_bar + 1 for s in sets):
        raise AssertionError(f"reallocate left unbalanced sizes {[len(s) for s in sets]}")
    return sets


def centralized_assign(arms: Sequence[int], m: int, M: int) -> list[tuple[int, int, int]]:
    """Schedule ``m`` pulls of every arm over ``M`` agents.

    Returns (agent, arm, pulls) entries with 0-based agents. Each agent
    carries at most ceil(m N / M) pulls; arms are taken in ascending order.
    """
    arms = sorted(arms)
    N = len(arms)
    if N == 0:
        return []
    quota = -(-m * N // M)
    schedule = []
    agent, load = 0, 0
    for arm in arms:
        left = m
        while left > 0:
            if load == quota:
                agent, load = agent + 1, 0
            k = min(left, quota - load)
            schedule.append((agent, arm, k))
            load += k
            left -= k
    return schedule


def _finish(tapes: Sequence[Tape], arm: int) -> None:
    for tape in tapes:
        tape.pull(arm, tape.remaining)


def demab_run(instance: MabInstance, M: int, T: int, seed: int, burn_in: bool = True) -> RunResult:
    if M < 1 or T < 1:
        raise UsageError("M and T must be positive")
    K = instance.K
    ledger = CommLedger()
    server = Server(ledger)
    rngs = agent_rngs(seed, M)
    tapes = [Tape(T) for _ in range(M)]
    log: list[dict] = []
    budget = lambda l: phase_budget(l, M, K, T)

    if burn_in:
        D, l0 = burn_in_params(T, M, K)
    else:
        D, l0 = 0, 0
    public = PublicRandomness.attach(seed, M, ledger)

    # stage 1: independent burn-in, no communication
    survivors = [_eliminate(range(K), D, budget, tapes[i], _agent_draw(instance, rngs[i])) for i in range(M)]
    clock = min(D, T)
    ledger.clock = clock
    log.append({"event": "burn-in", "D": D, "l0": l0, "survivors": [len(s) for s in survivors]})

    r = public_rand_assign(K, M, public)
    local = [sorted(a for a in survivors[i] if r[a] == i + 1) for i in range(M)]
    central: list[int] | None = None
    if not any(local):
        # every survivor landed on an agent that had dropped it: pool the survivors instead
        server.upload("centralize", sum(len(s) for s in survivors))
        server.broadcast("centralize", 1, M)
        central = sorted(set().union(*survivors))
        log.append({"event": "empty-allocation"})

    l = l0 + 1
    previous: set[int] | None = None
    while clock < T:
        m = budget(l)
        if central is None:
            sizes = [len(s) for s in local]
            server.upload("size-report", M)
            N = sum(sizes)
            if N <= M:
                server.upload("centralize", N)
                server.broadcast("centralize", 1, M)
                central = sorted(a for s in local for a in s)
                log.append({"event": "centralize", "phase": l, "N": N, "clock": clock})
            else:
                reallocated = not is_balanced(sizes)
                if reallocated:
                    local = reallocate(local, server)
                _check_distributed(local, previous)
                n_max = max(len(s) for s in local)
                server.broadcast("n-max", 1, M)
                log.append({
                    "event": "phase", "mode": "distributed", "phase": l, "m": m, "N": N,
                    "sizes": [len(s) for s in local], "reallocated": reallocated, "clock": clock,
                })
                complete = True
                maxima = []
                for i in range(M):
                    means = {}
                    for a in local[i]:
                        if tapes[i].pull(a, m) < m:
                            complete = False
                            break
                        means[a] = mab_sample_sum(instance, a, m, rngs[i]) / m
                    tapes[i].idle(local[i], (n_max - len(local[i])) * m)
                    maxima.append(means)
                if not complete or clock + n_max * m > T:
                    break
                clock += n_max * m
                ledger.clock = clock
                reports = server.exchange(
                    "phase-max",
                    [max(mm.items(), key=lambda kv: (kv[1], -kv[0])) for mm in maxima if mm],
                    lambda _: 2,
                )
                u_star = max(u for _, u in reports)
                server.broadcast("u-star", 1, M)
                previous = set().union(*local)
                local = [elim_filter(maxima[i], l, u_star) if local[i] else [] for i in range(M)]
                l += 1
                continue

        # centralized mode
        if len(central) == 1:
            log.append({"event": "single-arm", "arm": central[0], "clock": clock})
            _finish(tapes, central[0])
            break
        schedule = centralized_assign(central, m, M)
        quota = -(-m * len(central) // M)
        server.upload("assign", 2 * len(schedule))
        log.append({"event": "phase", "mode": "centralized", "phase": l, "m": m, "N": len(central), "clock": clock})
        sums = {a: 0 for a in central}
        counts = {a: 0 for a in central}
        complete = True
        for i in range(M):
            load = 0
            for agent, a, k in schedule:
                if agent != i:
                    continue
                if tapes[i].pull(a, k) < k:
                    complete = False
                    break
                sums[a] += mab_sample_sum(instance, a, k, rngs[i])
                counts[a] += k
                load += k
            tapes[i].idle([], quota - load)
        if not complete or clock + quota > T:
            break
        clock += quota
        ledger.clock = clock
        server.upload("report", len(schedule))
        if any(counts[a] < m for a in central):
            raise AssertionError("an arm received fewer than m_l pulls in centralized mode")
        central = elim_filter({a: sums[a] / counts[a] for a in central}, l)
        l += 1

    for tape in tapes:
        if tape.used != T:
            raise AssertionError(f"agent pulled {tape.used} times, expected {T}")
    remaining = central if central is not None else sorted(a for s in local for a in s)
    log.append({"event": "end", "remaining": remaining, "phase": l})
    trace = np.stack([tape.array() for tape in tapes])
    protocol = "demab" if burn_in else "demab-no-burnin"
    return build_result(protocol, M, T, seed, trace, step_regret_from_trace(trace, instance.gaps), ledger, K, log)


def _check_distributed(local: Sequence[Sequence[int]], previous: set[int] | None) -> None:
    seen: set[int] = set()
    for s in local:
        if seen.intersection(s):
            raise AssertionError("agent arm sets overlap in distributed mode")
        seen.update(s)
    if previous is not None and not seen <= previous:
        raise AssertionError("remaining arm set grew between phases")


def immediate_sharing_mab_run(instance: MabInstance, M: int, T: int, seed: int) -> RunResult:
    """Every pull's (arm, reward) is uploaded and forwarded to all other agents.

    All agents then hold the same pooled history, so they jointly run one
    elimination schedule over the interleaved sequence of M*T pulls: global
    pull ``g`` is made by agent ``g % M`` at step ``g // M``.
    """
    if M < 1 or T < 1:
        raise UsageError("M and T must be positive")
    K = instance.K
    rngs = agent_rngs(seed, M)
    ledger = CommLedger()

    def draw(arm: int, start: int, n: int) -> int:
        per_agent = np.bincount(np.arange(start, start + n) % M, minlength=M)
        return sum(mab_sample_sum(instance, arm, int(c), rngs[i]) for i, c in enumerate(per_agent))

    tape = Tape(M * T)
    _eliminate(range(K), M * T, lambda l: phase_budget(l, M, K, T), tape, draw)
    trace = tape.array().reshape(T, M).T.copy()

    record_every_step(ledger, [("share-upload", 2 * M), ("share-forward", 2 * M * (M - 1))], 1, T)
    return build_result("mab-immediate", M, T, seed, trace, step_regret_from_trace(trace, instance.gaps), ledger, K, [])


def independent_run(instance: MabInstance, M: int, T: int, seed: int) -> RunResult:
    """M agents each running single-agent elimination, with zero communication."""
    if M < 1 or T < 1:
        raise UsageError("M and T must be positive")
    K = instance.K
    traces = [single_elim_trace(instance, range(K), T, agent_rng(seed, i), 1, K, T)[1] for i in range(M)]
    trace = np.stack(traces)
    ledger = CommLedger()
    return build_result("mab-independent", M, T, seed, trace, step_regret_from_trace(trace, instance.gaps), ledger, K, [])
