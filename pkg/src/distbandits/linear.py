"""Linear bandit protocols.

* ``delb_run``: phased elimination. Each phase every party solves the same
  approximate G-optimal design on the surviving actions, the server splits
  the prescribed pulls across agents, and a least-squares estimate from the
  pooled phase data drives elimination.
* ``dislinucb_run``: every agent runs optimistic LinUCB on its own view of
  the data; a synchronization round merges all views whenever one agent's
  log-det growth times elapsed time crosses a threshold.
* ``pooled_linucb_run``: the same with a round forced after every step.
"""
from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence

import numpy as np

from .comm import CommLedger, Server, agent_rng, agent_rngs
from .design import Design, solve_g_optimal, span_basis
from .env import LinearInstance, UsageError, as_varying, lin_noise
from .result import RunResult, build_result, step_regret_from_trace
from .tape import Tape

DELB_C1 = 600
RIDGE = 1.0


class NumericError(ArithmeticError):
    """A matrix that must be positive definite (or invertible) is not."""


# ---------------------------------------------------------------- DELB pieces


def delb_pull_counts(design: Design, l: int, d: int, M: int, T: int) -> dict[int, int]:
    """ceil(600 * 4^l * d^2 * pi(x) * ln(MT)) pulls per support point."""
    if l < 1:
        raise UsageError("phases are numbered from 1")
    scale = DELB_C1 * 4**l * d * d * math.log(M * T)
    return {i: math.ceil(scale * w) for i, w in zip(design.support, design.weights.tolist())}


def delb_assign(pull_counts: Mapping[int, int], M: int) -> list[tuple[int, int, int]]:
    """Split pulls over agents, largest request first.

    Returns (agent, action, pulls) entries with 0-based agents; each agent
    carries at most ceil(total / M) pulls.
    """
    if not pull_counts:
        raise UsageError("nothing to assign")
    order = sorted(pull_counts, key=lambda a: (-pull_counts[a], a))
    quota = -(-sum(pull_counts.values()) // M)
    schedule = []
    agent, load = 0, 0
    for a in order:
        left = pull_counts[a]
        while left > 0:
            if load == quota:
                agent, load = agent + 1, 0
            k = min(left, quota - load)
            schedule.append((agent, a, k))
            load += k
            left -= k
    return schedule


def regression(
    actions,
    rewards,
    basis: Optional[np.ndarray] = None,
    counts=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Unregularized least squares restricted to ``basis`` (default: span of the actions).

    ``rewards[k]`` may be an average over ``counts[k]`` samples of
    ``actions[k]``. Returns (theta_hat embedded in R^d, V = sum c x x^T).
    """
    X = np.asarray(actions, dtype=float)
    y = np.asarray(rewards, dtype=float).reshape(-1)
    c = np.ones(X.shape[0]) if counts is None else np.asarray(counts, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size or c.size != y.size:
        raise UsageError("actions, rewards and counts must align")
    Q = span_basis(X) if basis is None else np.asarray(basis, dtype=float)
    V = (X * c[:, None]).T @ X
    Y = X @ Q
    Vq = Q.T @ V @ Q
    b = Y.T @ (c * y)
    try:
        L = np.linalg.cholesky(Vq)
    except np.linalg.LinAlgError as exc:
        raise NumericError("design matrix is singular on the working span") from exc
    coef = np.linalg.solve(L.T, np.linalg.solve(L, b))
    return Q @ coef, V


def delb_eliminate(active: Sequence[int], actions, theta_hat, l: int) -> list[int]:
    """Keep actions whose estimated deficit to the best is at most 2^(1-l)."""
    if len(active) == 0:
        raise UsageError("no actions to eliminate from")
    X = np.asarray(actions, dtype=float)
    values = X[list(active)] @ np.asarray(theta_hat, dtype=float)
    deficit = values.max() - values
    width = 2.0 ** (1 - l)
    return [a for a, gap in zip(active, deficit) if gap <= width]


def _filler_action(entries, means, active, X, theta_prev) -> int:
    if entries:
        return max(entries, key=lambda a: (means[a], -a))
    if theta_prev is not None:
        return active[int(np.argmax(X[active] @ theta_prev))]
    return active[0]


def delb_run(instance: LinearInstance, M: int, T: int, seed: int) -> RunResult:
    if not isinstance(instance, LinearInstance):
        raise UsageError("DELB needs a fixed action set")
    if M < 1 or T < 1:
        raise UsageError("M and T must be positive")
    X = instance.actions
    d = instance.d
    values = instance.action_means
    sigma = instance.noise_halfwidth
    ledger = CommLedger()
    server = Server(ledger)
    rngs = agent_rngs(seed, M)
    tapes = [Tape(T) for _ in range(M)]
    log: list[dict] = []

    active = list(range(instance.n_actions))
    theta_prev: Optional[np.ndarray] = None
    clock, l = 0, 1
    while clock < T:
        if len(active) == 1:
            log.append({"event": "single-action", "action": active[0], "clock": clock})
            for tape in tapes:
                tape.pull(active[0], tape.remaining)
            break
        # server and agents solve the same deterministic problem: no traffic
        design = solve_g_optimal(X[active])
        support = [active[j] for j in design.support]
        counts_by_pos = delb_pull_counts(design, l, d, M, T)
        pull_counts = {active[j]: k for j, k in counts_by_pos.items()}
        schedule = delb_assign(pull_counts, M)
        quota = -(-sum(pull_counts.values()) // M)
        # (support index, pulls) per schedule entry
        server.upload("assign", 2 * len(schedule))
        log.append({
            "event": "phase", "phase": l, "active": len(active), "support": len(support),
            "pulls": sum(pull_counts.values()), "clock": clock,
        })

        sums = {a: 0.0 for a in support}
        got = {a: 0 for a in support}
        complete = True
        for i in range(M):
            mine = [(a, k) for agent, a, k in schedule if agent == i]
            local_means = {}
            load = 0
            for a, k in mine:
                if tapes[i].pull(a, k) < k:
                    complete = False
                    break
                s = k * values[a] + lin_noise(k, sigma, rngs[i]).sum()
                sums[a] += s
                got[a] += k
                local_means[a] = s / k
                load += k
            filler = _filler_action(list(local_means), local_means, active, X, theta_prev)
            tapes[i].pull(filler, quota - load)
        if not complete or clock + quota > T:
            break
        clock += quota
        ledger.clock = clock
        # (support index, mean, count) per schedule entry
        server.upload("report", 3 * len(schedule))
        if any(got[a] != pull_counts[a] for a in support):
            raise AssertionError("support action did not receive its prescribed pulls")

        means = np.array([sums[a] / got[a] for a in support])
        theta_hat, _ = regression(X[support], means, span_basis(X[active]), [got[a] for a in support])
        server.broadcast("theta", d, M)
        theta_prev = theta_hat
        survivors = delb_eliminate(active, X, theta_hat, l)
        if not set(survivors) <= set(active):
            raise AssertionError("active set grew")
        log.append({"event": "eliminate", "phase": l, "kept": list(survivors), "clock": clock})
        active = survivors
        l += 1

    trace = np.stack([tape.array() for tape in tapes])
    return build_result("delb", M, T, seed, trace, step_regret_from_trace(trace, instance.gaps), ledger, instance.n_actions, log)


# ------------------------------------------------------------ LinUCB pieces


def _logdet_pd(V: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(V)
    if sign <= 0:
        raise NumericError("matrix is not positive definite")
    return float(logdet)


def conf_radius(V_bar, lam: float, delta: float) -> float:
    """Radius of the self-normalized confidence ellipsoid around the ridge estimate."""
    V_bar = np.asarray(V_bar, dtype=float)
    if not 0.0 < delta < 1.0:
        raise UsageError("delta must lie in (0, 1)")
    try:
        np.linalg.cholesky(V_bar)
    except np.linalg.LinAlgError as exc:
        raise NumericError("V_bar is not positive definite") from exc
    return _radius(_logdet_pd(V_bar), V_bar.shape[0], lam, delta)


def _radius(logdet: float, d: int, lam: float, delta: float) -> float:
    log_ratio = 0.5 * logdet - 0.5 * d * math.log(lam)
    return math.sqrt(2.0 * (log_ratio - math.log(delta))) + math.sqrt(lam)


def ridge_estimate(V_bar: np.ndarray, U: np.ndarray) -> np.ndarray:
    return np.linalg.solve(V_bar, U)


def ucb_select(actions, theta_hat, V_bar, beta: float) -> int:
    """argmax_x <x, theta_hat> + beta * ||x||_{V_bar^{-1}}; lowest index wins ties."""
    X = np.asarray(actions, dtype=float)
    if X.shape[0] == 0:
        raise UsageError("empty action set")
    Z = np.linalg.solve(V_bar, X.T)
    widths = np.sqrt(np.maximum(np.einsum("ij,ji->i", X, Z), 0.0))
    return int(np.argmax(X @ theta_hat + beta * widths))


def sync_check(V_t, V_last, t: int, t_last: int, threshold: float) -> bool:
    """True when ln(det V_t / det V_last) * (t - t_last) exceeds ``threshold``."""
    growth = _logdet_pd(np.asarray(V_t, dtype=float)) - _logdet_pd(np.asarray(V_last, dtype=float))
    return growth * (t - t_last) > threshold


def dislinucb_threshold(M: int, T: int, d: int) -> float:
    return T * math.log(M * T) / (d * M)


def _sym_scalars(d: int) -> int:
    return d * (d + 1) // 2


def dislinucb_run(
    source,
    M: int,
    T: int,
    seed: int,
    *,
    threshold: Optional[float] = None,
    force_sync: bool = False,
    delta: Optional[float] = None,
    protocol: str = "dislinucb",
) -> RunResult:
    """Distributed LinUCB with determinant-triggered synchronization.

    ``source`` is a LinearInstance (fixed actions) or a VaryingLinearInstance.
    ``threshold`` overrides T ln(MT) / (d M); ``math.inf`` disables syncing.
    """
    if M < 1 or T < 1:
        raise UsageError("M and T must be positive")
    inst = as_varying(source)
    d = inst.d
    theta = inst.theta_star
    sigma = inst.noise_halfwidth
    lam = RIDGE
    delta = 1.0 / (M * M * T) if delta is None else delta
    D = dislinucb_threshold(M, T, d) if threshold is None else threshold
    fixed = inst.generator.mode == "fixed"
    n_fixed = inst.generator.fixed.shape[0] if fixed else None

    ledger = CommLedger()
    server = Server(ledger)
    rngs = agent_rngs(seed, M)
    eye = lam * np.eye(d)
    W_syn = [np.zeros((d, d)) for _ in range(M)]
    U_syn = [np.zeros(d) for _ in range(M)]
    W_new = [np.zeros((d, d)) for _ in range(M)]
    U_new = [np.zeros(d) for _ in range(M)]
    t_last = 0
    logdet_last = [d * math.log(lam)] * M
    trace = np.zeros((M, T), dtype=np.int32)
    step_regret = np.zeros(T)
    log: list[dict] = []
    payload = _sym_scalars(d) + d

    for t in range(1, T + 1):
        A = inst.generator.at(t)
        values = A @ theta
        best = values.max()
        fired = []
        regret = 0.0
        for i in range(M):
            V_bar = eye + W_syn[i] + W_new[i]
            logdet = _logdet_pd(V_bar)
            theta_hat = ridge_estimate(V_bar, U_syn[i] + U_new[i])
            beta = _radius(logdet, d, lam, delta)
            j = ucb_select(A, theta_hat, V_bar, beta)
            x = A[j]
            y = values[j] + lin_noise(1, sigma, rngs[i])[0]
            trace[i, t - 1] = j
            regret += best - values[j]
            W_new[i] = W_new[i] + np.outer(x, x)
            U_new[i] = U_new[i] + x * y
            if not force_sync:
                growth = _logdet_pd(eye + W_syn[i] + W_new[i]) - logdet_last[i]
                if growth * (t - t_last) > D:
                    fired.append(i)
        step_regret[t - 1] = regret

        if force_sync or fired:
            ledger.clock = t
            server.upload("sync-signal", len(fired))
            uploads = server.exchange("sync-upload", [(W_new[i], U_new[i]) for i in range(M)], lambda _: payload)
            W_total = W_syn[0] + sum(w for w, _ in uploads)
            U_total = U_syn[0] + sum(u for _, u in uploads)
            server.broadcast("sync-download", payload, M)
            for i in range(M):
                W_syn[i] = W_total.copy()
                U_syn[i] = U_total.copy()
                W_new[i] = np.zeros((d, d))
                U_new[i] = np.zeros(d)
            if any(not (np.array_equal(W_syn[i], W_syn[0]) and np.array_equal(U_syn[i], U_syn[0])) for i in range(M)):
                raise AssertionError("agents disagree on the synchronized statistics")
            t_last = t
            logdet_last = [_logdet_pd(eye + W_total)] * M
            if not force_sync:
                log.append({"event": "sync", "t": t, "fired": fired})

    return build_result(protocol, M, T, seed, trace, step_regret, ledger, n_fixed, log)


def pooled_linucb_run(source, M: int, T: int, seed: int) -> RunResult:
    """Immediate-sharing baseline: a synchronization round after every step."""
    return dislinucb_run(source, M, T, seed, force_sync=True, protocol="linucb-pooled")


def single_linucb_trace(source, T: int, seed: int, delta: float) -> np.ndarray:
    """Plain single-agent LinUCB on agent 0's stream; returns the action indices."""
    inst = as_varying(source)
    d = inst.d
    rng = agent_rng(seed, 0)
    W = np.zeros((d, d))
    U = np.zeros(d)
    out = np.zeros(T, dtype=np.int32)
    for t in range(1, T + 1):
        A = inst.generator.at(t)
        values = A @ inst.theta_star
        V_bar = RIDGE * np.eye(d) + W
        j = ucb_select(A, ridge_estimate(V_bar, U), V_bar, conf_radius(V_bar, RIDGE, delta))
        y = values[j] + lin_noise(1, inst.noise_halfwidth, rng)[0]
        W = W + np.outer(A[j], A[j])
        U = U + A[j] * y
        out[t - 1] = j
    return out
