from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .comm import CommLedger


@dataclass
class RunResult:
    """Outcome of one simulated run.

    ``cumulative_regret[t]`` is the pseudo-regret summed over all agents up
    to and including step ``t + 1``; ``cumulative_comm`` is aligned the same
    way. ``trace[i, t]`` is the index of the action agent ``i`` played at
    step ``t + 1`` (an index into that step's action list for time-varying
    linear sets).
    """

    protocol: str
    M: int
    T: int
    seed: int
    cumulative_regret: np.ndarray
    cumulative_comm: np.ndarray
    comm_total: int
    comm_by_phase: list[tuple[str, int]]
    pull_counts: Optional[np.ndarray]
    trace: np.ndarray
    log: list[dict[str, Any]] = field(default_factory=list)

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret[-1])

    @property
    def final_comm(self) -> int:
        return int(self.comm_total)


def step_regret_from_trace(trace: np.ndarray, gaps: np.ndarray) -> np.ndarray:
    """Per-step regret summed over agents, for a fixed action set."""
    return gaps[trace].sum(axis=0)


def build_result(
    protocol: str,
    M: int,
    T: int,
    seed: int,
    trace: np.ndarray,
    step_regret: np.ndarray,
    ledger: CommLedger,
    n_actions: Optional[int],
    log: list[dict[str, Any]],
) -> RunResult:
    if trace.shape != (M, T):
        raise AssertionError(f"trace has shape {trace.shape}, expected {(M, T)}")
    counts = None if n_actions is None else np.bincount(trace.ravel(), minlength=n_actions)
    return RunResult(
        protocol=protocol,
        M=M,
        T=T,
        seed=seed,
        cumulative_regret=np.cumsum(step_regret),
        cumulative_comm=ledger.cumulative(T),
        comm_total=ledger.total_scalars,
        comm_by_phase=list(ledger.per_phase),
        pull_counts=counts,
        trace=trace,
        log=log,
    )
