"""Metered star network between agents and a server.

Every scalar (integer or real) that crosses the network is charged one unit
to a :class:`CommLedger`. Protocol code never hands one agent's state to
another directly: exchanged values go through :meth:`Server.exchange`, which
charges the ledger before returning them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .env import UsageError

PUBLIC_STREAM_KEY = 0


@dataclass
class CommLedger:
    total_scalars: int = 0
    per_phase: list[tuple[str, int]] = field(default_factory=list)
    # (clock, count) pairs; clock = number of completed time steps
    events: list[tuple[int, int]] = field(default_factory=list)
    clock: int = 0

    def by_label(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for label, count in self.per_phase:
            out[label] = out.get(label, 0) + count
        return out

    def cumulative(self, T: int) -> np.ndarray:
        """Scalars sent up to and including the gap after each step 1..T."""
        per_step = np.zeros(T + 1, dtype=np.int64)
        for clock, count in self.events:
            per_step[min(clock, T)] += count
        # transfers before step 1 are folded into the step-1 row
        per_step[1] += per_step[0] if T > 0 else 0
        return np.cumsum(per_step[1:])


def record_transfer(ledger: CommLedger, phase: str, count: int) -> CommLedger:
    """Charge ``count`` scalars to ``ledger`` under ``phase``. Mutates and returns it."""
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise UsageError("a transfer must carry at least one scalar")
    count = int(count)
    ledger.total_scalars += count
    if ledger.per_phase and ledger.per_phase[-1][0] == phase:
        label, prev = ledger.per_phase[-1]
        ledger.per_phase[-1] = (label, prev + count)
    else:
        ledger.per_phase.append((phase, count))
    if ledger.events and ledger.events[-1][0] == ledger.clock:
        ledger.events[-1] = (ledger.clock, ledger.events[-1][1] + count)
    else:
        ledger.events.append((ledger.clock, count))
    return ledger


def record_every_step(ledger: CommLedger, charges: list[tuple[str, int]], first: int, last: int) -> CommLedger:
    """Charge the same ``charges`` after every step ``first..last``, in bulk."""
    charges = [(label, int(c)) for label, c in charges if c > 0]
    steps = last - first + 1
    if steps <= 0 or not charges:
        return ledger
    if ledger.events and ledger.events[-1][0] >= first:
        raise UsageError("bulk charges must come after all earlier transfers")
    per_step = sum(c for _, c in charges)
    for label, c in charges:
        ledger.per_phase.append((label, c * steps))
    ledger.events.extend((t, per_step) for t in range(first, last + 1))
    ledger.total_scalars += per_step * steps
    ledger.clock = last
    return ledger


class Server:
    """Mediator for all cross-agent traffic; charges the ledger per scalar."""

    def __init__(self, ledger: CommLedger) -> None:
        self.ledger = ledger

    def upload(self, phase: str, count: int) -> None:
        if count > 0:
            record_transfer(self.ledger, phase, count)

    def broadcast(self, phase: str, per_agent: int, M: int) -> None:
        if per_agent * M > 0:
            record_transfer(self.ledger, phase, per_agent * M)

    def exchange(self, phase: str, payloads: list, size) -> list:
        """Collect one payload per agent, charging ``size(payload)`` scalars each."""
        total = sum(int(size(p)) for p in payloads)
        if total > 0:
            record_transfer(self.ledger, phase, total)
        return payloads


class PublicRandomness:
    """Seeded stream every party can read identically.

    ``attach`` charges one seed scalar per agent, standing in for a public
    random number generator.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self._rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(PUBLIC_STREAM_KEY,)))
        )

    @classmethod
    def attach(cls, seed: int, M: int, ledger: CommLedger) -> "PublicRandomness":
        record_transfer(ledger, "seed-broadcast", M)
        return cls(seed)

    def integers(self, low: int, high: int, size: int) -> np.ndarray:
        return self._rng.integers(low, high, size=size, endpoint=True)


def public_rand_assign(K: int, M: int, stream: PublicRandomness) -> np.ndarray:
    """Draw r_1..r_K uniformly from {1, ..., M}."""
    if K < 1 or M < 1:
        raise UsageError("K and M must be positive")
    return stream.integers(1, M, K).astype(np.int64)


def agent_rng(seed: int, agent: int) -> np.random.Generator:
    """Private stream of ``agent`` (0-based); independent of M and of the public stream."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(1 + int(agent),)))
    )


def agent_rngs(seed: int, M: int) -> list[np.random.Generator]:
    return [agent_rng(seed, i) for i in range(M)]

