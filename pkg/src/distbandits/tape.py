from __future__ import annotations

from typing import Sequence

import numpy as np


class Tape:
    """One agent's pull sequence, capped at ``capacity`` steps."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.used = 0
        self._chunks: list[np.ndarray] = []

    @property
    def remaining(self) -> int:
        return self.capacity - self.used

    @property
    def last(self) -> int | None:
        return int(self._chunks[-1][-1]) if self._chunks else None

    def pull(self, arm: int, n: int) -> int:
        k = min(n, self.remaining)
        if k > 0:
            self._chunks.append(np.full(k, arm, dtype=np.int32))
            self.used += k
        return k

    def cycle(self, arms: Sequence[int], n: int) -> int:
        k = min(n, self.remaining)
        if k > 0:
            self._chunks.append(np.resize(np.asarray(arms, dtype=np.int32), k))
            self.used += k
        return k

    def idle(self, own: Sequence[int], n: int) -> int:
        """Filler pulls: round-robin over ``own``, else repeat the last arm."""
        if own:
            return self.cycle(own, n)
        return self.pull(self.last if self.last is not None else 0, n)

    def array(self) -> np.ndarray:
        if not self._chunks:
            return np.zeros(0, dtype=np.int32)
        return np.concatenate(self._chunks)
