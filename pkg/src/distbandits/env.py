"""Bandit environments: ground-truth instances, reward sampling and gaps.

Rewards in the multi-armed setting are Bernoulli. Linear rewards are
``<x, theta*> + eta`` with ``eta`` uniform on ``[-sigma, sigma]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

NORM_TOL = 1e-12


class UsageError(ValueError):
    """Raised when an operation is called outside its contract."""


@dataclass(frozen=True)
class MabInstance:
    means: np.ndarray

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=float).copy()
        if means.ndim != 1 or means.size < 2:
            raise UsageError("a MAB instance needs at least two arms")
        if np.any(means < 0.0) or np.any(means > 1.0) or not np.all(np.isfinite(means)):
            raise UsageError("arm means must lie in [0, 1]")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)

    @property
    def K(self) -> int:
        return int(self.means.size)

    @property
    def best_arm(self) -> int:
        # np.argmax returns the lowest index among ties
        return int(np.argmax(self.means))

    @property
    def gaps(self) -> np.ndarray:
        return self.means.max() - self.means

    @classmethod
    def spaced(cls, K: int, low: float, high: float) -> "MabInstance":
        """Means evenly spaced on [low, high], best arm last."""
        return cls(np.linspace(low, high, K))


def _check_arm(instance: MabInstance, arm: int) -> int:
    if isinstance(arm, (bool, np.bool_)) or int(arm) != arm or not 0 <= arm < instance.K:
        raise UsageError(f"arm index {arm!r} out of range [0, {instance.K})")
    return int(arm)


def mab_sample(instance: MabInstance, arm: int, rng: np.random.Generator) -> float:
    """One Bernoulli reward for ``arm``."""
    arm = _check_arm(instance, arm)
    return float(rng.random() < instance.means[arm])


def mab_sample_sum(instance: MabInstance, arm: int, n: int, rng: np.random.Generator) -> int:
    """Sum of ``n`` independent rewards of ``arm`` (a single binomial draw)."""
    arm = _check_arm(instance, arm)
    if n < 0:
        raise UsageError("number of pulls must be nonnegative")
    if n == 0:
        return 0
    return int(rng.binomial(n, instance.means[arm]))


def mab_gap(instance: MabInstance, arm: int) -> float:
    arm = _check_arm(instance, arm)
    return float(instance.means.max() - instance.means[arm])


def _validate_actions(actions) -> np.ndarray:
    actions = np.array(actions, dtype=float)
    if actions.ndim != 2 or actions.shape[0] == 0 or actions.shape[1] == 0:
        raise UsageError("action set must be a non-empty (n, d) array")
    if not np.all(np.isfinite(actions)):
        raise UsageError("action vectors must be finite")
    if np.any(np.linalg.norm(actions, axis=1) > 1.0 + NORM_TOL):
        raise UsageError("every action must have Euclidean norm <= 1")
    actions.setflags(write=False)
    return actions


@dataclass(frozen=True)
class LinearInstance:
    actions: np.ndarray
    theta_star: np.ndarray
    noise_halfwidth: float = 1.0

    def __post_init__(self) -> None:
        actions = _validate_actions(self.actions)
        theta = np.array(self.theta_star, dtype=float).reshape(-1)
        if theta.size != actions.shape[1]:
            raise UsageError("theta_star dimension does not match the actions")
        if np.linalg.norm(theta) > 1.0 + NORM_TOL:
            raise UsageError("theta_star must have norm <= 1")
        theta.setflags(write=False)
        sigma = float(self.noise_halfwidth)
        if not 0.0 < sigma <= 1.0:
            raise UsageError("noise half-width must lie in (0, 1]")
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "noise_halfwidth", sigma)

    @property
    def d(self) -> int:
        return int(self.actions.shape[1])

    @property
    def n_actions(self) -> int:
        return int(self.actions.shape[0])

    @property
    def action_means(self) -> np.ndarray:
        return self.actions @ self.theta_star

    @property
    def gaps(self) -> np.ndarray:
        values = self.action_means
        return values.max() - values

    def index_of(self, action) -> int:
        x = np.asarray(action, dtype=float).reshape(-1)
        if x.size != self.d:
            raise UsageError("action has the wrong dimension")
        hits = np.flatnonzero(np.all(self.actions == x, axis=1))
        if hits.size == 0:
            raise UsageError("action is not a member of the action set")
        return int(hits[0])

    @classmethod
    def random_sphere(
        cls, d: int, n_actions: int, rng: np.random.Generator, noise_halfwidth: float = 1.0
    ) -> "LinearInstance":
        """Actions and theta* drawn uniformly from the unit sphere."""
        return cls(_unit_rows(rng, n_actions, d), _unit_rows(rng, 1, d)[0], noise_halfwidth)


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    # guard against norms landing a hair above one after division
    return x / np.maximum(1.0, np.linalg.norm(x, axis=1, keepdims=True))


def lin_noise(n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-sigma, sigma, size=n)


def lin_sample(instance: LinearInstance, action, rng: np.random.Generator) -> float:
    idx = instance.index_of(action)
    mean = float(instance.actions[idx] @ instance.theta_star)
    return mean + float(lin_noise(1, instance.noise_halfwidth, rng)[0])


def lin_gap(instance: LinearInstance, action) -> float:
    idx = instance.index_of(action)
    values = instance.action_means
    return float(values.max() - values[idx])


@dataclass
class ActionSetGenerator:
    """Source of the action set offered at each step.

    ``fixed`` mode returns the same list every step; otherwise ``sequence``
    maps a 1-based step index to an (n_t, d) array.
    """

    fixed: Optional[np.ndarray] = None
    sequence: Optional[Callable[[int], np.ndarray]] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if (self.fixed is None) == (self.sequence is None):
            raise UsageError("give exactly one of a fixed action set or a sequence")
        if self.fixed is not None:
            self.fixed = _validate_actions(self.fixed)

    @property
    def mode(self) -> str:
        return "fixed" if self.fixed is not None else "sequence"

    def at(self, t: int) -> np.ndarray:
        if self.fixed is not None:
            return self.fixed
        if t not in self._cache:
            self._cache.clear()
            self._cache[t] = _validate_actions(self.sequence(t))
        return self._cache[t]

    @classmethod
    def random_sphere(cls, d: int, n_per_step: int, seed: int) -> "ActionSetGenerator":
        """Fresh unit-sphere actions every step; reproducible from ``seed`` alone."""

        def draw(t: int) -> np.ndarray:
            rng = np.random.default_rng([seed, t])
            return _unit_rows(rng, n_per_step, d)

        return cls(sequence=draw)


@dataclass(frozen=True)
class VaryingLinearInstance:
    """Linear instance whose action set is drawn from a generator each step."""

    generator: ActionSetGenerator
    theta_star: np.ndarray
    noise_halfwidth: float = 1.0

    def __post_init__(self) -> None:
        theta = np.array(self.theta_star, dtype=float).reshape(-1)
        if np.linalg.norm(theta) > 1.0 + NORM_TOL:
            raise UsageError("theta_star must have norm <= 1")
        if not 0.0 < self.noise_halfwidth <= 1.0:
            raise UsageError("noise half-width must lie in (0, 1]")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "noise_halfwidth", float(self.noise_halfwidth))

    @property
    def d(self) -> int:
        return int(self.theta_star.size)


def as_varying(source) -> VaryingLinearInstance:
    if isinstance(source, VaryingLinearInstance):
        return source
    if isinstance(source, LinearInstance):
        return VaryingLinearInstance(
            ActionSetGenerator(fixed=source.actions), source.theta_star, source.noise_halfwidth
        )
    raise UsageError(f"expected a linear instance, got {type(source).__name__}")


def best_value(actions: np.ndarray, theta: np.ndarray) -> float:
    return float((actions @ theta).max())


__all__: Sequence[str] = [
    "UsageError",
    "MabInstance",
    "LinearInstance",
    "ActionSetGenerator",
    "mab_sample",
    "mab_sample_sum",
    "mab_gap",
    "lin_sample",
    "lin_gap",
    "lin_noise",
    "VaryingLinearInstance",
    "as_varying",
    "best_value",
]
