"""Approximate G-optimal design on a finite action set.

The solver works in coordinates of the span of the actions, starts from a
greedy basis of d' linearly independent points with uniform weight and runs
Frank-Wolfe (Fedorov-Wynn) steps on log det V(pi) until

    g(pi) = max_x x^T V(pi)^{-1} x <= 2 d'.

If the support then exceeds the allowed core-set size, a Caratheodory
reduction removes points without increasing g. Everything is deterministic:
argmax ties go to the lowest index, so every party solving the same action
list obtains the same design.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .env import UsageError

RANK_TOL = 1e-10
PRUNE_TOL = 1e-8
MAX_ITER = 100_000


class DesignError(RuntimeError):
    """The solver failed to reach the approximation target."""


@dataclass(frozen=True)
class Design:
    support: tuple[int, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        support = tuple(int(i) for i in self.support)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if len(support) != weights.size or not support:
            raise UsageError("support and weights must be non-empty and the same length")
        if len(set(support)) != len(support):
            raise UsageError("support indices must be distinct")
        if np.any(weights <= 0.0):
            raise UsageError("design weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise UsageError("design weights must sum to one")
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support, self.weights.tolist()))


def core_set_bound(d: int) -> int:
    """Largest support the solver may return for a d-dimensional span."""
    if d < 3:
        return d * (d + 1) // 2
    return math.ceil(48 * d * math.log(math.log(d)))


def span_basis(actions) -> np.ndarray:
    """Orthonormal basis (d x d') of the span of the rows of ``actions``."""
    X = np.asarray(actions, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError("need a non-empty (n, d) action array")
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    # relative tolerance: the rank of an action set does not depend on its scale
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0.0 else 0
    if rank == 0:
        raise UsageError("action set has rank zero")
    return vt[:rank].T


def _leverage(Y: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """x^T V^{-1} x for every row of Y, with V = sum_i w_i y_i y_i^T."""
    V = (Y * weights[:, None]).T @ Y
    try:
        L = np.linalg.cholesky(V)
    except np.linalg.LinAlgError as exc:
        raise UsageError("design moment matrix is singular on the span") from exc
    Z = np.linalg.solve(L, Y.T)
    return np.einsum("ij,ij->j", Z, Z)


def g_value(design: Design, actions) -> float:
    X = np.asarray(actions, dtype=float)
    Y = X @ span_basis(X)
    w = np.zeros(Y.shape[0])
    if max(design.support) >= Y.shape[0]:
        raise UsageError("design support index outside the action list")
    w[list(design.support)] = design.weights
    s = np.linalg.svd(Y[list(design.support)], compute_uv=False)
    if s.size < Y.shape[1] or s[Y.shape[1] - 1] <= RANK_TOL * s[0]:
        raise UsageError("design moment matrix is singular on the span")
    return float(_leverage(Y, w).max())


def _greedy_basis(Y: np.ndarray) -> list[int]:
    R = Y.copy()
    chosen = []
    for _ in range(Y.shape[1]):
        norms = np.einsum("ij,ij->i", R, R)
        i = int(np.argmax(norms))
        chosen.append(i)
        q = R[i] / math.sqrt(norms[i])
        R -= np.outer(R @ q, q)
    return chosen


def _sym_features(Y: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(Y.shape[1])
    return np.stack([np.outer(y, y)[iu] for y in Y], axis=1)


def _caratheodory(Y: np.ndarray, w: np.ndarray, target: int) -> np.ndarray:
    """Drop support points until at most ``target`` remain.

    Moves along null directions of the map c -> sum c_i y_i y_i^T, oriented
    so the total mass never grows; renormalizing then can only shrink g.
    """
    c = w.copy()
    while np.count_nonzero(c) > target:
        S = np.flatnonzero(c)
        Phi = _sym_features(Y[S])
        if Phi.shape[1] <= Phi.shape[0]:
            break
        z = np.linalg.svd(Phi)[2][-1]
        if z.sum() < 0:
            z = -z
        pos = z > 1e-14
        if not pos.any():
            break
        ratios = np.full(S.size, np.inf)
        ratios[pos] = c[S][pos] / z[pos]
        k = int(np.argmin(ratios))
        c[S] = np.maximum(c[S] - ratios[k] * z, 0.0)
        c[S[k]] = 0.0
    return c / c.sum()


def _solve_in_span(Y: np.ndarray) -> np.ndarray:
    n, r = Y.shape
    w = np.zeros(n)
    w[_greedy_basis(Y)] = 1.0 / r
    target = 2.0 * r
    for _ in range(MAX_ITER):
        lev = _leverage(Y, w)
        j = int(np.argmax(lev))
        g = float(lev[j])
        if g <= target:
            break
        gamma = (g / r - 1.0) / (g - 1.0)
        w *= 1.0 - gamma
        w[j] += gamma
    else:
        raise DesignError(f"no 2-approximate design after {MAX_ITER} iterations")

    pruned = np.where(w < PRUNE_TOL, 0.0, w)
    if np.count_nonzero(pruned) < np.count_nonzero(w):
        pruned /= pruned.sum()
        try:
            if _leverage(Y, pruned).max() <= target:
                w = pruned
        except UsageError:
            pass

    bound = core_set_bound(r)
    if np.count_nonzero(w) > bound:
        reduced = _caratheodory(Y, w, bound)
        if np.count_nonzero(reduced) > bound or _leverage(Y, reduced).max() > target:
            raise DesignError("could not shrink the support to the core-set bound")
        w = reduced
    return w


def solve_g_optimal(actions) -> Design:
    X = np.asarray(actions, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError("need a non-empty (n, d) action array")
    first: dict[bytes, int] = {}
    for i, row in enumerate(np.ascontiguousarray(X)):
        first.setdefault(row.tobytes(), i)
    unique = np.array(sorted(first.values()))
    Xu = X[unique]
    Y = Xu @ span_basis(Xu)
    w = _solve_in_span(Y)
    keep = np.flatnonzero(w)
    return Design(tuple(unique[keep].tolist()), w[keep] / w[keep].sum())


def span_dim(actions: Sequence) -> int:
    return span_basis(np.asarray(actions, dtype=float)).shape[1]
