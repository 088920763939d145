"""Vose alias tables for O(1) categorical sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np


@nb.njit(cache=True)
def vose_fill(weights, prob, alias, small, large):
    """Fill ``prob``/``alias`` (length n) for the given positive weights.

    ``small`` and ``large`` are int scratch buffers of length n. Alias
    entries are local indices into ``weights``.
    """
    n = weights.shape[0]
    total = 0.0
    for i in range(n):
        total += weights[i]
    ns = 0
    nl = 0
    for i in range(n):
        prob[i] = weights[i] * n / total
        if prob[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        g = large[nl - 1]
        alias[s] = g
        prob[g] = (prob[g] + prob[s]) - 1.0
        if prob[g] < 1.0:
            nl -= 1
            small[ns] = g
            ns += 1
    # leftovers are exactly 1 up to rounding
    for i in range(nl):
        prob[large[i]] = 1.0
        alias[large[i]] = large[i]
    for i in range(ns):
        prob[small[i]] = 1.0
        alias[small[i]] = small[i]
    return total


@nb.njit(cache=True, inline="always")
def alias_draw(prob, alias, u1, u2):
    n = prob.shape[0]
    i = int(u1 * n)
    if i >= n:
        i = n - 1
    if u2 < prob[i]:
        return i
    return alias[i]


@dataclass(frozen=True, eq=False)
class AliasTable:
    n: int
    prob: np.ndarray
    alias: np.ndarray
    support: np.ndarray
    total_weight: float

    def probabilities(self) -> np.ndarray:
        """Outcome probabilities implied by the table."""
        out = self.prob.astype(np.float64).copy()
        np.add.at(out, self.alias, 1.0 - self.prob)
        return out / self.n

    def sample_index(self, u1: float, u2: float) -> int:
        return int(alias_draw(self.prob, self.alias, u1, u2))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return self.support[self.sample_index(rng.random(), rng.random())]
        u = rng.random((size, 2))
        cols = np.minimum((u[:, 0] * self.n).astype(np.int64), self.n - 1)
        idx = np.where(u[:, 1] < self.prob[cols], cols, self.alias[cols])
        return self.support[idx]


def build_alias_table(weights, support=None) -> AliasTable:
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("alias table needs a nonempty 1-d weight vector")
    if not np.all(np.isfinite(w)) or not np.all(w > 0):
        raise ValueError("alias weights must be positive and finite")
    n = w.size
    support = np.arange(n) if support is None else np.asarray(support)
    if len(support) != n:
        raise ValueError("support and weights differ in length")
    prob = np.empty(n)
    alias = np.empty(n, dtype=np.int64)
    total = vose_fill(w, prob, alias, np.empty(n, np.int64), np.empty(n, np.int64))
    return AliasTable(n, prob, alias, support, float(total))
