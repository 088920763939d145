"""Similarity ranking of snapshots and rank-based scoring against ground truth."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass
class GroundTruth:
    """For each snapshot, all other snapshots from most to least similar."""

    rankings: dict[int, list[int]]
    scores: dict[int, np.ndarray] | None = None

    def __post_init__(self):
        T = len(self.rankings)
        for t, ranking in self.rankings.items():
            if sorted(ranking) != [i for i in range(T) if i != t]:
                raise ValueError(f"ground truth for snapshot {t} is not a permutation of the others")

    @property
    def num_snapshots(self) -> int:
        return len(self.rankings)

    @classmethod
    def from_labels(cls, labels) -> "GroundTruth":
        """Same-label snapshots first, each group ordered by temporal distance."""
        labels = np.asarray(labels)
        T = len(labels)
        rankings = {}
        for t in range(T):
            others = [i for i in range(T) if i != t]
            rankings[t] = sorted(others, key=lambda i: (labels[i] != labels[t], abs(i - t), i))
        return cls(rankings)

    @classmethod
    def read(cls, fh) -> "GroundTruth":
        rankings = {}
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, sep, rest = line.partition(":")
            if not sep:
                raise ValueError(f"line {lineno}: expected `t: i1 i2 ...`")
            rankings[int(head)] = [int(x) for x in rest.split()]
        return cls(rankings)

    def write(self, fh) -> None:
        for t in sorted(self.rankings):
            fh.write(f"{t}: {' '.join(map(str, self.rankings[t]))}\n")


def similarity_scores(embeddings: np.ndarray, t: int) -> np.ndarray:
    """Cosine of every row against row ``t``; -inf where undefined."""
    X = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    scores = np.full(len(X), -np.inf)
    if norms[t] == 0:
        warnings.warn(f"snapshot {t} has a zero embedding; similarities undefined")
        return scores
    ok = norms > 0
    scores[ok] = np.clip(X[ok] @ X[t] / (norms[ok] * norms[t]), -1.0, 1.0)
    if not ok.all():
        warnings.warn(f"zero embeddings for snapshots {np.flatnonzero(~ok).tolist()}; ranked last")
    return scores


def rank_snapshots(embeddings: np.ndarray, t: int) -> list[int]:
    """Other snapshots by descending cosine to ``t``, ties by ascending index."""
    T = len(embeddings)
    if T < 2:
        raise ValueError("need at least two snapshots to rank")
    scores = similarity_scores(embeddings, t)
    others = np.array([i for i in range(T) if i != t])
    # lexsort: last key is primary
    order = np.lexsort((others, -scores[others]))
    return others[order].tolist()


def precision_at_k(predicted, truth, k: int) -> float:
    if k <= 0:
        raise ValueError("k must be positive")
    if k > len(predicted) or k > len(truth):
        raise ValueError(f"k={k} exceeds ranking length")
    return len(set(predicted[:k]) & set(truth[:k])) / k


def spearman_rho(rank_a, rank_b) -> float:
    """Pearson correlation of average ranks; NaN when either side is constant."""
    a = rankdata(np.asarray(rank_a, dtype=np.float64))
    b = rankdata(np.asarray(rank_b, dtype=np.float64))
    if len(a) != len(b) or len(a) < 2:
        raise ValueError("need two rank vectors of equal length >= 2")
    a -= a.mean()
    b -= b.mean()
    denom = math.sqrt((a @ a) * (b @ b))
    if denom == 0:
        return math.nan
    return float(np.clip(a @ b / denom, -1.0, 1.0))


def _tied_pairs(sorted_vals: np.ndarray) -> int:
    _, counts = np.unique(sorted_vals, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def _count_swaps(y: np.ndarray) -> int:
    """Inversions (strictly greater before smaller) via bottom-up merge sort."""
    n = len(y)
    a = y.copy()
    buf = np.empty_like(a)
    swaps = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[j] < a[i]:
                    buf[k] = a[j]
                    swaps += mid - i
                    j += 1
                else:
                    buf[k] = a[i]
                    i += 1
                k += 1
            buf[k:k + mid - i] = a[i:mid]
            k += mid - i
            buf[k:k + hi - j] = a[j:hi]
        a, buf = buf, a
        width *= 2
    return swaps


def kendall_tau(rank_a, rank_b) -> float:
    """Kendall tau-b in O(n log n); NaN when either side is all ties."""
    x = np.asarray(rank_a, dtype=np.float64)
    y = np.asarray(rank_b, dtype=np.float64)
    n = len(x)
    if n != len(y) or n < 2:
        raise ValueError("need two rank vectors of equal length >= 2")
    order = np.lexsort((y, x))
    x, y = x[order], y[order]
    n0 = n * (n - 1) // 2
    ties_x = _tied_pairs(x)
    # pairs tied in both x and y
    same = np.concatenate([[True], (x[1:] != x[:-1]) | (y[1:] != y[:-1])])
    runs = np.diff(np.append(np.flatnonzero(same), n))
    ties_xy = int((runs * (runs - 1) // 2).sum())
    # sorted by (x, y): inversions in y are exactly the discordant pairs
    discordant = _count_swaps(y)
    ties_y = _tied_pairs(np.sort(y))
    concordant = n0 - ties_x - ties_y + ties_xy - discordant
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0:
        return math.nan
    return float(np.clip((concordant - discordant) / denom, -1.0, 1.0))


def kendall_tau_pairs(rank_a, rank_b) -> float:
    """O(n^2) tau-b by explicit pair counting; reference for `kendall_tau`."""
    x = [float(v) for v in rank_a]
    y = [float(v) for v in rank_b]
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx == 0:
                tx += 1
            if dy == 0:
                ty += 1
            if dx * dy > 0:
                conc += 1
            elif dx * dy < 0:
                disc += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - tx) * (n0 - ty))
    return math.nan if denom == 0 else (conc - disc) / denom


@dataclass
class RankingReport:
    ks: list[int]
    predicted: dict[int, list[int]]
    precision: dict[int, dict[int, float]]
    tau: dict[int, float]
    rho: dict[int, float]
    average: dict[str, float] = field(default_factory=dict)

    def to_table(self) -> str:
        cols = [f"p@{k}" for k in self.ks] + ["tau", "rho"]
        lines = ["t\t" + "\t".join(cols)]

        def fmt(x):
            return "nan" if math.isnan(x) else f"{x:.6f}"

        for t in sorted(self.predicted):
            vals = [self.precision[t][k] for k in self.ks] + [self.tau[t], self.rho[t]]
            lines.append(f"{t}\t" + "\t".join(fmt(v) for v in vals))
        lines.append("avg\t" + "\t".join(fmt(self.average[c]) for c in cols))
        lines.append("")
        lines.extend(f"{c}={fmt(self.average[c])}" for c in cols)
        return "\n".join(lines) + "\n"


def _positions(ranking: list[int], T: int, t: int) -> np.ndarray:
    pos = np.empty(T)
    pos[ranking] = np.arange(len(ranking))
    return np.delete(pos, t)


def evaluate(embeddings: np.ndarray, truth: GroundTruth, ks=(10, 20)) -> RankingReport:
    """Per-snapshot p@K, tau and rho plus their unweighted means.

    Correlations compare, for each snapshot, the predicted cosine scores of
    the other snapshots (ties get average ranks) against the ground-truth
    positions, or the ground-truth scores when those are supplied.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    T = len(X)
    ks = list(ks)
    predicted, precision, tau, rho = {}, {}, {}, {}
    missing = [t for t in range(T) if t not in truth.rankings]
    if missing:
        raise ValueError(f"ground truth has no ranking for snapshot {missing[0]}")
    for t in range(T):
        gt = truth.rankings[t]
        if len(gt) != T - 1:
            raise ValueError(f"ground truth for snapshot {t} does not cover {T} snapshots")
        predicted[t] = rank_snapshots(X, t)
        precision[t] = {k: precision_at_k(predicted[t], gt, min(k, T - 1)) for k in ks}
        pred_rank = -np.delete(similarity_scores(X, t), t)
        if truth.scores is not None and t in truth.scores:
            true_rank = -np.delete(np.asarray(truth.scores[t], dtype=np.float64), t)
        else:
            true_rank = _positions(gt, T, t)
        tau[t] = kendall_tau(pred_rank, true_rank)
        rho[t] = spearman_rho(pred_rank, true_rank)
    average = {f"p@{k}": float(np.mean([precision[t][k] for t in range(T)])) for k in ks}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        average["tau"] = float(np.nanmean(list(tau.values())))
        average["rho"] = float(np.nanmean(list(rho.values())))
    return RankingReport(ks, predicted, precision, tau, rho, average)
