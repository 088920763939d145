"""Synthetic temporal graphs and the scaling sweep."""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .embedder import TrainConfig, write_embeddings
from .graph import TemporalGraph
from .pipeline import embed_graph
from .walker import WalkConfig

log = logging.getLogger(__name__)


def _pair_from_index(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices over the upper triangle (i < j) to (i, j)."""
    k = k.astype(np.int64)
    # rows before i hold i*n - i*(i+1)/2 pairs
    i = np.floor((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8 * k.astype(np.float64))) / 2).astype(np.int64)
    start = i * n - i * (i + 1) // 2
    # correct float rounding at row boundaries
    over = start > k
    i[over] -= 1
    start = i * n - i * (i + 1) // 2
    nxt = (i + 1) * n - (i + 1) * (i + 2) // 2
    under = nxt <= k
    i[under] += 1
    start = i * n - i * (i + 1) // 2
    j = k - start + i + 1
    return i, j


def erdos_renyi(num_nodes: int, avg_degree: float, seed=None) -> np.ndarray:
    """G(n, M) with M = round(n * avg_degree / 2) distinct undirected pairs.

    Returns an (M, 2) array of ``(i, j)`` with ``i < j``.
    """
    if num_nodes < 2:
        raise ValueError("need at least 2 nodes")
    if not 0 < avg_degree < num_nodes:
        raise ValueError("avg_degree must be in (0, num_nodes)")
    m = int(round(num_nodes * avg_degree / 2))
    total = num_nodes * (num_nodes - 1) // 2
    if m > total:
        raise ValueError(f"{m} edges exceed the {total} possible pairs")
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(total, size=m, replace=False))
    i, j = _pair_from_index(picked, num_nodes)
    return np.stack([i, j], axis=1)


def split_snapshots_uniform(edges: np.ndarray, num_snapshots: int = 10, seed=None,
                            num_vertices: int | None = None) -> TemporalGraph:
    """Assign each edge an independent uniform snapshot index.

    Empty snapshots are filled by moving one random edge out of the fullest
    snapshot; the number of moves is stored in ``metadata["redraws"]``.
    """
    edges = np.asarray(edges, dtype=np.int64)
    m = len(edges)
    if m < num_snapshots:
        raise ValueError(f"{m} edges cannot fill {num_snapshots} snapshots")
    rng = np.random.default_rng(seed)
    times = rng.integers(0, num_snapshots, size=m)
    redraws = 0
    while True:
        counts = np.bincount(times, minlength=num_snapshots)
        empty = np.flatnonzero(counts == 0)
        if not len(empty):
            break
        donors = np.flatnonzero(times == counts.argmax())
        times[rng.choice(donors)] = empty[0]
        redraws += 1
    n = num_vertices if num_vertices is not None else int(edges.max()) + 1
    return TemporalGraph(n, num_snapshots, edges[:, 0], edges[:, 1], times, np.ones(m),
                         metadata={"redraws": redraws})


def planted_blocks(num_nodes: int, blocks: list[np.ndarray], num_edges: int, rng,
                   replace: bool = False) -> np.ndarray:
    """``num_edges`` pairs drawn uniformly from inside the given blocks.

    With ``replace`` a pair may repeat (repeated interactions, merged into
    weights when snapshots are built); otherwise pairs are distinct.
    """
    pairs = []
    for b in blocks:
        b = np.asarray(b)
        iu, ju = np.triu_indices(len(b), 1)
        pairs.append(np.stack([b[iu], b[ju]], axis=1))
    pool = np.concatenate(pairs)
    if replace:
        return pool[rng.integers(len(pool), size=num_edges)]
    if num_edges > len(pool):
        raise ValueError("blocks too small for the requested edge count")
    return pool[np.sort(rng.choice(len(pool), size=num_edges, replace=False))]


def two_regime_graph(num_nodes: int = 200, num_snapshots: int = 12, num_edges: int = 1000,
                     block_size: int = 10, repeated: bool = True,
                     seed=None) -> tuple[TemporalGraph, np.ndarray]:
    """Snapshots alternating between an Erdos-Renyi regime (even t) and two
    dense planted blocks (odd t), every snapshot holding ``num_edges``
    temporal edges.

    Erdos-Renyi snapshots are G(n, M) draws. Block snapshots draw their
    interactions uniformly from the pairs inside two fixed vertex blocks,
    with repeats when ``repeated`` (so small blocks can carry as many
    interactions as a sparse random snapshot). Returns the graph and the
    regime label of each snapshot.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(num_nodes)
    blocks = [perm[:block_size], perm[block_size:2 * block_size]]
    src, dst, times = [], [], []
    regimes = np.arange(num_snapshots) % 2
    for t, regime in enumerate(regimes):
        if regime == 0:
            e = erdos_renyi(num_nodes, 2 * num_edges / num_nodes, seed=rng)
        else:
            e = planted_blocks(num_nodes, blocks, num_edges, rng, replace=repeated)
        src.append(e[:, 0])
        dst.append(e[:, 1])
        times.append(np.full(len(e), t))
    src, dst, times = map(np.concatenate, (src, dst, times))
    graph = TemporalGraph(num_nodes, num_snapshots, src, dst, times, np.ones(len(src)),
                          metadata={"regimes": regimes.tolist(), "blocks": [b.tolist() for b in blocks]})
    return graph, regimes


@dataclass
class ScalingPoint:
    num_nodes: int
    num_edges: int
    wall_time_seconds: float
    phase_breakdown: dict = field(default_factory=dict)
    workers: int = 1
    runs: list[float] = field(default_factory=list)
    error: str | None = None


@dataclass
class ScalingResult:
    points: list[ScalingPoint]
    slope: float | None

    def plot_data(self, header: dict | None = None) -> str:
        lines = [f"# {k}={v}" for k, v in (header or {}).items()]
        lines.append(f"# slope={'undefined' if self.slope is None else f'{self.slope:.6f}'}")
        lines.append("# log10_nodes\tlog10_seconds")
        for pt in self.points:
            if pt.error is None:
                lines.append(f"{math.log10(pt.num_nodes):.6f}\t{math.log10(pt.wall_time_seconds):.6f}")
            else:
                lines.append(f"# failed at {pt.num_edges} edges: {pt.error}")
        return "\n".join(lines) + "\n"


def loglog_slope(nodes, seconds) -> float | None:
    """Least-squares slope of log10(seconds) against log10(nodes)."""
    x = np.log10(np.asarray(nodes, dtype=np.float64))
    if len(x) < 2 or np.ptp(x) == 0:
        return None
    return float(np.polyfit(x, np.log10(np.asarray(seconds, dtype=np.float64)), 1)[0])


def time_pipeline(num_edges: int, avg_degree: float, num_snapshots: int, walk_cfg: WalkConfig,
                  train_cfg: TrainConfig, seed: int = 0) -> tuple[float, dict]:
    """Run generate -> split -> walk -> train -> write once; returns (wall, phases)."""
    start = time.perf_counter()
    n = max(2, int(round(2 * num_edges / avg_degree)))
    edges = erdos_renyi(n, avg_degree, seed=seed)
    graph = split_snapshots_uniform(edges, num_snapshots, seed=seed + 1, num_vertices=n)
    generate = time.perf_counter() - start
    res = embed_graph(graph, walk_cfg, train_cfg)
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        with open(os.path.join(tmp, "emb.txt"), "w") as fh:
            write_embeddings(fh, res.embeddings)
    io_time = time.perf_counter() - t0
    wall = time.perf_counter() - start
    phases = {"generate": generate, "walk": res.timings["tables"] + res.timings["walks"],
              "train": res.timings["train"], "io": io_time,
              "tokens": res.corpus.num_tokens}
    return wall, phases


def run_scaling(sizes, avg_degree: float = 10.0, num_snapshots: int = 10, runs: int = 3,
                walk_cfg: WalkConfig | None = None, train_cfg: TrainConfig | None = None,
                out_path=None, seed: int = 0) -> ScalingResult:
    """Time the full pipeline for each edge count; median over ``runs``."""
    sizes = [int(s) for s in sizes]
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    walk_cfg = walk_cfg or WalkConfig()
    train_cfg = train_cfg or TrainConfig()
    points = []
    for m in sizes:
        n = max(2, int(round(2 * m / avg_degree)))
        pt = ScalingPoint(n, m, float("nan"), workers=max(walk_cfg.workers, train_cfg.workers))
        try:
            results = [time_pipeline(m, avg_degree, num_snapshots,
                                     dataclasses.replace(walk_cfg, seed=walk_cfg.seed + r),
                                     dataclasses.replace(train_cfg, seed=train_cfg.seed + r), seed=seed + 7 * r)
                       for r in range(runs)]
        except Exception as exc:  # keep partial results
            log.exception("scaling run failed at %d edges", m)
            pt.error = f"{type(exc).__name__}: {exc}"
            points.append(pt)
            break
        walls = [w for w, _ in results]
        mid = int(np.argsort(walls)[len(walls) // 2])
        pt.runs = walls
        pt.wall_time_seconds = float(np.median(walls))
        pt.phase_breakdown = results[mid][1]
        points.append(pt)
        log.info("%d edges / %d nodes: %.3fs (%s)", m, n, pt.wall_time_seconds, pt.phase_breakdown)
    ok = [pt for pt in points if pt.error is None]
    slope = loglog_slope([p.num_nodes for p in ok], [p.wall_time_seconds for p in ok])
    result = ScalingResult(points, slope)
    if out_path is not None:
        header = {"avg_degree": avg_degree, "snapshots": num_snapshots, "runs": runs,
                  "walk": dataclasses.asdict(walk_cfg), "train": dataclasses.asdict(train_cfg)}
        with open(out_path, "w") as fh:
            fh.write(result.plot_data(header))
    return result
