"""Temporal backtracking second-order random walks on a multilayer graph.

Layer ``t`` holds every vertex with the edges of snapshot ``t``; each vertex
copy at layer ``t`` has a one-way descent edge to its copy at ``t - 1``. At
each step the walker descends with probability ``1 - alpha`` or moves inside
the layer with node2vec's return/in-out bias.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numba as nb
import numpy as np

from ._rng import next_uniform, stream_seed
from .alias import AliasTable, alias_draw, vose_fill
from .corpus import WalkCorpus
from .graph import Snapshot, TemporalGraph, build_snapshots

log = logging.getLogger(__name__)

TABLE_MODES = ("precompute", "on-the-fly", "auto")


@dataclass
class WalkConfig:
    walks_per_node: int = 40
    walk_length: int = 32
    p: float = 1.0
    q: float = 0.5
    alpha: float = 0.8
    seed: int = 0
    directed: bool = False
    min_walk_length: int = 2
    tables: str = "auto"
    # max number of second-order alias entries before "auto" falls back
    table_budget: int = 50_000_000
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.walk_length < 1 or self.walks_per_node < 1:
            raise ValueError("walk_length and walks_per_node must be >= 1")
        if self.min_walk_length < 1:
            raise ValueError("min_walk_length must be >= 1")
        if self.tables not in TABLE_MODES:
            raise ValueError(f"tables must be one of {TABLE_MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class LayeredPosition(NamedTuple):
    vertex: int
    layer: int


class MultilayerGraph:
    """All layers stacked into one CSR indexed by ``layer * n + vertex``."""

    def __init__(self, snapshots: Sequence[Snapshot]):
        if not snapshots:
            raise ValueError("need at least one snapshot")
        self.snapshots = list(snapshots)
        self.num_vertices = n = snapshots[0].num_vertices
        self.num_layers = len(snapshots)
        counts = np.concatenate([np.diff(s.indptr) for s in snapshots])
        self.indptr = np.zeros(n * self.num_layers + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        self.indices = np.concatenate([s.indices for s in snapshots]).astype(np.int64)
        self.weights = np.concatenate([s.weights for s in snapshots]).astype(np.float64)

    @classmethod
    def from_graph(cls, graph: TemporalGraph, directed: bool = False) -> "MultilayerGraph":
        return cls(build_snapshots(graph, directed=directed))

    def degree(self, layer: int, v: int) -> int:
        pos = layer * self.num_vertices + v
        return int(self.indptr[pos + 1] - self.indptr[pos])

    def edge_index(self, layer: int, u: int, v: int) -> int:
        """Position of the entry (u -> v) in the stacked CSR, or -1."""
        pos = layer * self.num_vertices + u
        lo, hi = self.indptr[pos], self.indptr[pos + 1]
        k = lo + int(np.searchsorted(self.indices[lo:hi], v))
        return k if k < hi and self.indices[k] == v else -1

    def active_starts(self) -> tuple[np.ndarray, np.ndarray]:
        """(layer, vertex) pairs with nonempty in-layer neighborhoods, sorted."""
        pos = np.flatnonzero(np.diff(self.indptr) > 0)
        return pos // self.num_vertices, pos % self.num_vertices

    def second_order_entries(self) -> int:
        deg = np.diff(self.indptr)
        layer_of_entry = np.repeat(np.arange(len(deg)) // self.num_vertices, deg)
        return int(deg[layer_of_entry * self.num_vertices + self.indices].sum())


def step_distribution(prev: LayeredPosition | None, cur: LayeredPosition,
                      snapshots: Sequence[Snapshot], cfg: WalkConfig) -> dict[LayeredPosition, float]:
    """Exact next-step distribution from ``cur`` given the previous position.

    A missing ``prev``, or one on a different layer (the last move was a
    descent), gives a first-order step over edge weights.
    """
    v, t = cur.vertex, cur.layer
    snap = snapshots[t]
    nbrs = snap.neighbors(v)
    if not nbrs:
        return {LayeredPosition(v, t - 1): 1.0} if t > 0 else {}
    second_order = prev is not None and prev.layer == t
    weights = []
    for c, w in nbrs:
        if not second_order:
            weights.append(w)
        elif c == prev.vertex:
            weights.append(w / cfg.p)
        elif snap.has_edge(prev.vertex, c):
            weights.append(w)
        else:
            weights.append(w / cfg.q)
    z = sum(weights)
    stay = cfg.alpha if t > 0 else 1.0
    dist = {LayeredPosition(c, t): stay * w / z for (c, _), w in zip(nbrs, weights)}
    if t > 0 and cfg.alpha < 1:
        dist[LayeredPosition(v, t - 1)] = 1.0 - cfg.alpha
    return dist


@nb.njit(cache=True, inline="always")
def _contains(indices, lo, hi, x):
    end = hi
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < end and indices[lo] == x


@nb.njit(cache=True)
def _bias_weight(indices, weights, k, prev_lo, prev_hi, prev, p, q):
    x = indices[k]
    if x == prev:
        return weights[k] / p
    if _contains(indices, prev_lo, prev_hi, x):
        return weights[k]
    return weights[k] / q


@nb.njit(cache=True)
def _fill_tables(indptr, indices, weights, n, p, q, node_prob, node_alias,
                 edge_ptr, edge_prob, edge_alias):
    npos = indptr.shape[0] - 1
    maxdeg = 0
    for pos in range(npos):
        maxdeg = max(maxdeg, indptr[pos + 1] - indptr[pos])
    small = np.empty(maxdeg, np.int64)
    large = np.empty(maxdeg, np.int64)
    buf = np.empty(maxdeg, np.float64)
    for pos in range(npos):
        lo = indptr[pos]
        hi = indptr[pos + 1]
        if hi > lo:
            vose_fill(weights[lo:hi], node_prob[lo:hi], node_alias[lo:hi], small, large)
    for pos in range(npos):
        layer_base = (pos // n) * n
        prev = pos - layer_base
        plo = indptr[pos]
        phi = indptr[pos + 1]
        for k in range(plo, phi):
            cpos = layer_base + indices[k]
            lo = indptr[cpos]
            hi = indptr[cpos + 1]
            d = hi - lo
            for j in range(d):
                buf[j] = _bias_weight(indices, weights, lo + j, plo, phi, prev, p, q)
            a = edge_ptr[k]
            vose_fill(buf[:d], edge_prob[a:a + d], edge_alias[a:a + d], small, large)


@nb.njit(cache=True)
def _step(v, layer, prev, prev_edge, n, alpha, p, q, indptr, indices, weights, precomputed,
          node_prob, node_alias, edge_ptr, edge_prob, edge_alias, state):
    """One transition. Returns (vertex, layer, entry index); entry is -1 after
    a descent and vertex is -1 when the walk terminates."""
    pos = layer * n + v
    lo = indptr[pos]
    hi = indptr[pos + 1]
    if hi == lo:
        if layer == 0:
            return -1, 0, -1
        return v, layer - 1, -1
    if layer > 0 and alpha < 1.0:
        if next_uniform(state) < 1.0 - alpha:
            return v, layer - 1, -1
    u1 = next_uniform(state)
    u2 = next_uniform(state)
    d = hi - lo
    if precomputed:
        if prev_edge < 0:
            j = alias_draw(node_prob[lo:hi], node_alias[lo:hi], u1, u2)
        else:
            a = edge_ptr[prev_edge]
            j = alias_draw(edge_prob[a:a + d], edge_alias[a:a + d], u1, u2)
    else:
        ppos = layer * n + prev
        plo = indptr[ppos] if prev_edge >= 0 else 0
        phi = indptr[ppos + 1] if prev_edge >= 0 else 0
        total = 0.0
        for k in range(lo, hi):
            if prev_edge < 0:
                total += weights[k]
            else:
                total += _bias_weight(indices, weights, k, plo, phi, prev, p, q)
        target = u1 * total
        acc = 0.0
        j = d - 1
        for k in range(lo, hi):
            if prev_edge < 0:
                acc += weights[k]
            else:
                acc += _bias_weight(indices, weights, k, plo, phi, prev, p, q)
            if target < acc:
                j = k - lo
                break
    k = lo + j
    return indices[k], layer, k


@nb.njit(cache=True)
def _walk_range(item_lo, item_hi, start_layer, start_vertex, wpn, walk_length, seed, n, alpha, p, q,
                indptr, indices, weights, precomputed, node_prob, node_alias, edge_ptr, edge_prob,
                edge_alias, out, lengths):
    state = np.empty(1, np.uint64)
    for i in range(item_lo, item_hi):
        s = i // wpn
        t0 = start_layer[s]
        v = start_vertex[s]
        state[0] = stream_seed(seed, t0, v, i - s * wpn)
        layer = t0
        prev = -1
        prev_edge = -1
        out[i, 0] = v
        length = 1
        while length < walk_length:
            nv, nl, ne = _step(v, layer, prev, prev_edge, n, alpha, p, q, indptr, indices, weights,
                               precomputed, node_prob, node_alias, edge_ptr, edge_prob, edge_alias, state)
            if nv < 0:
                break
            prev = v if ne >= 0 else -1
            prev_edge = ne
            v = nv
            layer = nl
            out[i, length] = v
            length += 1
        lengths[i] = length


@nb.njit(cache=True, parallel=True)
def _walk_parallel(nchunks, num_items, start_layer, start_vertex, wpn, walk_length, seed, n, alpha, p, q,
                   indptr, indices, weights, precomputed, node_prob, node_alias, edge_ptr, edge_prob,
                   edge_alias, out, lengths):
    per = (num_items + nchunks - 1) // nchunks
    for c in nb.prange(nchunks):
        lo = c * per
        hi = min(num_items, lo + per)
        if lo < hi:
            _walk_range(lo, hi, start_layer, start_vertex, wpn, walk_length, seed, n, alpha, p, q,
                        indptr, indices, weights, precomputed, node_prob, node_alias, edge_ptr,
                        edge_prob, edge_alias, out, lengths)


@nb.njit(cache=True)
def _compact(out, lengths, keep, offsets, tokens):
    j = 0
    for i in range(out.shape[0]):
        if keep[i]:
            base = offsets[j]
            for k in range(lengths[i]):
                tokens[base + k] = out[i, k]
            j += 1


@nb.njit(cache=True)
def _sample_many(size, v, layer, prev, prev_edge, n, alpha, p, q, indptr, indices, weights, precomputed,
                 node_prob, node_alias, edge_ptr, edge_prob, edge_alias, state, out_v, out_l):
    for i in range(size):
        nv, nl, _ = _step(v, layer, prev, prev_edge, n, alpha, p, q, indptr, indices, weights, precomputed,
                          node_prob, node_alias, edge_ptr, edge_prob, edge_alias, state)
        out_v[i] = nv
        out_l[i] = nl


@dataclass
class TransitionTables:
    """Alias tables for every (layer, prev, cur) state, or an empty shell in
    on-the-fly mode. First-order tables share the CSR layout; second-order
    tables for entry ``k`` (prev -> cur) start at ``edge_ptr[k]``."""

    mode: str
    node_prob: np.ndarray
    node_alias: np.ndarray
    edge_ptr: np.ndarray
    edge_prob: np.ndarray
    edge_alias: np.ndarray
    graph: MultilayerGraph = field(repr=False)
    alpha: float = 1.0

    @property
    def precomputed(self) -> bool:
        return self.mode == "precompute"

    @property
    def num_entries(self) -> int:
        return len(self.node_prob) + len(self.edge_prob)

    def lookup(self, layer: int, prev: int | None, cur: int) -> tuple[AliasTable | None, float]:
        """In-layer alias table for the state plus its descent probability."""
        g = self.graph
        if not self.precomputed:
            raise RuntimeError("tables were not precomputed")
        pos = layer * g.num_vertices + cur
        lo, hi = g.indptr[pos], g.indptr[pos + 1]
        if hi == lo:
            return None, (1.0 if layer > 0 else 0.0)
        if prev is None:
            a, b, prob, alias = lo, hi, self.node_prob, self.node_alias
        else:
            k = g.edge_index(layer, prev, cur)
            if k < 0:
                raise KeyError(f"{prev} -> {cur} is not an edge of layer {layer}")
            a = self.edge_ptr[k]
            b = a + (hi - lo)
            prob, alias = self.edge_prob, self.edge_alias
        table = AliasTable(int(hi - lo), prob[a:b].copy(), alias[a:b].astype(np.int64),
                           g.indices[lo:hi].copy(), float("nan"))
        return table, (1.0 - self.alpha if layer > 0 else 0.0)


def precompute_transition_tables(graph: MultilayerGraph, cfg: WalkConfig) -> TransitionTables:
    """Build alias tables, or fall back to on-the-fly sampling.

    Storage is the sum over layers and vertices of squared degree; ``auto``
    precomputes only when that fits ``cfg.table_budget`` entries.
    """
    entries = graph.second_order_entries()
    mode = cfg.tables
    if mode == "auto":
        mode = "precompute" if entries <= cfg.table_budget else "on-the-fly"
        if mode == "on-the-fly":
            log.info("second-order tables need %d entries (> %d); sampling on the fly",
                     entries, cfg.table_budget)
    empty_f, empty_i = np.empty(0, np.float64), np.empty(0, np.int32)
    if mode == "on-the-fly":
        return TransitionTables(mode, empty_f, empty_i, np.empty(0, np.int64), empty_f, empty_i,
                                graph, cfg.alpha)
    deg = np.diff(graph.indptr)
    n = graph.num_vertices
    layer_of_entry = np.repeat(np.arange(len(deg)) // n, deg)
    sizes = deg[layer_of_entry * n + graph.indices]
    edge_ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=edge_ptr[1:])
    m = len(graph.indices)
    node_prob, node_alias = np.empty(m), np.empty(m, np.int32)
    edge_prob, edge_alias = np.empty(entries), np.empty(entries, np.int32)
    _fill_tables(graph.indptr, graph.indices, graph.weights, n, float(cfg.p), float(cfg.q),
                 node_prob, node_alias, edge_ptr, edge_prob, edge_alias)
    return TransitionTables(mode, node_prob, node_alias, edge_ptr, edge_prob, edge_alias, graph, cfg.alpha)


class TemporalWalker:
    """Couples a multilayer graph with its transition tables."""

    def __init__(self, graph: MultilayerGraph, cfg: WalkConfig, tables: TransitionTables | None = None):
        self.graph = graph
        self.cfg = cfg
        self.tables = tables if tables is not None else precompute_transition_tables(graph, cfg)

    @classmethod
    def from_snapshots(cls, snapshots: Sequence[Snapshot], cfg: WalkConfig) -> "TemporalWalker":
        return cls(MultilayerGraph(snapshots), cfg)

    def _kernel_args(self):
        g, tb, c = self.graph, self.tables, self.cfg
        return (g.num_vertices, float(c.alpha), float(c.p), float(c.q), g.indptr, g.indices, g.weights,
                tb.precomputed, tb.node_prob, tb.node_alias, tb.edge_ptr, tb.edge_prob, tb.edge_alias)

    def sample_steps(self, prev: LayeredPosition | None, cur: LayeredPosition, size: int,
                     seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``size`` independent next steps from one state with the walk kernel."""
        prev_v, prev_edge = -1, -1
        if prev is not None and prev.layer == cur.layer:
            prev_edge = self.graph.edge_index(cur.layer, prev.vertex, cur.vertex)
            if prev_edge < 0:
                raise ValueError(f"{prev} -> {cur} is not a transition of the graph")
            prev_v = prev.vertex
        state = np.array([stream_seed(np.uint64(seed), cur.layer, cur.vertex, prev_v + 1)], np.uint64)
        out_v = np.empty(size, np.int64)
        out_l = np.empty(size, np.int64)
        _sample_many(size, cur.vertex, cur.layer, prev_v, prev_edge, *self._kernel_args(), state, out_v, out_l)
        return out_v, out_l

    def walk_matrix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Raw walks: (start layers, start vertices, padded token matrix, lengths)."""
        cfg = self.cfg
        layers, verts = self.graph.active_starts()
        num_items = len(layers) * cfg.walks_per_node
        out = np.zeros((num_items, cfg.walk_length), dtype=np.int32)
        lengths = np.zeros(num_items, dtype=np.int32)
        seed = np.uint64(cfg.seed & (2**64 - 1))
        args = (layers, verts, cfg.walks_per_node, cfg.walk_length, seed) + self._kernel_args() + (out, lengths)
        if cfg.workers > 1 and num_items:
            nb.set_num_threads(min(cfg.workers, nb.config.NUMBA_NUM_THREADS))
            _walk_parallel(cfg.workers * 8, num_items, *args)
        else:
            _walk_range(0, num_items, *args)
        return layers, verts, out, lengths

    def generate(self) -> WalkCorpus:
        cfg, g = self.cfg, self.graph
        layers, verts, out, lengths = self.walk_matrix()
        keep = lengths >= cfg.min_walk_length
        tags = np.repeat(layers, cfg.walks_per_node)[keep].astype(np.int32)
        offsets = np.zeros(int(keep.sum()) + 1, dtype=np.int64)
        np.cumsum(lengths[keep], out=offsets[1:])
        tokens = np.empty(offsets[-1], dtype=np.int32)
        _compact(out, lengths, keep, offsets, tokens)
        stats = {
            "table_mode": self.tables.mode,
            "active_starts": int(len(layers)),
            "inactive_skipped": int(g.num_layers * g.num_vertices - len(layers)),
            "walks": int(len(lengths)),
            "dropped_walks": int((~keep).sum()),
        }
        return WalkCorpus(tokens, offsets, tags, g.num_layers, g.num_vertices, stats=stats)


def generate_walks(snapshots: Sequence[Snapshot] | MultilayerGraph, cfg: WalkConfig) -> WalkCorpus:
    """Walk corpus with ``walks_per_node`` sentences per active (vertex, layer),
    tagged by the start layer and ordered by (layer, vertex, walk index)."""
    graph = snapshots if isinstance(snapshots, MultilayerGraph) else MultilayerGraph(snapshots)
    return TemporalWalker(graph, cfg).generate()
