"""Temporal edge lists, timestamp binning and per-snapshot adjacency."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, TextIO

import numpy as np


class GraphError(ValueError):
    """Invalid graph data or options."""


class ParseError(GraphError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    t: int
    weight: float = 1.0


@dataclass
class TemporalGraph:
    """Vertex universe plus timestamped directed edges.

    Edges are stored column-wise. ``times`` holds contiguous snapshot indices;
    ``raw_times`` keeps the timestamps as read so the graph can be re-binned.
    """

    num_vertices: int
    num_snapshots: int
    src: np.ndarray
    dst: np.ndarray
    times: np.ndarray
    weights: np.ndarray
    raw_times: np.ndarray | None = None
    labels: list[str] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.src = np.ascontiguousarray(self.src, dtype=np.int64)
        self.dst = np.ascontiguousarray(self.dst, dtype=np.int64)
        self.times = np.ascontiguousarray(self.times, dtype=np.int64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        m = len(self.src)
        if not (len(self.dst) == len(self.times) == len(self.weights) == m):
            raise GraphError("edge columns have different lengths")
        if m:
            if self.src.min() < 0 or self.dst.min() < 0:
                raise GraphError("negative vertex id")
            if max(self.src.max(), self.dst.max()) >= self.num_vertices:
                raise GraphError("vertex id out of range")
            if self.times.min() < 0 or self.times.max() >= self.num_snapshots:
                raise GraphError("snapshot index out of range")
            if not np.all(self.weights > 0):
                raise GraphError("edge weights must be positive")
        if self.labels is not None and len(self.labels) != self.num_vertices:
            raise GraphError("labels must cover every vertex exactly once")

    @property
    def num_edges(self) -> int:
        return len(self.src)

    @property
    def edges(self) -> list[TemporalEdge]:
        return [
            TemporalEdge(int(u), int(v), int(t), float(w))
            for u, v, t, w in zip(self.src, self.dst, self.times, self.weights)
        ]

    @property
    def vertex_labels(self) -> dict[str, int] | None:
        if self.labels is None:
            return None
        return {lab: i for i, lab in enumerate(self.labels)}

    def snapshot_edge_counts(self) -> np.ndarray:
        return np.bincount(self.times, minlength=self.num_snapshots)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], num_vertices: int | None = None,
                   num_snapshots: int | None = None) -> "TemporalGraph":
        rows = [tuple(e) for e in edges]
        src = np.array([r[0] for r in rows], dtype=np.int64)
        dst = np.array([r[1] for r in rows], dtype=np.int64)
        times = np.array([r[2] for r in rows], dtype=np.int64)
        weights = np.array([r[3] if len(r) > 3 else 1.0 for r in rows], dtype=np.float64)
        if num_vertices is None:
            num_vertices = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1)
        if num_snapshots is None:
            num_snapshots = int(times.max(initial=-1) + 1)
        return cls(num_vertices, num_snapshots, src, dst, times, weights)


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return line.split()
    return [c.strip() for c in line.split(delimiter)]


def _parse_number(tok: str) -> float:
    return float(int(tok)) if tok.lstrip("+-").isdigit() else float(tok)


def parse_edge_list(source: TextIO | Iterable[str], delimiter: str | None = None,
                    has_weight: bool | None = None) -> TemporalGraph:
    """Read ``src dst timestamp [weight]`` lines.

    Labels are mapped to dense ids in order of first appearance. With
    ``has_weight=None`` a fourth column is optional; ``True`` requires it and
    ``False`` forbids it. Raw timestamps are kept and binned as-is.
    """
    label_ids: dict[str, int] = {}
    src, dst, raw, wts = [], [], [], []
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cols = _split(line, delimiter)
        lo = 4 if has_weight else 3
        hi = 3 if has_weight is False else 4
        if not lo <= len(cols) <= hi:
            raise ParseError(lineno, f"expected {lo}-{hi} columns, got {len(cols)}")
        try:
            ts = _parse_number(cols[2])
            w = float(cols[3]) if len(cols) == 4 else 1.0
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        if not math.isfinite(ts) or not math.isfinite(w):
            raise ParseError(lineno, "non-finite value")
        if w <= 0:
            raise GraphError(f"line {lineno}: weight must be positive, got {w}")
        for lab, out in ((cols[0], src), (cols[1], dst)):
            out.append(label_ids.setdefault(lab, len(label_ids)))
        raw.append(ts)
        wts.append(w)
    if not src:
        raise GraphError("edge list is empty")
    raw_arr = np.array(raw, dtype=np.float64)
    _, times = np.unique(raw_arr, return_inverse=True)
    return TemporalGraph(
        num_vertices=len(label_ids),
        num_snapshots=int(times.max()) + 1,
        src=np.array(src), dst=np.array(dst), times=times.ravel(),
        weights=np.array(wts), raw_times=raw_arr, labels=list(label_ids),
    )


def read_edge_list(path, **options) -> TemporalGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh, **options)


def _fmt_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def format_edge_list(graph: TemporalGraph) -> str:
    """Edge-list text that `parse_edge_list` reads back into the same graph."""
    labels = graph.labels or [str(i) for i in range(graph.num_vertices)]
    times = graph.raw_times if graph.raw_times is not None else graph.times
    buf = io.StringIO()
    for u, v, t, w in zip(graph.src, graph.dst, times, graph.weights):
        buf.write(f"{labels[u]} {labels[v]} {_fmt_number(t)} {_fmt_number(w)}\n")
    return buf.getvalue()


def parse_binning(spec: str) -> tuple[str, float | None]:
    """Parse ``as-is``, ``fixed-width:W`` or ``quantile:C``."""
    kind, _, arg = spec.partition(":")
    if kind == "as-is" and not arg:
        return kind, None
    if kind in ("fixed-width", "quantile") and arg:
        return kind, float(arg)
    raise GraphError(f"unknown binning scheme {spec!r}")


def bin_timestamps(graph: TemporalGraph, scheme: str = "as-is",
                   value: float | None = None) -> TemporalGraph:
    """Re-bin raw timestamps into contiguous snapshot indices.

    ``fixed-width`` keeps empty intermediate bins so that snapshot distance
    reflects elapsed time; ``as-is`` and ``quantile`` produce dense indices.
    """
    if graph.num_edges == 0:
        raise GraphError("cannot bin a graph without edges")
    raw = graph.raw_times if graph.raw_times is not None else graph.times.astype(np.float64)
    if scheme == "as-is":
        _, idx = np.unique(raw, return_inverse=True)
    elif scheme == "fixed-width":
        if value is None or value <= 0:
            raise GraphError("fixed-width binning needs a positive width")
        idx = np.floor((raw - raw.min()) / value).astype(np.int64)
    elif scheme == "quantile":
        if value is None or int(value) < 1:
            raise GraphError("quantile binning needs a positive bin count")
        count = int(value)
        cuts = np.quantile(raw, np.arange(1, count) / count)
        idx = np.searchsorted(cuts, raw, side="right")
        _, idx = np.unique(idx, return_inverse=True)
    else:
        raise GraphError(f"unknown binning scheme {scheme!r}")
    idx = np.asarray(idx, dtype=np.int64).ravel()
    return TemporalGraph(
        graph.num_vertices, int(idx.max()) + 1, graph.src, graph.dst, idx,
        graph.weights, raw_times=raw, labels=graph.labels, metadata=dict(graph.metadata),
    )


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Adjacency of one layer in CSR form over the full vertex set."""

    t: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_entries(self) -> int:
        return len(self.indices)

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> list[tuple[int, float]]:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return [(int(u), float(w)) for u, w in zip(self.indices[lo:hi], self.weights[lo:hi])]

    @property
    def adjacency(self) -> dict[int, list[int]]:
        return {v: [u for u, _ in self.neighbors(v)]
                for v in range(self.num_vertices) if self.degree(v)}

    @property
    def _keys(self) -> frozenset:
        # lazily built membership set; frozen dataclass so stash in __dict__
        keys = self.__dict__.get("_keyset")
        if keys is None:
            rows = np.repeat(np.arange(self.num_vertices, dtype=np.int64), np.diff(self.indptr))
            keys = frozenset((rows * self.num_vertices + self.indices).tolist())
            object.__setattr__(self, "_keyset", keys)
        return keys

    def has_edge(self, u: int, v: int) -> bool:
        return u * self.num_vertices + v in self._keys

    def edge_weight(self, u: int, v: int) -> float:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        k = lo + np.searchsorted(self.indices[lo:hi], v)
        if k < hi and self.indices[k] == v:
            return float(self.weights[k])
        return 0.0


def _csr(n: int, rows: np.ndarray, cols: np.ndarray, w: np.ndarray):
    keys = rows * n + cols
    uniq, inv = np.unique(keys, return_inverse=True)
    merged = np.zeros(len(uniq), dtype=np.float64)
    np.add.at(merged, inv.ravel(), w)
    r = uniq // n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
    return indptr, (uniq % n).astype(np.int64), merged


def build_snapshots(graph: TemporalGraph, directed: bool = False) -> list[Snapshot]:
    """One `Snapshot` per index, empty ones included.

    Undirected mode adds the reverse of every non-loop edge before parallel
    edges are merged by summing weights.
    """
    n = graph.num_vertices
    order = np.argsort(graph.times, kind="stable")
    bounds = np.searchsorted(graph.times[order], np.arange(graph.num_snapshots + 1))
    out = []
    for t in range(graph.num_snapshots):
        sel = order[bounds[t]:bounds[t + 1]]
        u, v, w = graph.src[sel], graph.dst[sel], graph.weights[sel]
        if not directed:
            loop = u == v
            u, v, w = (np.concatenate([u, v[~loop]]), np.concatenate([v, u[~loop]]),
                       np.concatenate([w, w[~loop]]))
        out.append(Snapshot(t, *_csr(n, u, v, w)))
    return out


def format_manifest(graph: TemporalGraph) -> str:
    lines = [f"{graph.num_vertices} {graph.num_snapshots}"]
    lines += [f"{t}\t{c}" for t, c in enumerate(graph.snapshot_edge_counts())]
    return "\n".join(lines) + "\n"


def iter_snapshot_edges(snapshot: Snapshot) -> Iterator[tuple[int, int, float]]:
    for v in range(snapshot.num_vertices):
        for u, w in snapshot.neighbors(v):
            yield v, u, w
