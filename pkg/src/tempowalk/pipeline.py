"""Graph -> walks -> paragraph vectors, with per-phase timings."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .corpus import WalkCorpus
from .embedder import EmbeddingModel, TrainConfig, train
from .graph import TemporalGraph, build_snapshots
from .walker import MultilayerGraph, TemporalWalker, WalkConfig


@dataclass
class PipelineResult:
    model: EmbeddingModel
    corpus: WalkCorpus
    timings: dict = field(default_factory=dict)

    @property
    def embeddings(self):
        return self.model.paragraph_vectors


def embed_graph(graph: TemporalGraph, walk_cfg: WalkConfig | None = None,
                train_cfg: TrainConfig | None = None) -> PipelineResult:
    walk_cfg = walk_cfg or WalkConfig()
    train_cfg = train_cfg or TrainConfig()
    timings = {}
    t0 = time.perf_counter()
    snapshots = build_snapshots(graph, directed=walk_cfg.directed)
    walker = TemporalWalker(MultilayerGraph(snapshots), walk_cfg)
    timings["tables"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    corpus = walker.generate()
    timings["walks"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    model = train(corpus, train_cfg)
    timings["train"] = time.perf_counter() - t0
    return PipelineResult(model, corpus, timings)
