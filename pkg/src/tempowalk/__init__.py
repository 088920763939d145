"""Temporal graph snapshot embeddings from backtracking random walks."""

from .alias import AliasTable, build_alias_table
from .bench import erdos_renyi, run_scaling, split_snapshots_uniform, two_regime_graph
from .embedder import EmbeddingModel, TrainConfig, TrainingError, cosine, snapshot_embedding, train
from .evaluation import (
    GroundTruth,
    RankingReport,
    evaluate,
    kendall_tau,
    precision_at_k,
    rank_snapshots,
    spearman_rho,
)
from .graph import GraphError, ParseError, Snapshot, TemporalGraph, build_snapshots, read_edge_list
from .pipeline import PipelineResult, embed_graph
from .walker import LayeredPosition, MultilayerGraph, TemporalWalker, WalkConfig, generate_walks, step_distribution

__version__ = "0.1.0"

__all__ = [
    "AliasTable", "EmbeddingModel", "GraphError", "GroundTruth", "LayeredPosition", "MultilayerGraph",
    "ParseError", "PipelineResult", "RankingReport", "Snapshot", "TemporalGraph", "TemporalWalker",
    "TrainConfig", "TrainingError", "WalkConfig", "build_alias_table", "build_snapshots", "cosine",
    "embed_graph", "erdos_renyi", "evaluate", "generate_walks", "kendall_tau", "precision_at_k",
    "rank_snapshots", "read_edge_list", "run_scaling", "snapshot_embedding", "spearman_rho",
    "split_snapshots_uniform", "step_distribution", "train", "two_regime_graph",
]
