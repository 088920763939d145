"""Command-line entry point: embed, rank, eval, bench, info."""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import os
import sys
import time

import numpy as np

from .bench import run_scaling
from .embedder import TrainConfig, TrainingError, read_embeddings, write_embeddings
from .evaluation import GroundTruth, evaluate, similarity_scores
from .graph import GraphError, bin_timestamps, format_manifest, parse_binning, read_edge_list
from .pipeline import embed_graph
from .walker import WalkConfig

log = logging.getLogger("tempowalk")

ENV_PREFIX = "TEMPOWALK_"

WALK_KEYS = [f.name for f in dataclasses.fields(WalkConfig)]
TRAIN_KEYS = [f.name for f in dataclasses.fields(TrainConfig)]
IO_KEYS = {"binning": "as-is", "delimiter": None}


class UsageError(Exception):
    """Bad arguments or unreadable/unwritable files (exit code 2)."""


def _field_types() -> dict:
    out = {}
    for cls in (WalkConfig, TrainConfig):
        for f in dataclasses.fields(cls):
            out[f.name] = type(f.default)
    return out


FIELD_TYPES = _field_types()


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    kind = FIELD_TYPES.get(key, str)
    text = value.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {value!r}")
    try:
        if kind is int:
            return int(float(text)) if "e" in text.lower() else int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise UsageError(f"{key}: expected {kind.__name__}, got {value!r}") from None
    return text


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    known = set(WALK_KEYS) | set(TRAIN_KEYS) | set(IO_KEYS)
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in known:
                raise UsageError(f"{path}:{lineno}: expected `key = value` with a known key")
            out[key] = _coerce(key, value)
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    known = set(WALK_KEYS) | set(TRAIN_KEYS) | set(IO_KEYS)
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in known:
                out[key] = _coerce(key, value)
    return out


def resolve_config(args: argparse.Namespace, environ=None) -> dict:
    """defaults < config file < TEMPOWALK_* environment < flags."""
    merged = {f.name: f.default for f in dataclasses.fields(WalkConfig)}
    merged.update({f.name: f.default for f in dataclasses.fields(TrainConfig) if f.name not in merged})
    merged.update(IO_KEYS)
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    merged.update(env_overrides(environ))
    for key in merged:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def build_configs(cfg: dict) -> tuple[WalkConfig, TrainConfig]:
    try:
        walk = WalkConfig(**{k: cfg[k] for k in WALK_KEYS})
        train = TrainConfig(**{k: cfg[k] for k in TRAIN_KEYS})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    return walk, train


def echo_config(cfg: dict) -> None:
    for key in sorted(cfg):
        log.info("config %s = %s", key, cfg[key])


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
        return
    try:
        fh = open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None
    with fh:
        yield fh


def _read_graph(path, cfg):
    if not os.path.exists(path):
        raise UsageError(f"input not found: {path}")
    try:
        graph = read_edge_list(path, delimiter=cfg["delimiter"])
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except GraphError as exc:
        raise UsageError(f"parse: {path}: {exc}") from None
    try:
        scheme, value = parse_binning(cfg["binning"])
        return bin_timestamps(graph, scheme, value)
    except GraphError as exc:
        raise UsageError(f"binning: {exc}") from None


def _read_embeddings(path) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            return read_embeddings(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_embed(args) -> int:
    cfg = resolve_config(args)
    walk_cfg, train_cfg = build_configs(cfg)
    echo_config(cfg)
    t0 = time.perf_counter()
    graph = _read_graph(args.edges, cfg)
    parse_time = time.perf_counter() - t0
    log.info("graph: %d vertices, %d snapshots, %d temporal edges",
             graph.num_vertices, graph.num_snapshots, graph.num_edges)
    try:
        result = embed_graph(graph, walk_cfg, train_cfg)
    except TrainingError as exc:
        log.error("train: %s", exc)
        return 1
    except (ValueError, MemoryError) as exc:
        log.error("walk: %s", exc)
        return 1
    stats = result.corpus.stats
    log.info("corpus: %d sentences, %d tokens, %d dropped walks, tables %s",
             result.corpus.num_sentences, result.corpus.num_tokens,
             stats.get("dropped_walks", 0), stats.get("table_mode"))
    timings = {"parse": parse_time, **result.timings}
    log.info("timings: %s", " ".join(f"{k}={v:.3f}s" for k, v in timings.items()))
    with _open_out(args.output) as fh:
        write_embeddings(fh, result.embeddings)
    if args.emit_words:
        with _open_out(args.emit_words) as fh:
            write_embeddings(fh, result.model.word_vectors)
    if args.corpus_out:
        with _open_out(args.corpus_out) as fh:
            result.corpus.write(fh)
    if args.checkpoint:
        try:
            result.model.save(args.checkpoint)
        except OSError as exc:
            raise UsageError(f"cannot write {args.checkpoint}: {exc.strerror}") from None
    return 0


def cmd_rank(args) -> int:
    X = _read_embeddings(args.embeddings)
    T = len(X)
    if args.all:
        queries = list(range(T))
    else:
        if not 0 <= args.t < T:
            raise UsageError(f"snapshot {args.t} out of range [0, {T})")
        queries = [args.t]
    k = T - 1 if args.k is None else args.k
    if k < 1:
        raise UsageError("k must be positive")
    for t in queries:
        scores = similarity_scores(X, t)
        others = np.array([i for i in range(T) if i != t])
        order = others[np.lexsort((others, -scores[others]))][:k]
        cells = " ".join(f"{i}:{scores[i]:.6f}" for i in order)
        print(f"{t}\t{cells}")
    return 0


def cmd_eval(args) -> int:
    X = _read_embeddings(args.embeddings)
    try:
        with open(args.truth, encoding="utf-8") as fh:
            truth = GroundTruth.read(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {args.truth}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{args.truth}: {exc}") from None
    try:
        report = evaluate(X, truth, ks=args.ks)
    except ValueError as exc:
        raise UsageError(f"eval: {exc}") from None
    sys.stdout.write(report.to_table())
    return 0


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    walk_cfg, train_cfg = build_configs(cfg)
    echo_config(cfg)
    result = run_scaling(args.sizes, avg_degree=args.avg_degree, num_snapshots=args.snapshots,
                         runs=args.runs, walk_cfg=walk_cfg, train_cfg=train_cfg, out_path=None)
    header = {"avg_degree": args.avg_degree, "snapshots": args.snapshots, "runs": args.runs,
              "workers": max(walk_cfg.workers, train_cfg.workers)}
    with _open_out(args.output) as fh:
        fh.write(result.plot_data(header))
    for pt in result.points:
        log.info("%d edges: %s", pt.num_edges, pt.error or f"{pt.wall_time_seconds:.3f}s {pt.phase_breakdown}")
    return 1 if any(pt.error for pt in result.points) else 0


def cmd_info(args) -> int:
    cfg = resolve_config(args)
    graph = _read_graph(args.edges, cfg)
    sys.stdout.write(format_manifest(graph))
    return 0


def _sizes(text: str) -> list[int]:
    try:
        return [int(float(s)) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _ks(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    # None means "not given" so lower-precedence sources survive
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--binning", help="as-is | fixed-width:W | quantile:C")
    p.add_argument("--delimiter", help="single-character field delimiter (default: whitespace)")
    w = p.add_argument_group("walks")
    w.add_argument("--walks", dest="walks_per_node", type=int)
    w.add_argument("--walk-length", type=int)
    w.add_argument("--p", type=float)
    w.add_argument("--q", type=float)
    w.add_argument("--alpha", type=float)
    w.add_argument("--seed", type=int)
    w.add_argument("--directed", action="store_const", const=True)
    w.add_argument("--min-walk-length", type=int)
    w.add_argument("--tables", choices=["precompute", "on-the-fly", "auto"])
    w.add_argument("--table-budget", type=int)
    w.add_argument("--workers", type=int)
    t = p.add_argument_group("training")
    t.add_argument("--dim", type=int)
    t.add_argument("--window", type=int)
    t.add_argument("--lr0", type=float)
    t.add_argument("--lr-min", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--negatives", type=int)
    t.add_argument("--mode", choices=["pv-dbow", "pv-dm"])
    t.add_argument("--unigram-power", type=float)
    t.add_argument("--dbow-words", action="store_const", const=True)
    t.add_argument("--f64", action="store_const", const=True, help="train and checkpoint in float64")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tempowalk", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="edge list -> snapshot embeddings")
    p.add_argument("edges")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--emit-words", metavar="PATH", help="also write vertex vectors")
    p.add_argument("--corpus-out", metavar="PATH", help="write the walk corpus")
    p.add_argument("--checkpoint", metavar="PATH", help="write a binary model checkpoint")
    _add_config_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("rank", help="embeddings -> per-snapshot rankings")
    p.add_argument("embeddings")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--all", action="store_true")
    g.add_argument("--t", type=int)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="embeddings + ground truth -> metrics")
    p.add_argument("embeddings")
    p.add_argument("truth")
    p.add_argument("--ks", type=_ks, default=[10, 20])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="scaling sweep on Erdos-Renyi graphs")
    p.add_argument("--sizes", type=_sizes, default=[100, 1000, 10000])
    p.add_argument("--avg-degree", type=float, default=10.0)
    p.add_argument("--snapshots", type=int, default=10)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("-o", "--output", default="-")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("info", help="snapshot manifest of an edge list")
    p.add_argument("edges")
    p.add_argument("--config")
    p.add_argument("--binning")
    p.add_argument("--delimiter")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tempowalk {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"tempowalk {args.command}: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
