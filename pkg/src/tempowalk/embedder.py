"""Paragraph vectors trained with negative sampling over a walk corpus.

Every sentence carries its snapshot index as paragraph tag, so all walks that
start in snapshot ``t`` form one document whose paragraph vector is the
snapshot embedding.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from ._rng import next_uniform, stream_seed
from .corpus import WalkCorpus

log = logging.getLogger(__name__)

MODES = ("pv-dbow", "pv-dm")
CHECKPOINT_MAGIC = b"TWMODEL\x00"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


class UndefinedSimilarity(ValueError):
    """Cosine similarity involving a zero vector."""


@dataclass
class TrainConfig:
    dim: int = 128
    window: int = 5
    lr0: float = 0.025
    lr_min: float = 0.0001
    epochs: int = 20
    negatives: int = 5
    mode: str = "pv-dbow"
    unigram_power: float = 0.75
    seed: int = 0
    workers: int = 1
    # interleave skip-gram word training (window-based) with PV-DBOW
    dbow_words: bool = False
    f64: bool = False

    def __post_init__(self):
        if self.dim < 1 or self.window < 1:
            raise ValueError("dim and window must be >= 1")
        if not 0 < self.lr_min <= self.lr0:
            raise ValueError("need 0 < lr_min <= lr0")
        if self.epochs < 0 or self.negatives < 0:
            raise ValueError("epochs and negatives must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def dtype(self):
        return np.float64 if self.f64 else np.float32


@dataclass
class Vocabulary:
    counts: np.ndarray
    cum_table: np.ndarray
    power: float

    def probabilities(self) -> np.ndarray:
        return np.diff(self.cum_table, prepend=0.0)


def build_vocab(corpus: WalkCorpus, power: float = 0.75) -> Vocabulary:
    """Token counts and the cumulative count**power noise distribution."""
    if corpus.num_tokens == 0:
        raise ValueError("corpus is empty")
    counts = corpus.token_counts.astype(np.int64)
    mass = np.where(counts > 0, counts.astype(np.float64) ** power, 0.0)
    cum = np.cumsum(mass) / mass.sum()
    cum[np.flatnonzero(counts)[-1]:] = 1.0
    return Vocabulary(counts, cum, power)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def negative_sampling_loss(hidden, positive, negatives):
    """Loss ``-log s(u.h) - sum log s(-u'.h)`` and its gradients.

    Returns ``(loss, d_hidden, d_positive, d_negatives)`` for the hidden
    vector ``h``, the positive output vector ``u`` and the rows ``u'`` of
    ``negatives``.
    """
    h = np.asarray(hidden, dtype=np.float64)
    u = np.asarray(positive, dtype=np.float64)
    neg = np.asarray(negatives, dtype=np.float64).reshape(-1, h.size)
    fp = u @ h
    fn = neg @ h
    loss = np.logaddexp(0.0, -fp) + np.logaddexp(0.0, fn).sum()
    gp = _sigmoid(fp) - 1.0
    gn = _sigmoid(fn)
    return loss, gp * u + gn @ neg, gp * h, np.outer(gn, h)


_FAST = {"reassoc", "contract", "arcp"}


@nb.njit(cache=True, fastmath=_FAST, error_model="numpy")
def ns_update(hidden, ctx, targets, ntargets, lr, grad):
    """Apply one negative-sampling step; ``targets[0]`` is the positive.

    Output rows of ``ctx`` are updated in place; the step for ``hidden`` is
    accumulated into ``grad`` and left for the caller. Returns the loss.
    """
    dim = hidden.shape[0]
    loss = 0.0
    for k in range(ntargets):
        row = ctx[targets[k]]
        acc = row[0] * 0
        for d in range(dim):
            acc += hidden[d] * row[d]
        f = min(max(float(acc), -30.0), 30.0)
        e = math.exp(-f)
        sig = 1.0 / (1.0 + e)
        if k == 0:
            g = 1.0 - sig
            loss += math.log1p(e)
        else:
            g = -sig
            loss += f + math.log1p(e)
        gl = row[0] * 0 + g * lr
        for d in range(dim):
            grad[d] += gl * row[d]
            row[d] += gl * hidden[d]
    return loss


@nb.njit(cache=True, inline="always")
def _draw_targets(pos, cum, negatives, targets, state):
    targets[0] = pos
    nt = 1
    for _ in range(negatives):
        w = np.searchsorted(cum, next_uniform(state), side="right")
        if w >= cum.shape[0]:
            w = cum.shape[0] - 1
        if w != pos:
            targets[nt] = w
            nt += 1
    return nt


@nb.njit(cache=True, fastmath=_FAST, error_model="numpy")
def _epoch(order, tokens, offsets, tags, P, W, C, cum, negatives, window, dm, dbow_words,
           lr0, lr_min, done0, step_scale, total, state, out):
    """One pass over ``order``. ``out`` receives (loss sum, updates, tokens)."""
    dim = P.shape[1]
    grad = np.empty(dim, P.dtype)
    hidden = np.empty(dim, P.dtype)
    targets = np.empty(negatives + 1, np.int64)
    loss = 0.0
    updates = 0
    done = 0
    for s in order:
        lo = offsets[s]
        hi = offsets[s + 1]
        pv = P[tags[s]]
        for i in range(lo, hi):
            frac = (done0 + done * step_scale) / total
            lr = lr0 - (lr0 - lr_min) * min(frac, 1.0)
            done += 1
            b = window
            if dm or dbow_words:
                b = 1 + int(next_uniform(state) * window)
            if dm:
                for d in range(dim):
                    hidden[d] = pv[d]
                count = 1
                for j in range(max(lo, i - b), min(hi, i + b + 1)):
                    if j != i:
                        wv = W[tokens[j]]
                        for d in range(dim):
                            hidden[d] += wv[d]
                        count += 1
                for d in range(dim):
                    hidden[d] /= count
                    grad[d] = 0.0
                nt = _draw_targets(tokens[i], cum, negatives, targets, state)
                loss += ns_update(hidden, C, targets, nt, lr, grad)
                updates += 1
                for d in range(dim):
                    grad[d] /= count
                    pv[d] += grad[d]
                for j in range(max(lo, i - b), min(hi, i + b + 1)):
                    if j != i:
                        wv = W[tokens[j]]
                        for d in range(dim):
                            wv[d] += grad[d]
            else:
                for d in range(dim):
                    grad[d] = 0.0
                nt = _draw_targets(tokens[i], cum, negatives, targets, state)
                loss += ns_update(pv, C, targets, nt, lr, grad)
                updates += 1
                for d in range(dim):
                    pv[d] += grad[d]
                if dbow_words:
                    for j in range(max(lo, i - b), min(hi, i + b + 1)):
                        if j != i:
                            wv = W[tokens[j]]
                            for d in range(dim):
                                grad[d] = 0.0
                            nt = _draw_targets(tokens[i], cum, negatives, targets, state)
                            loss += ns_update(wv, C, targets, nt, lr, grad)
                            updates += 1
                            for d in range(dim):
                                wv[d] += grad[d]
    out[0] = loss
    out[1] = updates
    out[2] = done


@nb.njit(cache=True, parallel=True)
def _epoch_parallel(nworkers, order, tokens, offsets, tags, P, W, C, cum, negatives, window, dm, dbow_words,
                    lr0, lr_min, done0, total, states, outs):
    # lock-free shared updates; per-worker progress is scaled to approximate global progress
    per = (order.shape[0] + nworkers - 1) // nworkers
    for k in nb.prange(nworkers):
        lo = k * per
        hi = min(order.shape[0], lo + per)
        _epoch(order[lo:hi], tokens, offsets, tags, P, W, C, cum, negatives, window, dm, dbow_words,
               lr0, lr_min, done0, float(nworkers), total, states[k], outs[k])


@dataclass
class EmbeddingModel:
    paragraph_vectors: np.ndarray
    word_vectors: np.ndarray
    context_vectors: np.ndarray
    vocab: Vocabulary | None = None
    config: TrainConfig | None = None
    epoch_losses: list[float] = field(default_factory=list)
    updates: int = 0

    @property
    def num_paragraph_tags(self) -> int:
        return self.paragraph_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.paragraph_vectors.shape[1]

    def snapshot_embedding(self, t: int) -> np.ndarray:
        return snapshot_embedding(self, t)

    def check_finite(self, epoch: int) -> None:
        for name in ("paragraph_vectors", "word_vectors", "context_vectors"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise TrainingError(f"non-finite {name} after epoch {epoch} ({self.updates} updates)")

    def save(self, path) -> None:
        """Versioned little-endian checkpoint of the three matrices."""
        dt = self.paragraph_vectors.dtype
        width = 8 if dt == np.float64 else 4
        fmt = "<f8" if width == 8 else "<f4"
        T, dim = self.paragraph_vectors.shape
        V = self.word_vectors.shape[0]
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<IIQQQ", CHECKPOINT_VERSION, width, T, V, dim))
            for m in (self.paragraph_vectors, self.word_vectors, self.context_vectors):
                fh.write(np.ascontiguousarray(m, dtype=fmt).tobytes())

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        with open(path, "rb") as fh:
            if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
                raise ValueError(f"{path}: not a model checkpoint")
            version, width, T, V, dim = struct.unpack("<IIQQQ", fh.read(32))
            if version != CHECKPOINT_VERSION or width not in (4, 8):
                raise ValueError(f"{path}: unsupported checkpoint version {version}/{width}")
            fmt = np.dtype("<f8" if width == 8 else "<f4")

            def mat(rows):
                buf = fh.read(rows * dim * width)
                if len(buf) != rows * dim * width:
                    raise ValueError(f"{path}: truncated checkpoint")
                return np.frombuffer(buf, dtype=fmt).reshape(rows, dim).astype(fmt.newbyteorder("="))

            return cls(mat(T), mat(V), mat(V))


def init_model(corpus: WalkCorpus, cfg: TrainConfig) -> EmbeddingModel:
    rng = np.random.default_rng(cfg.seed)
    half = 0.5 / cfg.dim
    T, V = corpus.num_paragraph_tags, corpus.num_vertices
    return EmbeddingModel(
        paragraph_vectors=rng.uniform(-half, half, (T, cfg.dim)).astype(cfg.dtype),
        word_vectors=rng.uniform(-half, half, (V, cfg.dim)).astype(cfg.dtype),
        context_vectors=np.zeros((V, cfg.dim), dtype=cfg.dtype),
        config=cfg,
    )


def train(corpus: WalkCorpus, cfg: TrainConfig | None = None) -> EmbeddingModel:
    """Fit paragraph vectors; sentences are visited in a fresh seeded order
    each epoch and the learning rate decays linearly over all epochs."""
    cfg = cfg or TrainConfig()
    vocab = build_vocab(corpus, cfg.unigram_power)
    model = init_model(corpus, cfg)
    model.vocab = vocab
    rng = np.random.default_rng([cfg.seed, 1])
    total = float(max(1, cfg.epochs * corpus.num_tokens))
    dm = cfg.mode == "pv-dm"
    seed = np.uint64(cfg.seed & (2**64 - 1))
    if cfg.workers > 1:
        nb.set_num_threads(min(cfg.workers, nb.config.NUMBA_NUM_THREADS))
    for epoch in range(cfg.epochs):
        order = rng.permutation(corpus.num_sentences)
        done0 = float(epoch * corpus.num_tokens)
        args = (corpus.tokens, corpus.offsets, corpus.tags, model.paragraph_vectors, model.word_vectors,
                model.context_vectors, vocab.cum_table, cfg.negatives, cfg.window, dm, cfg.dbow_words,
                cfg.lr0, cfg.lr_min, done0)
        if cfg.workers == 1:
            state = np.array([stream_seed(seed, epoch, 0, 7)], np.uint64)
            out = np.zeros(3)
            _epoch(order, *args, 1.0, total, state, out)
            outs = out[None]
        else:
            states = np.array([[stream_seed(seed, epoch, k, 7)] for k in range(cfg.workers)], np.uint64)
            outs = np.zeros((cfg.workers, 3))
            _epoch_parallel(cfg.workers, order, *args, total, states, outs)
        loss, updates = outs[:, 0].sum(), int(outs[:, 1].sum())
        model.updates += updates
        model.epoch_losses.append(loss / max(updates, 1))
        model.check_finite(epoch)
        log.debug("epoch %d: mean loss %.5f over %d updates", epoch, model.epoch_losses[-1], updates)
    return model


def snapshot_embedding(model: EmbeddingModel, t: int) -> np.ndarray:
    if not 0 <= t < model.num_paragraph_tags:
        raise IndexError(f"snapshot {t} out of range [0, {model.num_paragraph_tags})")
    return model.paragraph_vectors[t].copy()


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors differ in length")
    na, nb_ = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb_ == 0:
        raise UndefinedSimilarity("cosine similarity with a zero vector")
    return float(np.clip(a @ b / (na * nb_), -1.0, 1.0))


def write_embeddings(fh, vectors: np.ndarray) -> None:
    """Header ``rows dim`` then ``i x1 ... x_dim`` with 9 significant digits."""
    rows, dim = vectors.shape
    fh.write(f"{rows} {dim}\n")
    for i, row in enumerate(vectors):
        fh.write(f"{i} " + " ".join(f"{x:.9g}" for x in row) + "\n")


def read_embeddings(fh) -> np.ndarray:
    header = fh.readline().split()
    if len(header) != 2:
        raise ValueError("embedding file needs a `rows dim` header")
    rows, dim = map(int, header)
    out = np.zeros((rows, dim))
    seen = np.zeros(rows, dtype=bool)
    for lineno, line in enumerate(fh, start=2):
        cols = line.split()
        if not cols:
            continue
        if len(cols) != dim + 1:
            raise ValueError(f"line {lineno}: expected {dim + 1} columns")
        i = int(cols[0])
        out[i] = np.array(cols[1:], dtype=np.float64)
        seen[i] = True
    if not seen.all():
        raise ValueError(f"missing rows {np.flatnonzero(~seen).tolist()}")
    return out
