import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempowalk.corpus import WalkCorpus
from tempowalk.embedder import (
    EmbeddingModel,
    TrainConfig,
    TrainingError,
    UndefinedSimilarity,
    build_vocab,
    cosine,
    negative_sampling_loss,
    ns_update,
    read_embeddings,
    snapshot_embedding,
    train,
    write_embeddings,
)
from tempowalk.evaluation import rank_snapshots


def random_corpus(seed=0, sentences=400, length=25, vocab=50, tags=4):
    rng = np.random.default_rng(seed)
    rows = [(int(rng.integers(tags)), rng.integers(vocab, size=length).tolist()) for _ in range(sentences)]
    return WalkCorpus.from_sentences(rows, tags, vocab)


def central_difference(f, x, h=1e-4):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def test_vocab_symmetric():
    corpus = WalkCorpus.from_sentences([(0, [0] * 10 + [1] * 10)])
    np.testing.assert_allclose(build_vocab(corpus).probabilities(), [0.5, 0.5])


def test_vocab_power():
    corpus = WalkCorpus.from_sentences([(0, [0] * 16 + [1])])
    np.testing.assert_allclose(build_vocab(corpus, 0.75).probabilities(), [8 / 9, 1 / 9], atol=1e-15)


def test_vocab_unseen_tokens_never_sampled():
    corpus = WalkCorpus.from_sentences([(0, [2, 2, 0])], num_vertices=4)
    probs = build_vocab(corpus).probabilities()
    assert probs[1] == 0 and probs[3] == 0
    assert probs.sum() == pytest.approx(1.0)


def test_vocab_empty():
    with pytest.raises(ValueError):
        build_vocab(WalkCorpus.from_sentences([], 1, 1))


def test_gradient_check_worked_example():
    rng = np.random.default_rng(0)
    h, u, neg = rng.normal(size=8), rng.normal(size=8), rng.normal(size=(2, 8))
    _, gh, gu, gn = negative_sampling_loss(h, u, neg)
    assert rel_err(gh, central_difference(lambda x: negative_sampling_loss(x, u, neg)[0], h)) < 1e-4
    assert rel_err(gu, central_difference(lambda x: negative_sampling_loss(h, x, neg)[0], u)) < 1e-4
    assert rel_err(gn, central_difference(lambda x: negative_sampling_loss(h, u, x)[0], neg)) < 1e-4


def test_gradient_check_random_configurations():
    rng = np.random.default_rng(123)
    for _ in range(100):
        dim, k = int(rng.integers(1, 33)), int(rng.integers(0, 9))
        # keep dot products O(1); saturated sigmoids leave gradients below FD resolution
        scale = rng.choice([0.1, 0.5, 1.0, 1.5]) / dim ** 0.25
        h, u, neg = (rng.normal(scale=scale, size=s) for s in (dim, dim, (k, dim)))
        _, gh, gu, gn = negative_sampling_loss(h, u, neg)
        assert rel_err(gh, central_difference(lambda x: negative_sampling_loss(x, u, neg)[0], h)) < 1e-4
        assert rel_err(gu, central_difference(lambda x: negative_sampling_loss(h, x, neg)[0], u)) < 1e-4
        if k:
            assert rel_err(gn, central_difference(lambda x: negative_sampling_loss(h, u, x)[0], neg)) < 1e-4


def test_kernel_applies_negative_gradient():
    rng = np.random.default_rng(5)
    dim, lr = 12, 0.05
    hidden = rng.normal(scale=0.5, size=dim)
    ctx = rng.normal(scale=0.5, size=(6, dim))
    targets = np.array([2, 0, 4, 5])
    loss, gh, gu, gn = negative_sampling_loss(hidden, ctx[2], ctx[[0, 4, 5]])
    new_ctx = ctx.copy()
    grad = np.zeros(dim)
    kernel_loss = ns_update(hidden, new_ctx, targets, 4, lr, grad)
    assert kernel_loss == pytest.approx(loss, rel=1e-12)
    np.testing.assert_allclose(grad, -lr * gh, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(new_ctx[2] - ctx[2], -lr * gu, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(new_ctx[[0, 4, 5]] - ctx[[0, 4, 5]], -lr * gn, rtol=1e-10, atol=1e-14)
    np.testing.assert_array_equal(new_ctx[[1, 3]], ctx[[1, 3]])


def test_mean_hidden_gradient():
    # PV-DM feeds the mean of its inputs; each input receives d_hidden / count
    rng = np.random.default_rng(8)
    inputs = rng.normal(size=(3, 6))
    u, neg = rng.normal(size=6), rng.normal(size=(2, 6))

    def loss_of(first):
        stack = np.vstack([first, inputs[1:]])
        return negative_sampling_loss(stack.mean(axis=0), u, neg)[0]

    _, gh, _, _ = negative_sampling_loss(inputs.mean(axis=0), u, neg)
    assert rel_err(gh / 3, central_difference(loss_of, inputs[0])) < 1e-4


def test_config_validation():
    for bad in (dict(dim=0), dict(window=0), dict(lr_min=0.1, lr0=0.01), dict(mode="skipgram"),
                dict(epochs=-1)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    c = TrainConfig()
    assert (c.dim, c.window, c.lr0) == (128, 5, 0.025)


def test_zero_epochs_is_initialization():
    corpus = random_corpus()
    model = train(corpus, TrainConfig(epochs=0, dim=32, seed=3))
    again = train(corpus, TrainConfig(epochs=0, dim=32, seed=3))
    np.testing.assert_array_equal(model.paragraph_vectors, again.paragraph_vectors)
    assert np.all(np.abs(model.paragraph_vectors) <= 0.5 / 32)
    assert np.all(np.linalg.norm(model.paragraph_vectors, axis=1) <= 0.5 * math.sqrt(32) / 32)
    assert not model.context_vectors.any()


def test_separability_identical_documents():
    rng = np.random.default_rng(0)
    wins = 0
    for seed in range(10):
        rows = []
        for _ in range(60):
            s = rng.integers(0, 20, size=20).tolist()
            rows += [(0, s), (1, s), (2, (rng.integers(20, 40, size=20)).tolist())]
        corpus = WalkCorpus.from_sentences(rows, 3, 40)
        model = train(corpus, TrainConfig(dim=16, epochs=5, seed=seed))
        X = model.paragraph_vectors
        wins += cosine(X[0], X[1]) > cosine(X[0], X[2])
    assert wins >= 9


def test_snapshot_embedding_default_dim():
    corpus = random_corpus(sentences=50, tags=3)
    model = train(corpus, TrainConfig(epochs=1))
    x = snapshot_embedding(model, 0)
    assert x.shape == (128,) and np.all(np.isfinite(x))
    np.testing.assert_array_equal(x, model.snapshot_embedding(0))
    with pytest.raises(IndexError):
        snapshot_embedding(model, 3)


def test_cosine_examples():
    assert cosine([2, 3], [2, 3]) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 1], [1, 0]) == pytest.approx(0.70710678, abs=1e-8)
    with pytest.raises(UndefinedSimilarity):
        cosine([0, 0], [1, 0])


def test_loss_decreases():
    corpus = random_corpus(seed=1, sentences=800, length=30, vocab=80, tags=6)
    # topical structure: tag k prefers its own token range
    rng = np.random.default_rng(2)
    tok = corpus.tokens.copy()
    tags = np.repeat(corpus.tags, np.diff(corpus.offsets))
    mask = rng.random(len(tok)) < 0.7
    tok[mask] = (tags[mask] * 13 + rng.integers(0, 13, mask.sum())) % 80
    corpus = WalkCorpus(tok, corpus.offsets, corpus.tags, 6, 80)
    assert corpus.num_tokens >= 10_000
    model = train(corpus, TrainConfig(dim=24, epochs=8, seed=4))
    q = len(model.epoch_losses) // 4
    assert np.mean(model.epoch_losses[-q:]) <= np.mean(model.epoch_losses[:q])


def test_seed_determinism():
    corpus = random_corpus()
    a = train(corpus, TrainConfig(dim=16, epochs=2, seed=9))
    b = train(corpus, TrainConfig(dim=16, epochs=2, seed=9))
    c = train(corpus, TrainConfig(dim=16, epochs=2, seed=10))
    np.testing.assert_array_equal(a.paragraph_vectors, b.paragraph_vectors)
    np.testing.assert_array_equal(a.context_vectors, b.context_vectors)
    assert not np.array_equal(a.paragraph_vectors, c.paragraph_vectors)


@pytest.mark.parametrize("extra", [dict(mode="pv-dm"), dict(dbow_words=True), dict(workers=3), dict(f64=True)])
def test_modes_train(extra):
    corpus = random_corpus(sentences=100)
    model = train(corpus, TrainConfig(dim=16, epochs=2, **extra))
    assert np.all(np.isfinite(model.paragraph_vectors))
    assert model.paragraph_vectors.dtype == (np.float64 if extra.get("f64") else np.float32)
    assert len(model.epoch_losses) == 2


def test_pv_dm_moves_word_vectors():
    corpus = random_corpus(sentences=50)
    init = train(corpus, TrainConfig(dim=8, epochs=0, mode="pv-dm"))
    model = train(corpus, TrainConfig(dim=8, epochs=1, mode="pv-dm"))
    assert not np.array_equal(init.word_vectors, model.word_vectors)


def test_divergence_is_reported():
    corpus = random_corpus(sentences=50)
    with pytest.raises(TrainingError, match="epoch 0"):
        train(corpus, TrainConfig(dim=8, epochs=2, lr0=1e38, lr_min=1e37))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_ranking_scale_free(seed, scale):
    X = np.random.default_rng(seed).normal(size=(6, 4))
    for t in range(6):
        assert rank_snapshots(X, t) == rank_snapshots(X * scale, t)


@pytest.mark.parametrize("f64", [False, True])
def test_checkpoint_round_trip(tmp_path, f64):
    model = train(random_corpus(sentences=40), TrainConfig(dim=8, epochs=1, f64=f64))
    path = tmp_path / "model.bin"
    model.save(path)
    back = EmbeddingModel.load(path)
    for name in ("paragraph_vectors", "word_vectors", "context_vectors"):
        np.testing.assert_array_equal(getattr(back, name), getattr(model, name))
    assert back.paragraph_vectors.dtype == model.paragraph_vectors.dtype
    raw = path.read_bytes()
    assert raw[:8] == b"TWMODEL\x00"
    (tmp_path / "bad.bin").write_bytes(b"nope" + raw[4:])
    with pytest.raises(ValueError):
        EmbeddingModel.load(tmp_path / "bad.bin")


def test_embedding_text_format():
    X = np.array([[1.0, -0.5], [1 / 3, 2e-10]])
    buf = io.StringIO()
    write_embeddings(buf, X)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "2 2"
    assert lines[2] == "1 0.333333333 2e-10"
    np.testing.assert_allclose(read_embeddings(io.StringIO(buf.getvalue())), X, rtol=1e-8)
