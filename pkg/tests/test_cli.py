import subprocess
import sys

import numpy as np
import pytest

from conftest import FIXTURE_EDGES
from tempowalk.cli import build_parser, main, resolve_config
from test_evaluation import HAND_TRUTH, HAND_X


@pytest.fixture
def edge_file(tmp_path):
    path = tmp_path / "edges.txt"
    path.write_text("# src dst t w\n" + "".join(f"v{u} v{v} {t} {w}\n" for u, v, t, w in FIXTURE_EDGES))
    return path


def write_matrix(path, X):
    rows = [f"{len(X)} {X.shape[1]}"] + [f"{t} " + " ".join(repr(float(x)) for x in row) for t, row in enumerate(X)]
    path.write_text("\n".join(rows) + "\n")


def test_embed_defaults_header(edge_file, tmp_path):
    out = tmp_path / "emb.txt"
    assert main(["embed", str(edge_file), "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "3 128"
    assert len(lines) == 4 and len(lines[1].split()) == 129


def test_embed_is_deterministic(edge_file, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        assert main(["embed", str(edge_file), "-o", str(path), "--seed", "7", "--workers", "1",
                     "--epochs", "3", "--dim", "16"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_embed_missing_input(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert main(["embed", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_embed_bad_input_names_stage(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("a b zero\n")
    assert main(["embed", str(bad)]) == 2
    assert "parse" in capsys.readouterr().err


def test_embed_run_log_and_side_outputs(edge_file, tmp_path, capsys):
    out = tmp_path / "emb.txt"
    words, corpus, ckpt = tmp_path / "w.txt", tmp_path / "c.txt", tmp_path / "m.bin"
    code = main(["embed", str(edge_file), "-o", str(out), "--dim", "8", "--epochs", "1",
                 "--emit-words", str(words), "--corpus-out", str(corpus), "--checkpoint", str(ckpt)])
    assert code == 0
    err = capsys.readouterr().err
    for needle in ("config seed = 0", "config alpha = 0.8", "config dim = 8", "sentences", "tokens",
                   "dropped walks", "timings:"):
        assert needle in err
    assert words.read_text().splitlines()[0] == "6 8"
    assert corpus.read_text().splitlines()[0].split("\t")[0] in {"0", "1", "2"}
    assert ckpt.read_bytes()[:8] == b"TWMODEL\x00"


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nalpha = 0.6\nq = 2\nepochs = 4\n")
    args = build_parser().parse_args(["embed", "x", "--config", str(cfg), "--q", "3"])
    env = {"TEMPOWALK_EPOCHS": "9", "TEMPOWALK_DIRECTED": "true", "OTHER": "1"}
    merged = resolve_config(args, environ=env)
    assert merged["alpha"] == 0.6      # file over default
    assert merged["epochs"] == 9       # environment over file
    assert merged["q"] == 3.0          # flag over file
    assert merged["directed"] is True
    assert merged["walk_length"] == 32


def test_bad_config_key(tmp_path, edge_file):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["embed", str(edge_file), "--config", str(cfg)]) == 2


def test_invalid_parameter_is_usage_error(edge_file):
    assert main(["embed", str(edge_file), "--alpha", "1.5"]) == 2


def test_rank_all_and_single(tmp_path, capsys):
    path = tmp_path / "emb.txt"
    write_matrix(path, np.array([[1.0, 0], [0.9, 0.1], [0, 1]]))
    assert main(["rank", str(path), "--all"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    for line in lines:
        scores = [float(c.split(":")[1]) for c in line.split("\t")[1].split()]
        assert scores == sorted(scores, reverse=True)
    assert main(["rank", str(path), "--t", "0", "--k", "1"]) == 0
    out = capsys.readouterr().out.strip()
    assert out.startswith("0\t1:") and len(out.split("\t")[1].split()) == 1
    assert main(["rank", str(path), "--t", "3"]) == 2


def test_eval_fixtures(tmp_path, capsys):
    emb, truth = tmp_path / "emb.txt", tmp_path / "truth.txt"
    write_matrix(emb, HAND_X)
    truth.write_text("".join(f"{t}: {' '.join(map(str, r))}\n" for t, r in HAND_TRUTH.items()))
    assert main(["eval", str(emb), str(truth), "--ks", "2"]) == 0
    out = capsys.readouterr().out
    assert "p@2=0.600000" in out
    rows = {line.split("\t")[0]: line.split("\t")[1:] for line in out.splitlines() if "\t" in line}
    assert rows["2"][0] == "0.500000"
    # identity: truth equals the predicted order
    truth.write_text("0: 1 2 3 4\n1: 2 0 3 4\n2: 1 0 3 4\n3: 2 4 1 0\n4: 3 2 1 0\n")
    assert main(["eval", str(emb), str(truth), "--ks", "1"]) == 0
    avg = [line for line in capsys.readouterr().out.splitlines() if line.startswith("avg")][0]
    assert avg.split("\t")[1] == "1.000000"


def test_eval_reversal(tmp_path, capsys):
    emb, truth = tmp_path / "emb.txt", tmp_path / "truth.txt"
    write_matrix(emb, np.array([[1.0, 0], [1, 1], [0, 1]]))
    truth.write_text("0: 2 1\n1: 2 0\n2: 0 1\n")
    assert main(["eval", str(emb), str(truth), "--ks", "1"]) == 0
    out = capsys.readouterr().out
    assert "tau=-1.000000" in out


def test_info_manifest(edge_file, capsys):
    assert main(["info", str(edge_file)]) == 0
    assert capsys.readouterr().out.splitlines() == ["6 3", "0\t6", "1\t5", "2\t6"]


def test_bench_small(tmp_path):
    out = tmp_path / "bench.tsv"
    code = main(["bench", "--sizes", "2e2,1e3", "--runs", "1", "--walks", "2", "--walk-length", "6",
                 "--epochs", "1", "--dim", "8", "-o", str(out)])
    assert code == 0
    text = out.read_text()
    assert "# runs=1" in text
    assert len([ln for ln in text.splitlines() if not ln.startswith("#")]) == 2


def test_module_entry_point(edge_file):
    proc = subprocess.run([sys.executable, "-m", "tempowalk", "info", str(edge_file)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("6 3")


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "tempowalk", "rank"], capture_output=True, text=True)
    assert proc.returncode == 2
