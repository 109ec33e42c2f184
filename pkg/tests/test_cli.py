import json
import subprocess
import sys

import numpy as np
import pytest

from pgmult import cli
from pgmult.config import config_hash, load_config, parse_config
from pgmult.ctm import Corpus
from pgmult.errors import ConfigError, DataError
from pgmult.io import (
    UNK,
    build_vocab,
    data_path,
    encode,
    read_corpus,
    read_gp_counts,
    read_sequence,
    text_sequence,
    tokenize,
    write_corpus,
    write_gp_counts,
    write_sequence,
)
from pgmult.mult_gp import GPCountData
from pgmult.mult_lds import SequenceData

TINY_CTM = {
    "model": "ctm", "seed": 3, "sweeps": 30, "burn": 10, "thin": 5,
    "data": {"synthetic": {"vocab_size": 15, "n_docs": 20, "n_test": 8, "doc_len": 20}},
    "params": {"warm_sweeps": 5},
}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run_cli(*args, env=None):
    import os

    full_env = dict(os.environ)
    full_env.update(env or {})
    return subprocess.run([sys.executable, "-m", "pgmult.cli", *map(str, args)], capture_output=True, text=True,
                          env=full_env)


# ---------------------------------------------------------------------------
# io


def test_tokenize_and_vocab():
    words = tokenize("The cat's hat; the CAT, the dog!")
    assert words == ["the", "cat's", "hat", "the", "cat", "the", "dog"]
    vocab = build_vocab(words, 3)
    # <unk> absorbs three tokens and ties with "the"; ties break alphabetically
    assert vocab == [UNK, "the", "cat"]
    assert encode(["dog", "the"], vocab).tolist() == [0, 1]
    with pytest.raises(DataError):
        build_vocab(words, 1)
    with pytest.raises(DataError):
        encode(["x"], ["a", "b"])


def test_bundled_text_sequence():
    seq, vocab = text_sequence(data_path("genesis.txt"), 200, holdout=100)
    assert seq.obs.shape[0] >= 2000 and seq.obs.shape[1] == 200
    assert np.all(seq.obs.sum(axis=1) == 1)
    # every category appears in the training part
    assert np.all(seq.obs[:-100].sum(axis=0) > 0)
    assert len(set(vocab)) == 200


def test_corpus_round_trip(tmp_path):
    corpus = Corpus([np.array([0, 2, 2]), np.array([], dtype=int), np.array([1])], 3, vocab=["a", "b", "c"])
    write_corpus(corpus, tmp_path / "c.txt", tmp_path / "v.txt")
    back = read_corpus(tmp_path / "c.txt", tmp_path / "v.txt")
    assert back.vocab_size == 3 and [d.tolist() for d in back.docs] == [[0, 2, 2], [], [1]]


def test_count_tables_round_trip(tmp_path):
    gp = GPCountData(np.array([[0.0, 1.0], [2.0, 3.5]]), np.array([[1, 0, 4], [2, 2, 0]]))
    write_gp_counts(gp, tmp_path / "gp.csv")
    back = read_gp_counts(tmp_path / "gp.csv")
    assert np.array_equal(back.inputs, gp.inputs) and np.array_equal(back.counts, gp.counts)
    seq = SequenceData(np.array([[1, 0], [3, 4]]))
    write_sequence(seq, tmp_path / "s.csv")
    assert np.array_equal(read_sequence(tmp_path / "s.csv")[0].obs, seq.obs)


def test_malformed_tables(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,x\n")
    with pytest.raises(DataError):
        read_sequence(tmp_path / "bad.csv")
    (tmp_path / "neg.csv").write_text("c0,c1\n1,-2\n")
    with pytest.raises(DataError):
        read_sequence(tmp_path / "neg.csv")


# ---------------------------------------------------------------------------
# config


@pytest.mark.parametrize("raw, message", [
    ({"model": "ctm"}, "seed"),
    ({"model": "nope", "seed": 1}, "model"),
    ({"model": "ctm", "seed": 1, "colour": 1}, "unknown"),
    ({"model": "ctm", "seed": 1, "sweeps": 10, "burn": 10}, "burn"),
    ({"model": "ctm", "seed": 1, "params": {"n_topicz": 3}}, "unknown"),
    ({"model": "ctm", "seed": 1, "data": {"corpus": "missing.txt", "test_corpus": "x"}}, "does not exist"),
    ({"model": "sbmlds", "seed": 1, "data": {"text": "bundled:genesis.txt", "synthetic": {}}}, "exactly one"),
    ({"model": "ctm", "seed": True}, "seed"),
])
def test_config_errors(tmp_path, raw, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(raw, tmp_path)


def test_config_defaults_and_hash(tmp_path):
    cfg = parse_config({"model": "sbmlds", "seed": 4, "data": {"text": "bundled:genesis.txt"}}, tmp_path)
    assert (cfg.sweeps, cfg.burn, cfg.thin) == (2000, 1000, 50)
    assert cfg.params["state_dim"] == 3
    assert cfg.path("bundled:genesis.txt").exists()
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_bundled_configs_parse():
    for name in ("selfcheck.json", "ctm_synth.json", "sbmlds_text.json", "sbmlds_synth.json", "multgp_synth.json"):
        cfg = load_config(data_path(name))
        assert cfg.seed is not None


# ---------------------------------------------------------------------------
# commands


def test_run_writes_artifacts(tmp_path):
    cfg = dict(TINY_CTM, output_dir="out")
    assert cli.main(["run", str(write_config(tmp_path, cfg))]) == 0
    results = json.loads((tmp_path / "out" / "results.json").read_text())
    assert results["seed"] == 3 and results["config_sha256"] == config_hash(cfg)
    assert {"ctm_heldout_ll", "lda_heldout_ll", "sigma_sign_match"} <= set(results["metrics"])
    header = (tmp_path / "out" / "diagnostics.csv").read_text().splitlines()[0]
    assert header == "sweep,elapsed_s,metric_name,metric_value"
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config"] == cfg and manifest["seed"] == 3


def test_manifest_config_reruns_identically(tmp_path):
    cfg = dict(TINY_CTM, output_dir="first")
    cli.main(["run", str(write_config(tmp_path, cfg))])
    manifest = json.loads((tmp_path / "first" / "manifest.json").read_text())
    again = dict(manifest["config"], output_dir="second")
    cli.main(["run", str(write_config(tmp_path, again, "again.json"))])
    a = json.loads((tmp_path / "first" / "results.json").read_text())["metrics"]
    b = json.loads((tmp_path / "second" / "results.json").read_text())["metrics"]
    assert a == b


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(write_config(tmp_path, {"model": "ctm"}))]) == 1
    (tmp_path / "bad.csv").write_text("c0,c1\n1,oops\n")
    bad = {"model": "rawlds", "seed": 1, "data": {"counts": "bad.csv"}}
    assert cli.main(["run", str(write_config(tmp_path, bad, "bad.json"))]) == 2
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 1
    err = capsys.readouterr().err
    assert "config error" in err and "data error" in err


def test_numerical_failure_names_module_and_operation(tmp_path, monkeypatch, capsys):
    from pgmult.augmentation import GaussianPotential
    from pgmult.gaussian import LDSParams, lds_ffbs

    def broken(cfg, diag):
        params = LDSParams(np.eye(1), -np.eye(1), np.eye(1), np.zeros(1), np.eye(1))
        lds_ffbs(params, GaussianPotential(np.ones((3, 1)), np.zeros((3, 1))), np.random.default_rng(0))

    monkeypatch.setitem(cli.RUNNERS, "sbmlds", broken)
    cfg = {"model": "sbmlds", "seed": 1, "data": {"synthetic": {"T": 20}}}
    assert cli.main(["run", str(write_config(tmp_path, cfg))]) == 3
    assert "numerical failure in gaussian.lds_ffbs" in capsys.readouterr().err


def test_selfcheck_command(capsys):
    assert cli.main(["selfcheck"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 8


def test_selfcheck_config_runs(tmp_path):
    cfg = {"model": "selfcheck", "seed": 0, "output_dir": "sc"}
    assert cli.main(["run", str(write_config(tmp_path, cfg))]) == 0
    assert json.loads((tmp_path / "sc" / "results.json").read_text())["metrics"]["all_passed"] is True


def test_gen_single_topic_corpus(tmp_path):
    cfg = {"model": "ctm", "seed": 2, "output_dir": "g",
           "data": {"synthetic": {"n_topics": 1, "vocab_size": 8, "n_docs": 400, "n_test": 10, "doc_len": 25}}}
    assert cli.main(["gen", str(write_config(tmp_path, cfg))]) == 0
    corpus = read_corpus(tmp_path / "g" / "train.txt", tmp_path / "g" / "vocab.txt")
    truth = json.loads((tmp_path / "g" / "truth.json").read_text())
    beta = np.array(truth["beta"])
    assert beta.shape == (1, 8)
    # i.i.d. draws from the single topic: word frequencies are multinomial around beta
    tokens = np.concatenate(corpus.docs)
    freq = np.bincount(tokens, minlength=8)
    expected = beta[0] * tokens.size
    keep = expected > 5
    chi2 = np.sum((freq[keep] - expected[keep]) ** 2 / expected[keep])
    from scipy import stats

    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-3
    # and documents are exchangeable: per-document counts of the top word are binomial
    top = np.argmax(beta[0])
    per_doc = np.array([np.sum(d == top) for d in corpus.docs])
    assert per_doc.var() == pytest.approx(25 * beta[0, top] * (1 - beta[0, top]), rel=0.25)


def test_gen_sequence_with_vanishing_noise_is_constant(tmp_path):
    cfg = {"model": "sbmlds", "seed": 5, "output_dir": "g",
           "data": {"synthetic": {"T": 50, "D": 2, "K": 4, "noise": 1e-14, "angle": 0.0, "radius": 1.0}}}
    assert cli.main(["gen", str(write_config(tmp_path, cfg))]) == 0
    truth = json.loads((tmp_path / "g" / "truth.json").read_text())
    from pgmult.stick_breaking import pi_sb

    psi = np.array(truth["states"]) @ np.array(truth["C"]).T + np.array(truth["d"])
    pi = pi_sb(psi)
    assert np.max(np.abs(pi - pi[0])) < 1e-5
    seq, _ = read_sequence(tmp_path / "g" / "sequence.csv")
    assert seq.obs.shape == (50, 4)


def test_gen_then_run_from_files(tmp_path):
    gen = dict(TINY_CTM, output_dir="g")
    cli.main(["gen", str(write_config(tmp_path, gen, "gen.json"))])
    run = dict(TINY_CTM, output_dir="r", data={
        "corpus": "g/train.txt", "test_corpus": "g/test.txt", "vocab": "g/vocab.txt", "truth": "g/truth.json"})
    assert cli.main(["run", str(write_config(tmp_path, run, "run.json"))]) == 0
    from_files = json.loads((tmp_path / "r" / "results.json").read_text())["metrics"]
    direct_cfg = dict(TINY_CTM, output_dir="d")
    cli.main(["run", str(write_config(tmp_path, direct_cfg, "direct.json"))])
    direct = json.loads((tmp_path / "d" / "results.json").read_text())["metrics"]
    assert from_files["ctm_heldout_ll"] == direct["ctm_heldout_ll"]
    assert from_files["sigma_true"] == direct["sigma_true"]


@pytest.mark.parametrize("model, extra", [
    ("ctm-svi", {"params": {"steps": 3}}),
    ("lda", {}),
    ("multgp", {"burn": 5, "thin": 2, "data": {"synthetic": {"M": 6, "K": 5, "total": 100}},
                "params": {"n_keep": 4, "k": 2, "n_test": 1}}),
    ("rawlds", {"sweeps": 20, "burn": 10, "thin": 5, "data": {"synthetic": {"T": 40, "K": 4}}}),
])
def test_every_model_runs(tmp_path, model, extra):
    cfg = dict(TINY_CTM, model=model, output_dir="o")
    cfg.pop("params")
    cfg.update(extra)
    if model == "multgp":
        cfg.pop("sweeps")
    if model != "ctm-svi" and "data" not in extra:
        cfg["data"] = TINY_CTM["data"]
    assert cli.main(["run", str(write_config(tmp_path, cfg))]) == 0
    metrics = json.loads((tmp_path / "o" / "results.json").read_text())["metrics"]
    assert metrics


def test_text_run_reports_both_models(tmp_path):
    cfg = {"model": "sbmlds", "seed": 1, "output_dir": "t", "sweeps": 6, "burn": 3, "thin": 1,
           "data": {"text": "bundled:genesis.txt", "vocab_size": 200, "holdout": 100}, "params": {"state_dim": 2}}
    assert cli.main(["run", str(write_config(tmp_path, cfg))]) == 0
    metrics = json.loads((tmp_path / "t" / "results.json").read_text())["metrics"]
    assert np.isfinite(metrics["sbmlds_normalized_ll"]) and np.isfinite(metrics["rawlds_normalized_ll"])


def test_console_entry_point(tmp_path):
    proc = run_cli("selfcheck")
    assert proc.returncode == 0, proc.stderr
    proc = run_cli("run", tmp_path / "nothing.json")
    assert proc.returncode == 1
