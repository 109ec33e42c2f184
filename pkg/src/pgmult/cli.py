"""``pgmult run|gen|selfcheck``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
failure (the message names the module and operation that failed).
"""

import argparse
import csv
import json
import platform
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .ctm import Corpus
from .errors import BoundaryError, ConfigError, DataError, LinAlgError, ParameterError
from .experiments import (
    Diagnostics,
    ctm_compare,
    ctm_synthetic,
    lds_compare,
    lds_synthetic_data,
    multgp_experiment,
    multgp_synthetic,
    svi_run,
)
from .io import (
    read_corpus,
    read_gp_counts,
    read_sequence,
    text_sequence,
    write_corpus,
    write_gp_counts,
    write_json,
    write_sequence,
)
from .mult_lds import SequenceData
from .selfcheck import run_selfcheck

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3
DIAGNOSTIC_COLUMNS = ["sweep", "elapsed_s", "metric_name", "metric_value"]


class _Truth:
    def __init__(self, beta, sigma):
        self.beta = np.asarray(beta, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)


# ---------------------------------------------------------------------------
# data loading


def _topic_data(cfg):
    data, p = cfg.data, cfg.params
    if "corpus" in data:
        vocab = cfg.path(data["vocab"]) if "vocab" in data else None
        train = read_corpus(cfg.path(data["corpus"]), vocab)
        test = read_corpus(cfg.path(data["test_corpus"]), vocab)
        V = max(train.vocab_size, test.vocab_size)
        train, test = Corpus(train.docs, V), Corpus(test.docs, V)
        truth = None
        if "truth" in data:
            t = json.loads(cfg.path(data["truth"]).read_text(encoding="utf-8"))
            truth = _Truth(t["beta"], t["sigma"])
        return train, test, truth, p["n_topics"]
    syn = dict(data.get("synthetic", {}))
    syn.setdefault("n_topics", p["n_topics"])
    syn.setdefault("alpha_beta", p["alpha_beta"])
    try:
        train, test, truth = ctm_synthetic(cfg.seed, **syn)
    except TypeError as exc:
        raise ConfigError(f"bad synthetic corpus settings: {exc}") from exc
    return train, test, truth, syn["n_topics"]


def _sequence_data(cfg):
    data = cfg.data
    holdout = data.get("holdout", 100 if ("text" in data or "tokens" in data) else 10)
    if not isinstance(holdout, int) or holdout < 1:
        raise ConfigError("holdout must be a positive integer")
    if "text" in data:
        seq, _ = text_sequence(cfg.path(data["text"]), data.get("vocab_size", 200), holdout)
    elif "tokens" in data:
        vocab = cfg.path(data["vocab"]) if "vocab" in data else None
        corpus = read_corpus(cfg.path(data["tokens"]), vocab)
        tokens = np.concatenate(corpus.docs) if corpus.docs else np.zeros(0, np.int64)
        seq = SequenceData.from_tokens(tokens, corpus.vocab_size)
    elif "counts" in data:
        seq, _ = read_sequence(cfg.path(data["counts"]))
    else:
        syn = {k: v for k, v in data.get("synthetic", {}).items() if k != "horizon"}
        try:
            seq, _, _ = lds_synthetic_data(cfg.seed, **syn)
        except TypeError as exc:
            raise ConfigError(f"bad synthetic sequence settings: {exc}") from exc
    T = seq.obs.shape[0]
    if holdout >= T:
        raise DataError(f"holdout {holdout} leaves no training steps out of {T}")
    return seq.split(T - holdout)


def _gp_data(cfg):
    if "counts" in cfg.data:
        return read_gp_counts(cfg.path(cfg.data["counts"]))
    try:
        return multgp_synthetic(cfg.seed, **cfg.data.get("synthetic", {}))
    except TypeError as exc:
        raise ConfigError(f"bad synthetic count settings: {exc}") from exc


# ---------------------------------------------------------------------------
# runners: each returns the metrics dict and fills the diagnostics


def _run_topic(cfg, diag):
    train, test, truth, T = _topic_data(cfg)
    p = cfg.params
    if cfg.model == "ctm-svi":
        trace, _ = svi_run(
            train, test, T, cfg.seed, p["steps"], p["step_size"], p["batch_size"], p["alpha_beta"], p["eval_seed"],
            p["split_ratio"], diagnostics=diag,
        )
        return {"svi_heldout_ll": trace[-1], "svi_trace": trace}
    if cfg.model == "lda":
        models = ("lda",)
    else:
        models = ("ctm", "lda") if p["baseline"] else ("ctm",)
    return ctm_compare(
        train, test, T, cfg.seed, cfg.sweeps, cfg.burn, cfg.thin, p["alpha_beta"], p.get("warm_sweeps", 0),
        p["eval_seed"], p["split_ratio"], models=models, truth=truth, diagnostics=diag,
    )


def _run_sequence(cfg, diag):
    train, future = _sequence_data(cfg)
    p = cfg.params
    if cfg.model == "rawlds":
        models = ("rawlds",)
    else:
        models = ("sbmlds", "rawlds") if p["baseline"] else ("sbmlds",)
    out = lds_compare(train, future, p["state_dim"], cfg.seed, cfg.sweeps, cfg.burn, cfg.thin, models, diag)
    out["train_steps"], out["forecast_steps"] = int(train.obs.shape[0]), int(future.obs.shape[0])
    out["future_counts"] = int(future.obs.sum())
    return out


def _run_gp(cfg, diag):
    p = cfg.params
    return multgp_experiment(
        _gp_data(cfg), cfg.seed, p["n_test"], p["n_obs"], p["lengthscale"], p["variance"], cfg.burn, p["n_keep"],
        cfg.thin, p["k"], p["noise_var"], diagnostics=diag,
    )


RUNNERS = {
    "ctm": _run_topic,
    "ctm-svi": _run_topic,
    "lda": _run_topic,
    "sbmlds": _run_sequence,
    "rawlds": _run_sequence,
    "multgp": _run_gp,
}


def write_diagnostics(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(DIAGNOSTIC_COLUMNS)
        for sweep, elapsed, name, value in rows:
            w.writerow([sweep, f"{elapsed:.6f}", name, repr(value)])


def manifest(cfg, config_path):
    return {
        "command": ["pgmult", "run", str(config_path)],
        "config": cfg.raw,
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "pgmult_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def cmd_run(config_path):
    cfg = load_config(config_path)
    diag = Diagnostics()
    if cfg.model == "selfcheck":
        report = run_selfcheck()
        metrics = {"checks": report, "all_passed": all(r["passed"] for r in report)}
    else:
        metrics = RUNNERS[cfg.model](cfg, diag)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    results = {"model": cfg.model, "seed": cfg.seed, "config_sha256": cfg.sha256, "metrics": _plain(metrics)}
    write_json(results, cfg.output_dir / "results.json")
    write_diagnostics(diag, cfg.output_dir / "diagnostics.csv")
    write_json(manifest(cfg, config_path), cfg.output_dir / "manifest.json")
    print(f"wrote {cfg.output_dir / 'results.json'}")
    if cfg.model == "selfcheck" and not metrics["all_passed"]:
        return EXIT_NUMERICAL
    return 0


def cmd_gen(config_path):
    cfg = load_config(config_path)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if cfg.model in ("ctm", "ctm-svi", "lda"):
        if "corpus" in cfg.data:
            raise ConfigError("gen needs data.synthetic, not a corpus file")
        train, test, truth, _ = _topic_data(cfg)
        write_corpus(train, out / "train.txt", out / "vocab.txt")
        write_corpus(test, out / "test.txt")
        write_json({"beta": truth.beta.tolist(), "mu": truth.mu.tolist(), "sigma": truth.sigma.tolist()},
                   out / "truth.json")
    elif cfg.model in ("sbmlds", "rawlds"):
        syn = {k: v for k, v in cfg.data.get("synthetic", {}).items() if k != "horizon"}
        seq, params, states = lds_synthetic_data(cfg.seed, **syn)
        write_sequence(seq, out / "sequence.csv")
        write_json({"A": params.A.tolist(), "B": params.B.tolist(), "C": params.C.tolist(), "d": params.d.tolist(),
                    "states": states.tolist()}, out / "truth.json")
    elif cfg.model == "multgp":
        write_gp_counts(_gp_data(cfg), out / "counts.csv")
    else:
        raise ConfigError(f"gen does not support model {cfg.model!r}")
    print(f"wrote synthetic data to {out}")
    return 0


def cmd_selfcheck():
    report = run_selfcheck()
    for r in report:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['detail']}")
    return 0 if all(r["passed"] for r in report) else EXIT_NUMERICAL


def _plain(obj):
    """Convert numpy scalars and arrays so the JSON encoder accepts them."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _failing_operation(exc):
    frames = [f for f in traceback.extract_tb(exc.__traceback__) if f"{Path('pgmult')}" in f.filename]
    if not frames:
        return "unknown operation"
    f = frames[-1]
    module = Path(f.filename).stem
    parent = Path(f.filename).parent.name
    if parent != "pgmult":
        module = f"{parent}.{module}"
    return f"{module}.{f.name}"


def main(argv=None):
    parser = argparse.ArgumentParser(prog="pgmult", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a JSON config")
    p_run.add_argument("config")
    p_gen = sub.add_parser("gen", help="write the synthetic dataset described by a JSON config")
    p_gen.add_argument("config")
    sub.add_parser("selfcheck", help="run the built-in invariant suite")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "gen":
            return cmd_gen(args.config)
        return cmd_selfcheck()
    except (ConfigError, ParameterError) as exc:
        print(f"pgmult: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"pgmult: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (LinAlgError, BoundaryError, FloatingPointError, OverflowError) as exc:
        print(f"pgmult: numerical failure in {_failing_operation(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
