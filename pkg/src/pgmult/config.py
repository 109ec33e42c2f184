"""JSON run configurations.

A config is one JSON object::

    {
      "model": "ctm" | "ctm-svi" | "lda" | "multgp" | "sbmlds" | "rawlds" | "selfcheck",
      "seed": 1,                      # required, no clock-based default
      "output_dir": "out/ctm",        # relative to the config file
      "sweeps": 1000, "burn": 500, "thin": 25,
      "data": {...},                  # model specific, see DATA_KEYS
      "params": {...}                 # model specific, see PARAM_DEFAULTS
    }

Data paths are relative to the config file; ``bundled:<name>`` refers to a
file shipped with the package.  Unknown keys are rejected so typos fail loudly.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .io import data_path

MODELS = ("ctm", "ctm-svi", "lda", "multgp", "sbmlds", "rawlds", "selfcheck")

TOP_KEYS = {"model", "seed", "output_dir", "sweeps", "burn", "thin", "data", "params"}

DATA_KEYS = {
    "ctm": {"synthetic", "corpus", "vocab", "test_corpus", "truth"},
    "multgp": {"synthetic", "counts"},
    "sbmlds": {"synthetic", "text", "tokens", "vocab", "counts", "holdout", "vocab_size"},
    "selfcheck": set(),
}
DATA_KEYS["ctm-svi"] = DATA_KEYS["lda"] = DATA_KEYS["ctm"]
DATA_KEYS["rawlds"] = DATA_KEYS["sbmlds"]

PARAM_DEFAULTS = {
    "ctm": {"n_topics": 3, "alpha_beta": 0.1, "warm_sweeps": 50, "split_ratio": 0.5, "eval_seed": None,
            "baseline": True},
    "lda": {"n_topics": 3, "alpha_beta": 0.1, "split_ratio": 0.5, "eval_seed": None},
    "ctm-svi": {"n_topics": 3, "alpha_beta": 0.1, "steps": 100, "batch_size": None, "step_size": 1.0,
                "split_ratio": 0.5, "eval_seed": None},
    "multgp": {"n_test": 2, "n_obs": 50, "lengthscale": 4.0, "variance": 0.5, "n_keep": 50, "k": 10,
               "noise_var": 1.0},
    "sbmlds": {"state_dim": 3, "baseline": True},
    "rawlds": {"state_dim": 3},
    "selfcheck": {},
}

SWEEP_DEFAULTS = {
    "ctm": (1000, 500, 25),
    "lda": (1000, 500, 25),
    "ctm-svi": (0, 0, 1),
    "multgp": (700, 200, 10),
    "sbmlds": (2000, 1000, 50),
    "rawlds": (2000, 1000, 50),
    "selfcheck": (0, 0, 1),
}


@dataclass
class RunConfig:
    model: str
    seed: int
    output_dir: Path
    sweeps: int
    burn: int
    thin: int
    data: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict)

    @property
    def sha256(self):
        return config_hash(self.raw)

    def path(self, value):
        """Resolve a data path from the config; ``bundled:`` names ship with the package."""
        if not isinstance(value, str):
            raise ConfigError(f"expected a path string, got {value!r}")
        if value.startswith("bundled:"):
            p = data_path(value[len("bundled:"):])
        else:
            p = Path(value)
            if not p.is_absolute():
                p = self.base_dir / p
        if not p.exists():
            raise ConfigError(f"referenced file does not exist: {value}")
        return p


def config_hash(raw):
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _int(raw, key, default, minimum=0):
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {value!r}")
    return value


def parse_config(raw, base_dir="."):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    model = raw.get("model")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {list(MODELS)}, got {model!r}")
    if "seed" not in raw:
        raise ConfigError("seed is required")
    seed = _int(raw, "seed", None)
    sweeps0, burn0, thin0 = SWEEP_DEFAULTS[model]
    sweeps = _int(raw, "sweeps", sweeps0)
    burn = _int(raw, "burn", burn0)
    thin = _int(raw, "thin", thin0, minimum=1)
    if model not in ("selfcheck", "ctm-svi", "multgp") and burn >= sweeps:
        raise ConfigError("burn must be smaller than sweeps")

    data = raw.get("data", {})
    if not isinstance(data, dict):
        raise ConfigError("data must be an object")
    bad = set(data) - DATA_KEYS[model]
    if bad:
        raise ConfigError(f"unknown data keys for {model}: {sorted(bad)}")

    params = dict(PARAM_DEFAULTS[model])
    given = raw.get("params", {})
    if not isinstance(given, dict):
        raise ConfigError("params must be an object")
    bad = set(given) - set(params)
    if bad:
        raise ConfigError(f"unknown params for {model}: {sorted(bad)}")
    params.update(given)

    base_dir = Path(base_dir)
    out = raw.get("output_dir", f"pgmult_out/{model}")
    if not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    output_dir = Path(out) if Path(out).is_absolute() else base_dir / out
    cfg = RunConfig(model, seed, output_dir, sweeps, burn, thin, data, params, base_dir, raw)
    _check_data(cfg)
    return cfg


def _check_data(cfg):
    data = cfg.data
    for key in ("corpus", "vocab", "test_corpus", "truth", "text", "tokens", "counts"):
        if key in data:
            cfg.path(data[key])
    if cfg.model in ("ctm", "ctm-svi", "lda") and "corpus" in data and "test_corpus" not in data:
        raise ConfigError("a corpus run needs test_corpus for held-out evaluation")
    if cfg.model in ("sbmlds", "rawlds"):
        sources = [k for k in ("synthetic", "text", "tokens", "counts") if k in data]
        if len(sources) > 1:
            raise ConfigError(f"give exactly one sequence source, got {sources}")


def load_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, path.parent)
