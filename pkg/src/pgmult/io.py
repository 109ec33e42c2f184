"""Data ingestion and emission: corpora, GP count tables, count sequences, plain text."""

import csv
import json
import re
from collections import Counter
from importlib import resources
from pathlib import Path

import numpy as np

from .ctm.corpus import Corpus
from .errors import DataError
from .mult_gp import GPCountData
from .mult_lds import SequenceData

UNK = "<unk>"
_WORD = re.compile(r"[a-z]+(?:'[a-z]+)?")


def data_path(name):
    """Path of a file bundled under ``pgmult/data``."""
    return Path(str(resources.files("pgmult") / "data" / name))


def tokenize(text):
    return _WORD.findall(text.lower())


def build_vocab(words, size):
    """Most frequent ``size - 1`` words plus ``<unk>``, ordered by descending frequency.

    Ties break alphabetically.  Frequency order keeps the common categories
    early in the stick, where their sticks are estimated from the most data.
    """
    if size < 2:
        raise DataError("vocabulary needs at least two entries")
    counts = Counter(words)
    kept = sorted(counts, key=lambda w: (-counts[w], w))[: size - 1]
    n_unk = len(words) - sum(counts[w] for w in kept)
    entries = [(w, counts[w]) for w in kept] + [(UNK, n_unk)]
    entries.sort(key=lambda e: (-e[1], e[0]))
    return [w for w, _ in entries]


def encode(words, vocab):
    index = {w: i for i, w in enumerate(vocab)}
    unk = index.get(UNK)
    ids = []
    for w in words:
        i = index.get(w, unk)
        if i is None:
            raise DataError(f"word {w!r} is not in the vocabulary and there is no {UNK} entry")
        ids.append(i)
    return np.array(ids, dtype=np.int64)


def text_sequence(path, vocab_size, holdout=0):
    """One-hot token sequence of a text file with a frequency-ordered vocabulary.

    The vocabulary is built from all but the final ``holdout`` words, so every
    category is seen in training and unseen future words map to ``<unk>``.
    """
    words = tokenize(_read_text(path))
    if len(words) <= holdout:
        raise DataError(f"{path}: {len(words)} words, need more than {holdout}")
    vocab = build_vocab(words[: len(words) - holdout], vocab_size)
    if len(vocab) < vocab_size:
        raise DataError(f"{path}: only {len(vocab)} distinct entries, need {vocab_size}")
    return SequenceData.from_tokens(encode(words, vocab), len(vocab)), vocab


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def read_corpus(path, vocab_path=None):
    """One document per line, whitespace-separated integer token ids.

    The vocabulary size comes from the sidecar (one word per line) when given,
    otherwise from the largest id.
    """
    docs = []
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        try:
            docs.append(np.array([int(t) for t in line.split()], dtype=np.int64))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: token ids must be integers") from exc
    vocab = None
    if vocab_path is not None:
        vocab = _read_text(vocab_path).splitlines()
        V = len(vocab)
    else:
        V = 1 + max((int(d.max()) for d in docs if d.size), default=0)
    return Corpus(docs, V, vocab)


def write_corpus(corpus, path, vocab_path=None):
    with open(path, "w", encoding="utf-8") as f:
        for doc in corpus.docs:
            f.write(" ".join(str(int(t)) for t in doc) + "\n")
    if vocab_path is not None:
        vocab = corpus.vocab or [f"w{i}" for i in range(corpus.vocab_size)]
        Path(vocab_path).write_text("\n".join(vocab) + "\n", encoding="utf-8")


def _read_table(path):
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path}: need a header and at least one row")
    return rows[0], rows[1:]


def _numeric(rows, cols, path, kind=float):
    try:
        return np.array([[kind(r[c]) for c in cols] for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc


def read_gp_counts(path):
    """CSV with input columns named ``x*`` and one count column per category."""
    header, rows = _read_table(path)
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    ccols = [i for i, h in enumerate(header) if not h.startswith("x")]
    if not xcols or len(ccols) < 1:
        raise DataError(f"{path}: need at least one x* input column and one count column")
    return GPCountData(_numeric(rows, xcols, path), _numeric(rows, ccols, path, int), [header[c] for c in ccols])


def write_gp_counts(data, path):
    D = data.inputs.shape[1]
    cats = data.categories or [f"c{k}" for k in range(data.n_categories)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow([f"x{j}" for j in range(D)] + list(cats))
        for x, c in zip(data.inputs, data.counts):
            w.writerow([repr(float(v)) for v in x] + [int(v) for v in c])


def read_sequence(path):
    """CSV with one count column per category and one row per time step."""
    header, rows = _read_table(path)
    return SequenceData(_numeric(rows, range(len(header)), path, int)), header


def write_sequence(data, path, categories=None):
    cats = categories or [f"c{k}" for k in range(data.n_categories)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(cats)
        w.writerows(data.obs.tolist())


def write_json(obj, path):
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")
