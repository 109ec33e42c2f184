from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class Corpus:
    """Documents as arrays of token ids in [0, vocab_size).

    ``lanes`` gives each document its random-stream id; it defaults to the
    document index and travels with the document when the corpus is permuted.
    """

    docs: list
    vocab_size: int
    vocab: list = None
    lanes: np.ndarray = None

    def __post_init__(self):
        self.docs = [np.asarray(d, dtype=np.int64).reshape(-1) for d in self.docs]
        for i, d in enumerate(self.docs):
            if d.size and (d.min() < 0 or d.max() >= self.vocab_size):
                raise DataError(f"document {i} has token ids outside [0, {self.vocab_size})")
        if self.lanes is None:
            self.lanes = np.arange(len(self.docs))
        self.lanes = np.asarray(self.lanes, dtype=np.int64)
        if self.lanes.shape != (len(self.docs),):
            raise DataError("need one lane id per document")
        if self.vocab is not None and len(self.vocab) != self.vocab_size:
            raise DataError("vocabulary length does not match vocab_size")

    @property
    def n_docs(self):
        return len(self.docs)

    @property
    def lengths(self):
        return np.array([d.size for d in self.docs], dtype=np.int64)

    @property
    def n_tokens(self):
        return int(self.lengths.sum())

    def flat(self):
        """Concatenated tokens and the document index of each token."""
        if not self.docs:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        tokens = np.concatenate(self.docs)
        doc_of = np.repeat(np.arange(self.n_docs), self.lengths)
        return tokens, doc_of

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Corpus([self.docs[i] for i in idx], self.vocab_size, self.vocab, self.lanes[idx])

    def permuted(self, order):
        return self.subset(order)
