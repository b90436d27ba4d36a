"""Tweet cleaning, tokenization, vocabulary, id encoding and bag-of-words features."""

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ContractViolation, DataError

PAD_ID = 0
OOV_ID = 1
PAD_TOKEN = "<pad>"
OOV_TOKEN = "<oov>"

_REMOVED_TOKEN = re.compile(r"^(?:https?://|www\.|@|#)")
_NOT_LETTER_OR_SPACE = re.compile(r"[^a-z ]+")


def clean_text(raw):
    """Lowercase and strip URLs, mentions, hashtags, digits, punctuation and symbols."""
    kept = [tok for tok in raw.lower().split() if not _REMOVED_TOKEN.match(tok)]
    text = _NOT_LETTER_OR_SPACE.sub("", " ".join(kept))
    return " ".join(text.split())


def tokenize(cleaned):
    return cleaned.split()


def remove_stopwords(tokens, stopwords):
    return [t for t in tokens if t not in stopwords]


def load_stopwords(path=None):
    """Bundled English stopword list (one token per line), or a custom file."""
    if path is None:
        text = resources.files("bigrucnn.data").joinpath("stopwords_en.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def preprocess(raw, stopwords):
    return remove_stopwords(tokenize(clean_text(raw)), stopwords)


@dataclass(frozen=True)
class Vocabulary:
    id_to_token: tuple
    frequencies: dict = field(compare=False)
    token_to_id: dict = field(init=False, repr=False, compare=False)

    pad_id = PAD_ID
    oov_id = OOV_ID

    def __post_init__(self):
        object.__setattr__(self, "token_to_id", {t: i for i, t in enumerate(self.id_to_token)})
        if self.id_to_token[:2] != (PAD_TOKEN, OOV_TOKEN):
            raise ContractViolation("vocabulary must start with the PAD and OOV entries")
        if len(self.token_to_id) != len(self.id_to_token):
            raise ContractViolation("vocabulary tokens must be unique")

    def __len__(self):
        return len(self.id_to_token)

    @property
    def size(self):
        return len(self.id_to_token)

    def lookup(self, token):
        return self.token_to_id.get(token, OOV_ID)

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, tok in enumerate(self.id_to_token):
                fh.write(f"{tok}\t{i}\t{self.frequencies.get(tok, 0)}\n")

    @classmethod
    def read(cls, path):
        tokens, freqs = [], {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or parts[1] != str(lineno) or not parts[2].isdigit():
                    raise DataError(f"{path}:{lineno + 1}: malformed vocabulary line")
                tokens.append(parts[0])
                freqs[parts[0]] = int(parts[2])
        return cls(tuple(tokens), freqs)


def build_vocabulary(corpus, min_freq=2, max_size=20000):
    """Rank tokens by (frequency desc, token asc), keep those with frequency >= min_freq,
    and give the first ``max_size - 2`` ids from 2 upward."""
    if min_freq < 1 or max_size < 2:
        raise ContractViolation("need min_freq >= 1 and max_size >= 2")
    counts = Counter()
    for tokens in corpus:
        counts.update(tokens)
    ranked = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    ranked = ranked[: max_size - 2]
    freqs = {PAD_TOKEN: 0, OOV_TOKEN: 0}
    freqs.update((t, counts[t]) for t in ranked)
    return Vocabulary((PAD_TOKEN, OOV_TOKEN, *ranked), freqs)


def encode(tokens, vocab, max_len=40):
    if max_len < 1:
        raise ContractViolation(f"max_len must be >= 1, got {max_len}")
    ids = [vocab.lookup(t) for t in tokens[:max_len]]
    return ids + [PAD_ID] * (max_len - len(ids))


@dataclass(frozen=True)
class SparseVector:
    indices: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ContractViolation("indices and values differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ContractViolation("indices must be strictly increasing")

    def __len__(self):
        return len(self.indices)


def count_vectorize(tokens, vocab):
    counts = Counter(vocab.lookup(t) for t in tokens)
    counts.pop(OOV_ID, None)
    counts.pop(PAD_ID, None)
    idx = tuple(sorted(counts))
    return SparseVector(idx, tuple(counts[i] for i in idx))


def _l2_normalize(weights):
    norm = math.sqrt(sum(w * w for w in weights))
    return weights if norm == 0 else [w / norm for w in weights]


def tfidf_transform(counts, n_docs):
    """Smoothed TF-IDF, ``tf * (ln((1 + n) / (1 + df)) + 1)``, then per-document L2 norm.

    Document frequencies come from ``counts`` itself.
    """
    if n_docs != len(counts) or n_docs < 1:
        raise ContractViolation(f"n_docs={n_docs} but {len(counts)} count vectors given")
    df = Counter()
    for vec in counts:
        df.update(vec.indices)
    idf = {t: math.log((1 + n_docs) / (1 + d)) + 1.0 for t, d in df.items()}
    out = []
    for vec in counts:
        weights = _l2_normalize([v * idf[t] for t, v in zip(vec.indices, vec.values)])
        out.append(SparseVector(vec.indices, tuple(weights)))
    return out


def to_csr(vectors, n_features, offset=0):
    """Stack SparseVectors into a CSR matrix, shifting feature ids down by ``offset``."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v) for v in vectors])
    indices = np.fromiter((i - offset for v in vectors for i in v.indices), dtype=np.int64)
    data = np.fromiter((x for v in vectors for x in v.values), dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))


# -- estimator-style wrappers --------------------------------------------------

class TweetTokenizer(BaseEstimator, TransformerMixin):
    """Raw tweets -> cleaned, stopword-free token lists. Stateless."""

    def __init__(self, stopwords_path=None, remove_stop=True):
        self.stopwords_path = stopwords_path
        self.remove_stop = remove_stop

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        stop = load_stopwords(self.stopwords_path) if self.remove_stop else frozenset()
        return [preprocess(str(x), stop) for x in X]


class SequenceEncoder(BaseEstimator, TransformerMixin):
    """Token lists -> fixed-length id matrix [n_docs, max_len]."""

    def __init__(self, max_len=40, min_freq=2, max_size=20000):
        self.max_len = max_len
        self.min_freq = min_freq
        self.max_size = max_size

    def fit(self, X, y=None):
        self.vocabulary_ = build_vocabulary(X, self.min_freq, self.max_size)
        return self

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        rows = [encode(tokens, self.vocabulary_, self.max_len) for tokens in X]
        return np.asarray(rows, dtype=np.int64).reshape(len(rows), self.max_len)


class BagOfWords(BaseEstimator, TransformerMixin):
    """Token lists -> CSR count or TF-IDF matrix over the real-token vocabulary.

    Columns exclude the PAD/OOV ids. For TF-IDF the idf weights are learned in
    ``fit`` and reused in ``transform`` so held-out documents share the
    training idf.
    """

    def __init__(self, features="count", min_freq=1, max_size=20000):
        self.features = features
        self.min_freq = min_freq
        self.max_size = max_size

    def fit(self, X, y=None):
        if self.features not in ("count", "tfidf"):
            raise ContractViolation(f"features must be 'count' or 'tfidf', got {self.features!r}")
        self.vocabulary_ = build_vocabulary(X, self.min_freq, self.max_size)
        counts = self._counts(X)
        n = counts.shape[0]
        df = np.bincount(counts.indices, minlength=counts.shape[1])
        self.idf_ = np.log((1 + n) / (1 + df)) + 1.0
        return self

    def _counts(self, X):
        vecs = [count_vectorize(tokens, self.vocabulary_) for tokens in X]
        return to_csr(vecs, self.vocabulary_.size - 2, offset=2)

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        counts = self._counts(X)
        if self.features == "count":
            return counts
        weighted = counts.multiply(self.idf_[None, :]).tocsr()
        norms = np.sqrt(np.asarray(weighted.multiply(weighted).sum(axis=1))).ravel()
        norms[norms == 0] = 1.0
        return sp.csr_matrix(sp.diags(1.0 / norms) @ weighted)
