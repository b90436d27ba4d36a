"""scikit-learn compatible wrapper around the Bi-GRU + CNN model."""

import os

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import model as M
from . import serialization
from .exceptions import ContractViolation, ModelFileError
from .text_pipeline import SequenceEncoder, TweetTokenizer, Vocabulary, encode

MODEL_FILE = "model.bgcn"
VOCAB_FILE = "vocab.tsv"


def _check_texts(X):
    if isinstance(X, str):
        raise ContractViolation("expected a sequence of texts, got a single string")
    return [str(x) for x in X]


def _check_binary(y, n):
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.size != n:
        raise ContractViolation(f"{n} texts but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ContractViolation("labels must be 0 (not offensive) or 1 (offensive)")
    return y


class BiGRUCNNClassifier(ClassifierMixin, BaseEstimator):
    """Offensive-text classifier taking raw tweets.

    Parameters mirror :class:`bigrucnn.model.ModelConfig`, plus ``min_freq`` and
    ``max_size`` for the vocabulary and ``threshold`` for ``predict``.

    After ``fit``: ``vocabulary_``, ``config_``, ``params_`` and ``history_``
    (one EpochRecord per epoch).
    """

    def __init__(self, max_len=40, embed_dim=100, conv_filters=64, kernel_size=3, pool=2,
                 gru1_hidden=64, gru2_hidden=32, dense_hidden=64, dropout_rate=0.5,
                 learning_rate=1e-3, batch_size=32, epochs=100, seed=1337, pos_weight=1.0,
                 min_freq=2, max_size=20000, threshold=0.5):
        self.max_len = max_len
        self.embed_dim = embed_dim
        self.conv_filters = conv_filters
        self.kernel_size = kernel_size
        self.pool = pool
        self.gru1_hidden = gru1_hidden
        self.gru2_hidden = gru2_hidden
        self.dense_hidden = dense_hidden
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.pos_weight = pos_weight
        self.min_freq = min_freq
        self.max_size = max_size
        self.threshold = threshold

    def _model_config(self, vocab_size):
        names = [f for f in M.ModelConfig.__dataclass_fields__ if f != "vocab_size"]
        return M.ModelConfig(vocab_size=vocab_size, **{k: getattr(self, k) for k in names})

    def fit(self, X, y, validation_data=None, callback=None):
        texts = _check_texts(X)
        y = _check_binary(y, len(texts))
        tokens = TweetTokenizer().transform(texts)
        encoder = SequenceEncoder(self.max_len, self.min_freq, self.max_size).fit(tokens)
        self.vocabulary_ = encoder.vocabulary_
        self.config_ = self._model_config(self.vocabulary_.size).validate()
        self.params_ = M.build(self.config_)
        val = None
        if validation_data is not None:
            vx = _check_texts(validation_data[0])
            val = (self._encode(vx), _check_binary(validation_data[1], len(vx)))
        self.history_ = M.train(self.params_, self.config_, (encoder.transform(tokens), y),
                                val, callback=callback)
        self.classes_ = np.array([0, 1])
        return self

    def _encode(self, texts):
        tokens = TweetTokenizer().transform(texts)
        rows = [encode(t, self.vocabulary_, self.config_.max_len) for t in tokens]
        return np.asarray(rows, dtype=np.int64).reshape(len(rows), self.config_.max_len)

    def transform(self, X):
        """Encoded id matrix [n, max_len] for raw texts."""
        check_is_fitted(self, "params_")
        return self._encode(_check_texts(X))

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        p = M.predict_proba_ids(self.params_, self.config_, self.transform(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(np.int64)

    def save(self, run_dir):
        """Write ``model.bgcn`` and ``vocab.tsv`` into ``run_dir``."""
        check_is_fitted(self, "params_")
        os.makedirs(run_dir, exist_ok=True)
        serialization.save(self.params_, self.config_, os.path.join(run_dir, MODEL_FILE))
        self.vocabulary_.write(os.path.join(run_dir, VOCAB_FILE))

    @classmethod
    def load(cls, model_path, vocab_path=None):
        """Rebuild a fitted classifier from a model file (or run directory)."""
        if os.path.isdir(model_path):
            model_path = os.path.join(model_path, MODEL_FILE)
        if vocab_path is None:
            vocab_path = os.path.join(os.path.dirname(model_path), VOCAB_FILE)
        params, config = serialization.load(model_path)
        vocab = Vocabulary.read(vocab_path)
        if vocab.size != config.vocab_size:
            raise ModelFileError(
                f"vocabulary has {vocab.size} entries but the model expects {config.vocab_size}"
            )
        names = [f for f in M.ModelConfig.__dataclass_fields__ if f != "vocab_size"]
        est = cls(**{k: getattr(config, k) for k in names})
        est.vocabulary_, est.config_, est.params_ = vocab, config, params
        est.history_ = []
        est.classes_ = np.array([0, 1])
        return est
