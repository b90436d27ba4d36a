"""Classical baselines over bag-of-words features: multinomial naive Bayes,
SGD logistic regression, SGD linear SVM (hinge) and cosine k-nearest-neighbours.

Features are CSR matrices (rows = documents). Lists of SparseVector are also
accepted when ``n_features`` is given.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError, ContractViolation
from .tensor import Rng
from .text_pipeline import SparseVector, to_csr


def as_csr(X, n_features=None):
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    if isinstance(X, np.ndarray):
        return sp.csr_matrix(np.atleast_2d(X).astype(np.float64))
    X = list(X)
    if n_features is None:
        n_features = 1 + max((v.indices[-1] for v in X if len(v)), default=-1)
    return to_csr(X, n_features)


def _one_row(doc, n_features):
    """A single document (SparseVector, 1-D/2-D array or sparse row) as a 1-row CSR."""
    X = as_csr([doc] if isinstance(doc, SparseVector) else doc, n_features)
    if X.shape[0] != 1:
        raise ContractViolation(f"expected one document, got {X.shape[0]}")
    return X


def _check_labels(y, n):
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.size != n:
        raise ContractViolation(f"{n} documents but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ContractViolation("labels must be 0 or 1")
    return y


# -- multinomial naive Bayes --------------------------------------------------------

@dataclass
class NbModel:
    class_log_prior: np.ndarray  # [2]
    feature_log_prob: np.ndarray  # [2, V]
    alpha: float


def nb_fit(docs, labels, alpha=1.0, n_features=None):
    """log P(c) = ln(n_c / n); log P(t|c) = ln((count(t,c) + a) / (sum_t count(t,c) + a V))."""
    X = as_csr(docs, n_features)
    y = _check_labels(labels, X.shape[0])
    n_c = np.bincount(y, minlength=2)
    if (n_c == 0).any():
        raise ConfigurationError("naive Bayes needs at least one document of each class")
    V = X.shape[1]
    counts = np.vstack([np.asarray(X[y == c].sum(axis=0)).ravel() for c in (0, 1)])
    log_lik = np.log(counts + alpha) - np.log(counts.sum(axis=1, keepdims=True) + alpha * V)
    return NbModel(np.log(n_c / n_c.sum()), log_lik, alpha)


def nb_joint_log_likelihood(model, docs):
    X = as_csr(docs, model.feature_log_prob.shape[1])
    return np.asarray(X @ model.feature_log_prob.T) + model.class_log_prior


def nb_predict(model, doc):
    """(label, log-posteriors) for one document; ties go to label 0."""
    jll = nb_joint_log_likelihood(model, _one_row(doc, model.feature_log_prob.shape[1]))[0]
    log_post = jll - np.logaddexp(jll[0], jll[1])
    return int(jll[1] > jll[0]), log_post


# -- SGD linear models -----------------------------------------------------------------

@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: str

    def decision_function(self, docs):
        X = as_csr(docs, self.weights.size)
        return X @ self.weights + self.bias

    def predict_proba(self, docs):
        z = self.decision_function(docs)
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def predict(self, docs):
        return (self.decision_function(docs) >= 0).astype(np.int64)


def linear_fit(docs, labels, kind="logistic", lr=0.1, l2=1e-4, epochs=5, rng=None, n_features=None):
    """Per-example SGD from zero weights on a seeded shuffle.

    logistic: gradient of BCE on sigmoid(w.x + b); hinge: subgradient of
    max(0, 1 - y'(w.x + b)) with y' in {-1, +1}. The L2 term shrinks w by
    (1 - lr*l2) each step; the shrink is tracked as a scalar multiplier so a
    step costs O(nnz of the document).
    """
    if kind not in ("logistic", "hinge"):
        raise ConfigurationError(f"kind must be 'logistic' or 'hinge', got {kind!r}")
    if epochs < 1:
        raise ConfigurationError("epochs must be >= 1")
    X = as_csr(docs, n_features)
    y = _check_labels(labels, X.shape[0])
    rng = Rng(0) if rng is None else rng
    v = np.zeros(X.shape[1])
    scale = 1.0
    b = 0.0
    decay = 1.0 - lr * l2
    if decay <= 0:
        raise ConfigurationError("lr * l2 must be < 1")
    indptr, indices, data = X.indptr, X.indices, X.data
    for _ in range(epochs):
        for i in rng.permutation(X.shape[0]):
            cols = indices[indptr[i] : indptr[i + 1]]
            vals = data[indptr[i] : indptr[i + 1]]
            z = scale * float(v[cols] @ vals) + b
            if kind == "logistic":
                g = 0.5 * (1.0 + np.tanh(0.5 * z)) - y[i]
            else:
                ys = 1.0 if y[i] == 1 else -1.0
                g = -ys if ys * z < 1.0 else 0.0
            scale *= decay
            if scale < 1e-9:
                v *= scale
                scale = 1.0
            if g:
                v[cols] -= lr * g * vals / scale
                b -= lr * g
    return LinearModel(v * scale, b, kind)


# -- k nearest neighbours ------------------------------------------------------------

def _row_normalize(X):
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1))).ravel()
    norms[norms == 0] = 1.0
    return sp.csr_matrix(sp.diags(1.0 / norms) @ X)


def knn_vote(similarities, train_labels, k):
    """Top-k by similarity (lower index first on ties), majority vote, ties -> 0."""
    order = np.lexsort((np.arange(similarities.size), -similarities))[:k]
    ones = int(np.sum(train_labels[order]))
    return int(ones > k - ones)


def knn_predict(train_docs, train_labels, query, k=5):
    X = as_csr(train_docs)
    if X.shape[0] == 0:
        raise ContractViolation("KNN needs a non-empty training set")
    if not 1 <= k <= X.shape[0]:
        raise ContractViolation(f"k must be in [1, {X.shape[0]}], got {k}")
    y = _check_labels(train_labels, X.shape[0])
    q = _one_row(query, X.shape[1])
    sims = np.asarray((_row_normalize(X) @ _row_normalize(q).T).todense()).ravel()
    return knn_vote(sims, y, k)


# -- estimator wrappers -----------------------------------------------------------------

class _Binary(ClassifierMixin, BaseEstimator):
    def _prepare(self, X, y):
        X = as_csr(X)
        y = _check_labels(y, X.shape[0])
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return X, y


class MultinomialNaiveBayes(_Binary):
    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y):
        X, y = self._prepare(X, y)
        self.model_ = nb_fit(X, y, self.alpha)
        return self

    def predict_log_proba(self, X):
        check_is_fitted(self, "model_")
        jll = nb_joint_log_likelihood(self.model_, as_csr(X, self.n_features_in_))
        return jll - np.logaddexp(jll[:, :1], jll[:, 1:])

    def predict_proba(self, X):
        return np.exp(self.predict_log_proba(X))

    def predict(self, X):
        check_is_fitted(self, "model_")
        jll = nb_joint_log_likelihood(self.model_, as_csr(X, self.n_features_in_))
        return (jll[:, 1] > jll[:, 0]).astype(np.int64)


class SGDLinearClassifier(_Binary):
    """Logistic regression (``kind='logistic'``) or linear SVM (``kind='hinge'``)."""

    def __init__(self, kind="logistic", lr=0.1, l2=1e-4, epochs=5, seed=1337):
        self.kind = kind
        self.lr = lr
        self.l2 = l2
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        X, y = self._prepare(X, y)
        self.model_ = linear_fit(X, y, self.kind, self.lr, self.l2, self.epochs, Rng(self.seed))
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(as_csr(X, self.n_features_in_))

    def predict_proba(self, X):
        p = self.model_.predict_proba(as_csr(X, self.n_features_in_))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.decision_function(X) >= 0).astype(np.int64)


class CosineKNN(_Binary):
    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        X, y = self._prepare(X, y)
        if not 1 <= self.k <= X.shape[0]:
            raise ContractViolation(f"k must be in [1, {X.shape[0]}], got {self.k}")
        self.train_ = _row_normalize(X)
        self.labels_ = y
        return self

    def predict(self, X, chunk=512):
        check_is_fitted(self, "train_")
        Q = _row_normalize(as_csr(X, self.n_features_in_))
        out = np.empty(Q.shape[0], dtype=np.int64)
        for lo in range(0, Q.shape[0], chunk):
            sims = np.asarray((Q[lo : lo + chunk] @ self.train_.T).todense())
            for j, row in enumerate(sims):
                out[lo + j] = knn_vote(row, self.labels_, self.k)
        return out
