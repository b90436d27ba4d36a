"""The nine-layer Bi-GRU + CNN classifier: build, forward, train, predict.

Layer stack: Input -> Embedding -> Conv1D(ReLU, same) -> MaxPool ->
BiGRU (sequences) -> BiGRU (last states) -> Dense(ReLU) -> Dropout ->
Dense(1, sigmoid).
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from . import layers as L
from . import tensor as tn
from .exceptions import ConfigurationError, ContractViolation, NonFiniteError
from .metrics import EpochRecord, confusion, metrics, roc_auc
from .tensor import Rng, Tensor
from .text_pipeline import encode, load_stopwords, preprocess

logger = logging.getLogger(__name__)

PROB_CLIP = 1e-7


@dataclass
class ModelConfig:
    vocab_size: int
    max_len: int = 40
    embed_dim: int = 100
    conv_filters: int = 64
    kernel_size: int = 3
    pool: int = 2
    gru1_hidden: int = 64
    gru2_hidden: int = 32
    dense_hidden: int = 64
    dropout_rate: float = 0.5
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    seed: int = 1337
    pos_weight: float = 1.0

    def validate(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("dropout_rate", "learning_rate", "seed"):
                continue
            if value <= 0:
                raise ConfigurationError(f"{f.name} must be positive, got {value}")
        if self.vocab_size < 2:
            raise ConfigurationError("vocab_size must cover at least PAD and OOV")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if self.kernel_size % 2 == 0:
            raise ConfigurationError(f"kernel_size must be odd, got {self.kernel_size}")
        return self

    def to_dict(self):
        return asdict(self)


class AdamMoments:
    __slots__ = ("m", "v")

    def __init__(self, shape, dtype=np.float32):
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)


class ModelParams:
    """Named weight tensors of the stack plus optimizer state."""

    def __init__(self, tensors):
        self.tensors = dict(tensors)
        self.moments = {k: AdamMoments(t.shape, t.data.dtype) for k, t in self.tensors.items()}
        self.step = 0

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.items())

    def gru(self, prefix):
        return L.GruParams(**{k: self.tensors[f"{prefix}.{k}"] for k in L.GruParams.__dataclass_fields__})

    @property
    def conv(self):
        return L.ConvParams(self.tensors["conv.kernels"], self.tensors["conv.bias"])

    def count(self):
        return int(sum(t.size for t in self.tensors.values()))

    def copy_arrays(self):
        return {k: t.data.copy() for k, t in self.tensors.items()}


def expected_shapes(config):
    c = config
    shapes = {
        "embedding": (c.vocab_size, c.embed_dim),
        "conv.kernels": (c.conv_filters, c.kernel_size, c.embed_dim),
        "conv.bias": (c.conv_filters,),
    }
    for layer, d_in, d_h in (("gru1", c.conv_filters, c.gru1_hidden),
                             ("gru2", 2 * c.gru1_hidden, c.gru2_hidden)):
        for direction in ("fwd", "bwd"):
            for gate in "zrh":
                shapes[f"{layer}.{direction}.W_{gate}"] = (d_in, d_h)
            for gate in "zrh":
                shapes[f"{layer}.{direction}.U_{gate}"] = (d_h, d_h)
            for gate in "zrh":
                shapes[f"{layer}.{direction}.b_{gate}"] = (d_h,)
    shapes["dense1.W"] = (2 * c.gru2_hidden, c.dense_hidden)
    shapes["dense1.b"] = (c.dense_hidden,)
    shapes["dense2.W"] = (c.dense_hidden, 1)
    shapes["dense2.b"] = (1,)
    return shapes


def build(config, rng=None):
    """Glorot-uniform weights and zero biases, drawn deterministically from the seed."""
    config.validate()
    rng = Rng(config.seed) if rng is None else rng
    tensors = {}
    for name, shape in expected_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("b") or leaf == "bias":
            tensors[name] = tn.zeros(shape, requires_grad=True)
        elif name == "conv.kernels":
            F, k, d = shape
            tensors[name] = tn.glorot_uniform(shape, rng, fan_in=k * d, fan_out=k * F)
        else:
            tensors[name] = tn.glorot_uniform(shape, rng)
        tensors[name].name = name
    return ModelParams(tensors)


def forward(params, config, ids, training=False, rng=None):
    """Probabilities of the offensive class for a batch of id rows [B, T] -> [B]."""
    ids = np.asarray(ids)
    if ids.ndim != 2:
        raise ContractViolation(f"forward expects ids shaped [B, T], got {ids.shape}")
    x = L.embedding_forward(ids, params["embedding"])
    x = L.conv1d_forward(x, params.conv)
    x = L.maxpool1d(x, config.pool)
    x = L.bigru_forward(x, params.gru("gru1.fwd"), params.gru("gru1.bwd"), return_sequences=True)
    x = L.bigru_forward(x, params.gru("gru2.fwd"), params.gru("gru2.bwd"), return_sequences=False)
    x = L.dense_forward(x, params["dense1.W"], params["dense1.b"], "relu")
    x = L.dropout(x, config.dropout_rate, training, rng)
    x = L.dense_forward(x, params["dense2.W"], params["dense2.b"], "sigmoid")
    return tn.reshape(x, (ids.shape[0],))


def loss_bce(p, y, pos_weight=1.0):
    """Mean binary cross-entropy on probabilities clipped to [1e-7, 1 - 1e-7]."""
    y = np.asarray(y, dtype=p.data.dtype)
    if y.shape != p.shape:
        raise ContractViolation(f"{p.shape[0] if p.ndim else 1} probabilities for {y.size} labels")
    pc = tn.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    pos = tn.mul(tn.log(pc), Tensor(pos_weight * y))
    neg = tn.mul(tn.log(1.0 - pc), Tensor(1.0 - y))
    return -tn.mean(pos + neg)


def adam_update(weight, grad, moments, lr, t, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam step on ``weight``; returns it."""
    if t < 1:
        raise ContractViolation("Adam step counter starts at 1")
    m, v = moments.m, moments.v
    tmp = np.multiply(grad, 1 - beta1)
    m *= beta1
    m += tmp
    np.square(grad, out=tmp)
    tmp *= 1 - beta2
    v *= beta2
    v += tmp
    # m_hat / (sqrt(v_hat) + eps) without materialising m_hat and v_hat
    np.sqrt(v, out=tmp)
    tmp /= np.sqrt(1 - beta2 ** t)
    tmp += eps
    np.divide(m, tmp, out=tmp)
    tmp *= lr / (1 - beta1 ** t)
    weight -= tmp
    return weight


def predict_proba_ids(params, config, ids, batch_size=256):
    ids = np.asarray(ids)
    out = np.empty(len(ids), dtype=np.float64)
    with tn.no_grad():
        for lo in range(0, len(ids), batch_size):
            out[lo : lo + batch_size] = forward(params, config, ids[lo : lo + batch_size]).data
    return out


def _bce_np(probs, y, pos_weight):
    p = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(-np.mean(pos_weight * y * np.log(p) + (1 - y) * np.log(1 - p)))


def _split_metrics(params, config, ids, y):
    probs = predict_proba_ids(params, config, ids)
    loss = _bce_np(probs, y, config.pos_weight)
    report = metrics(confusion((probs >= 0.5).astype(np.int64), y))
    try:
        auc = roc_auc(probs, y)
    except ValueError:
        auc = None
    return loss, report, auc


def train(params, config, train_set, val_set=None, callback=None):
    """Minibatch Adam over shuffled epochs; returns one EpochRecord per epoch.

    ``train_set``/``val_set`` are ``(ids [N, T], labels [N])`` pairs. Train and
    validation metrics are measured in inference mode after each epoch.
    """
    X, y = np.asarray(train_set[0]), np.asarray(train_set[1], dtype=np.int64)
    if len(X) == 0:
        raise ContractViolation("training set is empty")
    if len(X) != len(y):
        raise ContractViolation(f"{len(X)} training rows but {len(y)} labels")
    has_val = val_set is not None and len(val_set[0]) > 0
    shuffle_rng, dropout_rng = Rng(config.seed).spawn(2)
    history = []

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(X))
        for b, lo in enumerate(range(0, len(X), config.batch_size), start=1):
            batch = order[lo : lo + config.batch_size]
            try:
                with tn.Tape() as tape:
                    probs = forward(params, config, X[batch], training=True, rng=dropout_rng)
                    loss = loss_bce(probs, y[batch], config.pos_weight)
                tape.backward(loss)
            except NonFiniteError as err:
                raise NonFiniteError(f"non-finite value at epoch {epoch}, batch {b}: {err}") from err
            params.step += 1
            for name, t in params:
                if t.grad is not None:
                    adam_update(t.data, t.grad, params.moments[name], config.learning_rate, params.step)
                    t.grad = None

        train_loss, train_report, _ = _split_metrics(params, config, X, y)
        record = EpochRecord(epoch, train_loss, train_report.accuracy)
        if has_val:
            val_loss, val_report, val_auc = _split_metrics(
                params, config, val_set[0], np.asarray(val_set[1], dtype=np.int64)
            )
            record.val_loss = val_loss
            record.val_acc = val_report.accuracy
            record.val_recall = val_report.recall
            record.val_auc = val_auc
        history.append(record)
        logger.info("epoch %d: %s", epoch, record)
        if callback is not None:
            callback(record)
    return history


class Prediction(NamedTuple):
    label: int
    probability: float


def predict(params, config, vocab, raw_text, threshold=0.5, stopwords=None):
    stop = load_stopwords() if stopwords is None else stopwords
    ids = encode(preprocess(raw_text, stop), vocab, config.max_len)
    prob = float(predict_proba_ids(params, config, [ids])[0])
    return Prediction(int(prob >= threshold), prob)
