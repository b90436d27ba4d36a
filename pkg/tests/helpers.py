import numpy as np

from bigrucnn import model as M
from bigrucnn.dataio import load_csv
from bigrucnn.text_pipeline import SequenceEncoder, TweetTokenizer

# scaled-down network used wherever a test trains end to end
SMALL = dict(max_len=12, embed_dim=16, conv_filters=16, gru1_hidden=16, gru2_hidden=8,
             dense_hidden=16)
# gradient-check sized network: V=20, T=6, every hidden width <= 8
TINY = dict(vocab_size=20, max_len=6, embed_dim=8, conv_filters=8, gru1_hidden=8,
            gru2_hidden=4, dense_hidden=8)


def encoded_corpus(path, max_len, min_freq=1):
    records = load_csv(path)
    tokens = TweetTokenizer().transform([r.text for r in records])
    enc = SequenceEncoder(max_len=max_len, min_freq=min_freq).fit(tokens)
    y = np.array([r.label for r in records], dtype=np.int64)
    return enc.vocabulary_, enc.transform(tokens), y, records


def train_toy(path, epochs=200, seed=42):
    vocab, X, y, records = encoded_corpus(path, SMALL["max_len"])
    config = M.ModelConfig(vocab_size=vocab.size, epochs=epochs, seed=seed, **SMALL)
    params = M.build(config)
    history = M.train(params, config, (X, y))
    return vocab, config, params, history, records


def param_count_closed_form(V, T, d_e, F, k, h1, h2, d):
    """Sum of layer shapes, written out independently of the builder."""
    gru = lambda d_in, h: 2 * 3 * (d_in * h + h * h + h)
    return (V * d_e
            + F * k * d_e + F
            + gru(F, h1)
            + gru(2 * h1, h2)
            + 2 * h2 * d + d
            + d + 1)
