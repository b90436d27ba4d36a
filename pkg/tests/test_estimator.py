import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bigrucnn import BiGRUCNNClassifier
from bigrucnn.dataio import load_csv
from bigrucnn.exceptions import ContractViolation, ModelFileError

from .helpers import SMALL


@pytest.fixture(scope="module")
def fitted():
    from .conftest import TOY_CSV

    records = load_csv(TOY_CSV)
    X, y = [r.text for r in records], [r.label for r in records]
    clf = BiGRUCNNClassifier(epochs=40, seed=42, min_freq=1, **SMALL).fit(X, y, validation_data=(X, y))
    return clf, X, y


def test_params_round_trip_through_clone():
    clf = BiGRUCNNClassifier(embed_dim=12, threshold=0.3)
    params = clf.get_params()
    assert params["embed_dim"] == 12 and params["epochs"] == 100
    twin = clone(clf)
    assert twin.get_params() == params
    assert twin.set_params(epochs=5).epochs == 5


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        BiGRUCNNClassifier().predict(["x"])


def test_input_validation():
    clf = BiGRUCNNClassifier(epochs=1, **SMALL)
    with pytest.raises(ContractViolation):
        clf.fit("a single string", [1])
    with pytest.raises(ContractViolation):
        clf.fit(["a", "b"], [0, 2])


def test_fit_predict(fitted):
    clf, X, y = fitted
    assert len(clf.history_) == 40 and clf.history_[-1].val_auc is not None
    proba = clf.predict_proba(X)
    assert proba.shape == (32, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert (clf.predict(X) == (proba[:, 1] >= 0.5)).all()
    assert clf.score(X, y) == clf.history_[-1].train_acc
    assert clf.transform(["", "x"]).shape == (2, 12)


def test_save_load(fitted, tmp_path):
    clf, X, _ = fitted
    clf.save(tmp_path)
    back = BiGRUCNNClassifier.load(tmp_path)
    assert (back.predict_proba(X) == clf.predict_proba(X)).all()
    assert back.get_params() == {**clf.get_params(), "min_freq": 2, "max_size": 20000, "threshold": 0.5}
    (tmp_path / "vocab.tsv").write_text("<pad>\t0\t0\n<oov>\t1\t0\n")
    with pytest.raises(ModelFileError):
        BiGRUCNNClassifier.load(tmp_path / "model.bgcn")
