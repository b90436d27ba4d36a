import numpy as np
import pytest

from bigrucnn import tensor as tn
from bigrucnn.exceptions import ContractViolation, NonFiniteError
from bigrucnn.tensor import Rng, Tape, Tensor


def grad_of(f, x):
    x.requires_grad, x.grad = True, None
    with Tape() as tape:
        y = f(x)
    tape.backward(y)
    return x.grad


def test_matmul_examples():
    X = Tensor([[1.5, -2.0], [0.25, 4.0]])
    np.testing.assert_array_equal(tn.matmul(Tensor(np.eye(2)), X).data, X.data)
    np.testing.assert_array_equal(
        tn.matmul(Tensor([[1, 2], [3, 4]]), Tensor([[1], [1]])).data, [[3], [7]]
    )
    assert not tn.matmul(Tensor(np.zeros((2, 2))), X).data.any()
    with pytest.raises(ContractViolation):
        tn.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_backward_rule(float64):
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    g = rng.normal(size=(3, 2))
    with Tape() as tape:
        loss = tn.sum(tn.mul(tn.matmul(a, b), Tensor(g)))
    tape.backward(loss)
    np.testing.assert_allclose(a.grad, g @ b.data.T, rtol=1e-12)
    np.testing.assert_allclose(b.grad, a.data.T @ g, rtol=1e-12)


def test_elementwise_examples():
    assert tn.elementwise("sigmoid", Tensor(0.0)).data == 0.5
    assert tn.elementwise("tanh", Tensor(0.0)).data == 0.0
    np.testing.assert_array_equal(tn.elementwise("relu", Tensor([-1.0, 2.0])).data, [0, 2])
    np.testing.assert_array_equal(tn.elementwise("add", Tensor([1.0, 2.0]), 1.0).data, [2, 3])
    with pytest.raises(ContractViolation):
        tn.elementwise("mul", Tensor(np.ones(2)), Tensor(np.ones(3)))
    with pytest.raises(ContractViolation):
        tn.elementwise("softmax", Tensor(1.0))


def test_activation_derivatives():
    x = Tensor(np.linspace(-3, 3, 7))
    s = 1 / (1 + np.exp(-x.data))
    np.testing.assert_allclose(grad_of(lambda v: tn.sum(tn.sigmoid(v)), x), s * (1 - s), rtol=1e-5)
    t = np.tanh(x.data)
    np.testing.assert_allclose(grad_of(lambda v: tn.sum(tn.tanh(v)), x), 1 - t * t, rtol=1e-5)


def test_backward_examples():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(grad_of(tn.sum, x), np.ones((2, 3)))
    np.testing.assert_array_equal(grad_of(lambda v: tn.sum(v * v), x), 2 * x.data)
    with pytest.raises(ContractViolation):
        with Tape() as tape:
            x.requires_grad = True
            y = x * 2.0
        tape.backward(y)


def test_gradients_accumulate_across_uses():
    x = Tensor(np.array([0.5, -1.0, 2.0]))
    once = grad_of(tn.sum, x).copy()
    twice = grad_of(lambda v: tn.sum(v) + tn.sum(v), x)
    np.testing.assert_array_equal(twice, 2 * once)


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        with tn.no_grad():
            y = tn.sum(x * 3.0)
    assert tape.nodes == [] and not y.requires_grad
    with pytest.raises(ContractViolation):
        tn.backward(y)


def test_gradient_check_examples(float64):
    x = Tensor(np.random.default_rng(3).normal(size=(4, 3)))
    # exact up to the rounding of (x + eps) - (x - eps)
    assert tn.gradient_check(tn.sum, x) < 1e-12

    rng = Rng(42)
    W = Tensor(rng.uniform(-1, 1, (5, 4)))
    v = Tensor(rng.uniform(-1, 1, (4,)))
    assert tn.gradient_check(lambda w: tn.sum(tn.sigmoid(tn.matmul(v, tn.transpose(w)))), W) < 1e-4
    assert tn.gradient_check(lambda u: tn.sum(tn.sigmoid(tn.matmul(u, tn.transpose(W)))), v) < 1e-4

    ones = Tensor(np.ones(3))
    g = grad_of(lambda u: tn.sum(u * u), ones)
    np.testing.assert_array_equal(g, [2, 2, 2])
    assert tn.gradient_check(lambda u: tn.sum(u * u), ones) < 1e-9

    with pytest.raises(ContractViolation):
        tn.gradient_check(lambda u: u * 2.0, ones)


@pytest.mark.parametrize(
    "f",
    [
        lambda x: tn.sum(tn.tanh(tn.transpose(x)) * Tensor(np.arange(12.0).reshape(3, 4))),
        lambda x: tn.mean(tn.log(tn.clip(tn.sigmoid(x), 1e-7, 1.0))),
        lambda x: tn.sum(tn.reshape(x, (2, 6)) * Tensor(np.linspace(-1, 1, 12).reshape(2, 6))),
        lambda x: tn.sum(tn.concat([x, x * 2.0], axis=0) * tn.concat([x, x], axis=0)),
        lambda x: tn.sum(tn.stack([x, tn.tanh(x)], axis=1) * tn.stack([x, x], axis=1)),
        lambda x: tn.sum(tn.take(x, np.array([[0, 2], [2, 2]]), axis=0)
                         * tn.take(x, np.array([[1, 1], [0, 3]]), axis=0)),
        lambda x: tn.sum(tn.pad(x, 1, 2, axis=-2) * tn.pad(tn.tanh(x), 1, 2, axis=-2)),
        lambda x: tn.sum(tn.tanh(x[1:, ::2])),
        lambda x: tn.sum(tn.sum(x * x, axis=0) * Tensor([1.0, -2.0, 3.0])),
    ],
)
def test_op_gradients(f, float64):
    x = Tensor(np.random.default_rng(11).normal(size=(4, 3)))
    assert tn.gradient_check(f, x) < 1e-6


def test_broadcast_gradient_is_unbroadcast():
    b = Tensor(np.array([1.0, 2.0, 3.0]))
    g = grad_of(lambda v: tn.sum(Tensor(np.ones((4, 3))) * v), b)
    np.testing.assert_array_equal(g, [4, 4, 4])


def test_rng_determinism():
    a = tn.glorot_uniform((7, 5), Rng(99)).data
    b = tn.glorot_uniform((7, 5), Rng(99)).data
    assert a.tobytes() == b.tobytes()
    assert a.dtype == np.float32
    assert abs(a).max() <= np.sqrt(6 / 12)
    c1, c2 = Rng(5).spawn(2)
    assert c1.random(4).tobytes() != c2.random(4).tobytes()
    assert Rng(5).spawn(2)[1].random(4).tobytes() == Rng(5).spawn(2)[1].random(4).tobytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_values_raise():
    with pytest.raises(NonFiniteError):
        tn.log(Tensor([0.0, 1.0]))
