"""Dense tensors with tape-based reverse-mode differentiation.

Operations executed inside an active :class:`Tape` are recorded in creation
order; :meth:`Tape.backward` replays them in reverse, accumulating gradients
into every tensor that took part. Outside a tape nothing is recorded, which is
how inference and finite-difference probes run.
"""

import contextlib
import math

import numpy as np

from .exceptions import ContractViolation, NonFiniteError

_DTYPE = np.float32
_TAPES = []
CHECK_FINITE = True


def get_default_dtype():
    return _DTYPE


@contextlib.contextmanager
def default_dtype(dtype):
    """Temporarily change the dtype new tensors are created with."""
    global _DTYPE
    previous, _DTYPE = _DTYPE, np.dtype(dtype).type
    try:
        yield
    finally:
        _DTYPE = previous


class Rng:
    """Seeded random stream (numpy PCG64). Same seed, same stream, on every platform."""

    def __init__(self, seed):
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self, n):
        return [_ChildRng(s, self.seed) for s in self._seq.spawn(n)]

    @property
    def state(self):
        return self.generator.bit_generator.state

    def uniform(self, low, high, size):
        return self.generator.uniform(low, high, size)

    def random(self, size):
        return self.generator.random(size)

    def permutation(self, n):
        return self.generator.permutation(n)


class _ChildRng(Rng):
    def __init__(self, seq, root_seed):
        self.seed = root_seed
        self._seq = seq
        self.generator = np.random.Generator(np.random.PCG64(seq))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_tape")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.array(data, dtype=_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros(self.data.shape, dtype=self.data.dtype)
        self.grad += g

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __neg__ = lambda self: mul(self, -1.0)
    __matmul__ = lambda self, other: matmul(self, other)
    __getitem__ = lambda self, index: getitem(self, index)


class Tape:
    """Ordered record of differentiable operations for one forward pass."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def backward(self, loss):
        if loss.size != 1:
            raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
        loss._accumulate(np.ones(loss.shape, dtype=loss.data.dtype))
        for out, fn in reversed(self.nodes):
            if out.grad is not None:
                fn(out.grad)


def backward(loss):
    """Backpropagate from a scalar produced under a tape."""
    if loss.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None:
        raise ContractViolation("loss was not produced under an active Tape")
    loss._tape.backward(loss)


def no_grad():
    """Context that suspends recording."""
    return _Suspended()


class _Suspended:
    def __enter__(self):
        self._saved = list(_TAPES)
        _TAPES.clear()

    def __exit__(self, *exc):
        _TAPES.extend(self._saved)
        return False


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def record(data, parents, fn):
    if CHECK_FINITE and not np.isfinite(data).all():
        raise NonFiniteError("non-finite value produced by tensor op")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._tape = None
    out.requires_grad = False
    if _TAPES and any(p.requires_grad for p in parents):
        tape = _TAPES[-1]
        out.requires_grad = True
        out._tape = tape
        tape.nodes.append((out, fn))
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_check(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ContractViolation(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- elementwise ------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")

    def fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return record(a.data + b.data, (a, b), fn)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "sub")

    def fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return record(a.data - b.data, (a, b), fn)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")

    def fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return record(a.data * b.data, (a, b), fn)


def sigmoid(x):
    x = as_tensor(x)
    # tanh form avoids exp overflow for large |x|
    s = (0.5 * (1.0 + np.tanh(0.5 * x.data))).astype(x.data.dtype)

    def fn(g):
        x._accumulate(g * s * (1.0 - s))

    return record(s, (x,), fn)


def tanh(x):
    x = as_tensor(x)
    t = np.tanh(x.data)

    def fn(g):
        x._accumulate(g * (1.0 - t * t))

    return record(t, (x,), fn)


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0

    def fn(g):
        x._accumulate(g * mask)

    return record(np.where(mask, x.data, 0).astype(x.data.dtype), (x,), fn)


def log(x):
    x = as_tensor(x)

    def fn(g):
        x._accumulate(g / x.data)

    return record(np.log(x.data), (x,), fn)


def clip(x, low, high):
    """Clamp values; gradient passes only where the input was inside the bounds."""
    x = as_tensor(x)
    inside = (x.data >= low) & (x.data <= high)

    def fn(g):
        x._accumulate(g * inside)

    return record(np.clip(x.data, low, high), (x,), fn)


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
}


def elementwise(op, *args):
    try:
        return _ELEMENTWISE[op](*args)
    except KeyError:
        raise ContractViolation(f"unknown elementwise op {op!r}") from None


# -- linear algebra and reductions --------------------------------------------

def matmul(a, b):
    """``a @ b`` where ``b`` is a matrix and ``a`` has any number of leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ContractViolation(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def fn(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            a2 = a.data.reshape(-1, a.shape[-1])
            g2 = g.reshape(-1, b.shape[1])
            b._accumulate(a2.T @ g2)

    return record(a.data @ b.data, (a, b), fn)


def transpose(x):
    x = as_tensor(x)
    if x.ndim != 2:
        raise ContractViolation(f"transpose expects a matrix, got {x.shape}")

    def fn(g):
        x._accumulate(g.T)

    return record(x.data.T.copy(), (x,), fn)


def reshape(x, shape):
    x = as_tensor(x)

    def fn(g):
        x._accumulate(g.reshape(x.shape))

    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ContractViolation(f"cannot reshape {x.shape} to {shape}") from None
    return record(data, (x,), fn)


def sum(x, axis=None):
    x = as_tensor(x)

    def fn(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape))

    return record(np.asarray(x.data.sum(axis=axis), dtype=x.data.dtype), (x,), fn)


def mean(x):
    x = as_tensor(x)
    n = x.size

    def fn(g):
        x._accumulate(np.broadcast_to(g / n, x.shape))

    return record(np.asarray(x.data.mean(), dtype=x.data.dtype), (x,), fn)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def fn(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t._accumulate(g[tuple(index)])

    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ContractViolation(f"concat: {err}") from None
    return record(data, tensors, fn)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def fn(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(np.take(g, i, axis=axis))

    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ContractViolation(f"stack: {err}") from None
    return record(data, tensors, fn)


def getitem(x, index):
    """Basic (slice/integer) indexing."""
    x = as_tensor(x)

    def fn(g):
        if x.grad is None:
            x.grad = np.zeros(x.shape, dtype=x.data.dtype)
        x.grad[index] += g

    return record(np.array(x.data[index]), (x,), fn)


def take(x, indices, axis=0):
    """Gather along ``axis`` with an integer index array; repeated ids accumulate."""
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.intp)
    ax = axis % x.ndim
    n = x.shape[ax]
    if indices.size and (indices.min() < 0 or indices.max() >= n):
        raise ContractViolation(f"take: index out of range for axis of length {n}")

    def fn(g):
        if x.grad is None:
            x.grad = np.zeros(x.shape, dtype=x.data.dtype)
        k = indices.ndim
        g_moved = np.moveaxis(g, list(range(ax, ax + k)), list(range(k)))
        flat_idx = indices.reshape(-1)
        if not flat_idx.size:
            return
        rows = g_moved.reshape(flat_idx.size, -1)
        # sort + reduceat sums repeated ids much faster than np.add.at
        order = np.argsort(flat_idx, kind="stable")
        sorted_idx = flat_idx[order]
        starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])
        sums = np.add.reduceat(rows[order], starts, axis=0)
        target = np.moveaxis(x.grad, ax, 0)
        target[sorted_idx[starts]] += sums.reshape((starts.size,) + target.shape[1:])

    return record(np.take(x.data, indices, axis=ax), (x,), fn)


def pad(x, before, after, axis=-2):
    """Zero-pad ``axis`` with ``before``/``after`` entries."""
    x = as_tensor(x)
    ax = axis % x.ndim
    widths = [(0, 0)] * x.ndim
    widths[ax] = (before, after)
    index = [slice(None)] * x.ndim
    index[ax] = slice(before, before + x.shape[ax])
    index = tuple(index)

    def fn(g):
        x._accumulate(g[index])

    return record(np.pad(x.data, widths), (x,), fn)


def max_pool(x, pool):
    """Non-overlapping max over windows of ``pool`` along axis -2.

    A trailing partial window is pooled on its own. Gradient goes to the first
    maximal entry of each window.
    """
    x = as_tensor(x)
    if x.ndim < 2:
        raise ContractViolation(f"max_pool expects [..., T, C], got {x.shape}")
    *lead, T, C = x.shape
    n = -(-T // pool)
    padded = np.full((*lead, n * pool, C), -np.inf, dtype=x.data.dtype)
    padded[..., :T, :] = x.data
    windows = padded.reshape(*lead, n, pool, C)
    arg = windows.argmax(axis=-2)[..., None, :]
    out = np.take_along_axis(windows, arg, axis=-2)[..., 0, :]

    def fn(g):
        gw = np.zeros(windows.shape, dtype=x.data.dtype)
        np.put_along_axis(gw, arg, g[..., None, :], axis=-2)
        x._accumulate(gw.reshape(*lead, n * pool, C)[..., :T, :])

    return record(out, (x,), fn)


def gradient_check(f, x, eps=1e-3):
    """Largest relative gap between the tape gradient of scalar ``f`` at ``x``
    and a central difference, elementwise: |a - n| / max(1e-8, |a| + |n|).
    """
    x.requires_grad = True
    x.grad = None
    with Tape() as tape:
        y = f(x)
    if y.size != 1:
        raise ContractViolation(f"gradient_check needs scalar f, got shape {y.shape}")
    tape.backward(y)
    analytic = np.zeros(x.shape) if x.grad is None else x.grad.astype(np.float64)

    numeric = np.zeros(x.shape)
    flat = x.data.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(f(x).data)
            flat[i] = orig - eps
            down = float(f(x).data)
            flat[i] = orig
            numeric.flat[i] = (up - down) / (2 * eps)

    if not analytic.size:
        return 0.0
    err = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(err.max())


def glorot_uniform(shape, rng, fan_in=None, fan_out=None):
    if fan_in is None:
        fan_in, fan_out = shape[0], shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, shape), requires_grad=True)


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)
