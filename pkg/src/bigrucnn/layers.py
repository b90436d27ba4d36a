"""Embedding, Conv1D, max pooling, (bi)GRU, dense and dropout layers.

Every layer accepts optional leading batch dimensions: a sequence is
``[..., T, C]`` and a vector is ``[..., C]``.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .exceptions import ConfigurationError, ContractViolation
from .tensor import Tensor


@dataclass
class GruParams:
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    @classmethod
    def init(cls, d_in, d_h, rng):
        g = tn.glorot_uniform
        return cls(
            W_z=g((d_in, d_h), rng), W_r=g((d_in, d_h), rng), W_h=g((d_in, d_h), rng),
            U_z=g((d_h, d_h), rng), U_r=g((d_h, d_h), rng), U_h=g((d_h, d_h), rng),
            b_z=tn.zeros(d_h, True), b_r=tn.zeros(d_h, True), b_h=tn.zeros(d_h, True),
        )

    @property
    def d_in(self):
        return self.W_z.shape[0]

    @property
    def d_h(self):
        return self.U_z.shape[0]

    def tensors(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def check(self):
        d_in, d_h = self.d_in, self.d_h
        for name, t in self.tensors().items():
            want = {"W": (d_in, d_h), "U": (d_h, d_h), "b": (d_h,)}[name[0]]
            if t.shape != want:
                raise ContractViolation(f"GRU {name} has shape {t.shape}, expected {want}")


@dataclass
class ConvParams:
    kernels: Tensor  # [n_filters, kernel_size, d_in]
    bias: Tensor  # [n_filters]

    @classmethod
    def init(cls, n_filters, kernel_size, d_in, rng):
        if kernel_size < 1 or n_filters < 1:
            raise ConfigurationError("kernel_size and n_filters must be >= 1")
        kernels = tn.glorot_uniform(
            (n_filters, kernel_size, d_in), rng,
            fan_in=kernel_size * d_in, fan_out=kernel_size * n_filters,
        )
        return cls(kernels=kernels, bias=tn.zeros(n_filters, True))

    def tensors(self):
        return {"kernels": self.kernels, "bias": self.bias}


def embedding_forward(ids, table):
    ids = np.asarray(ids)
    V = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= V):
        raise ContractViolation(f"token id outside embedding table of {V} rows")
    return tn.take(table, ids, axis=0)


def conv1d_forward(x, p, padding="same"):
    """Same-padded 1-D cross-correlation along the time axis, then ReLU."""
    if padding != "same":
        raise ConfigurationError(f"unsupported padding {padding!r}")
    n_filters, k, d_in = p.kernels.shape
    if k % 2 == 0:
        raise ConfigurationError(f"kernel_size must be odd, got {k}")
    if x.shape[-1] != d_in:
        raise ContractViolation(f"conv1d expects {d_in} input channels, got {x.shape[-1]}")
    T = x.shape[-2]
    if T < 1:
        raise ContractViolation("conv1d needs at least one time step")
    half = (k - 1) // 2
    xp = tn.pad(x, half, half, axis=-2)
    windows = np.arange(T)[:, None] + np.arange(k)[None, :]
    cols = tn.take(xp, windows, axis=-2)  # [..., T, k, d_in]
    cols = tn.reshape(cols, (*x.shape[:-2], T, k * d_in))
    w = tn.transpose(tn.reshape(p.kernels, (n_filters, k * d_in)))
    return tn.relu(tn.matmul(cols, w) + p.bias)


def maxpool1d(x, pool):
    if pool < 1:
        raise ConfigurationError(f"pool must be >= 1, got {pool}")
    if pool == 1:
        return x
    return tn.max_pool(x, pool)


def _gru_cell(xz, xr, xh, h_prev, p):
    # xz/xr/xh already hold x_t W + b for each gate
    z = tn.sigmoid(xz + h_prev @ p.U_z)
    r = tn.sigmoid(xr + h_prev @ p.U_r)
    cand = tn.tanh(xh + (r * h_prev) @ p.U_h)
    return (1.0 - z) * h_prev + z * cand


def gru_step(x_t, h_prev, p):
    """One GRU update: update gate z, reset gate r, candidate state, interpolation."""
    if x_t.shape[-1] != p.d_in or h_prev.shape[-1] != p.d_h:
        raise ContractViolation(
            f"gru_step: got x {x_t.shape}, h {h_prev.shape} for d_in={p.d_in}, d_h={p.d_h}"
        )
    return _gru_cell(
        x_t @ p.W_z + p.b_z, x_t @ p.W_r + p.b_r, x_t @ p.W_h + p.b_h, h_prev, p
    )


def _sig(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def gru_scan(x, p, reverse=False):
    """All hidden states of a GRU run over ``x`` [..., T, d_in] from h0 = 0.

    Returns [..., T, d_h] with each state aligned to the input position that
    produced it, so a reverse scan still reads t = 1..T. The whole scan,
    including backpropagation through time, is one tape node.
    """
    T = x.shape[-2]
    if T < 1:
        raise ContractViolation("GRU needs at least one time step")
    if x.shape[-1] != p.d_in:
        raise ContractViolation(f"GRU expects {p.d_in} input features, got {x.shape[-1]}")
    p.check()
    lead = x.shape[:-2]
    H = p.d_h
    xs = x.data.reshape(-1, T, p.d_in)
    N = xs.shape[0]
    W = np.concatenate([p.W_z.data, p.W_r.data, p.W_h.data], axis=1)
    b = np.concatenate([p.b_z.data, p.b_r.data, p.b_h.data])
    U_zr = np.concatenate([p.U_z.data, p.U_r.data], axis=1)
    U_h = p.U_h.data
    proj = xs @ W + b  # [N, T, 3H]

    order = range(T - 1, -1, -1) if reverse else range(T)
    states = np.empty((N, T, H), dtype=xs.dtype)
    prev = np.empty_like(states)
    z_all, r_all, c_all = np.empty_like(states), np.empty_like(states), np.empty_like(states)
    h = np.zeros((N, H), dtype=xs.dtype)
    for t in order:
        a = proj[:, t]
        hu = h @ U_zr
        z = _sig(a[:, :H] + hu[:, :H])
        r = _sig(a[:, H : 2 * H] + hu[:, H:])
        c = np.tanh(a[:, 2 * H :] + (r * h) @ U_h)
        prev[:, t], z_all[:, t], r_all[:, t], c_all[:, t] = h, z, r, c
        h = (1.0 - z) * h + z * c
        states[:, t] = h

    parents = (x, p.W_z, p.W_r, p.W_h, p.U_z, p.U_r, p.U_h, p.b_z, p.b_r, p.b_h)

    def fn(g):
        g = g.reshape(N, T, H)
        d_proj = np.empty_like(proj)
        d_uzr = np.zeros_like(U_zr)
        d_uh = np.zeros_like(U_h)
        dh = np.zeros((N, H), dtype=g.dtype)
        for t in reversed(order):
            dh = dh + g[:, t]
            hp, z, r, c = prev[:, t], z_all[:, t], r_all[:, t], c_all[:, t]
            da_z = dh * (c - hp) * z * (1.0 - z)
            da_h = dh * z * (1.0 - c * c)
            dq = da_h @ U_h.T
            d_uh += (r * hp).T @ da_h
            da_r = dq * hp * r * (1.0 - r)
            da_zr = np.concatenate([da_z, da_r], axis=1)
            d_uzr += hp.T @ da_zr
            d_proj[:, t, : 2 * H] = da_zr
            d_proj[:, t, 2 * H :] = da_h
            dh = dh * (1.0 - z) + dq * r + da_zr @ U_zr.T
        flat = d_proj.reshape(-1, 3 * H)
        if x.requires_grad:
            x._accumulate((d_proj @ W.T).reshape(x.shape))
        d_w = xs.reshape(-1, p.d_in).T @ flat
        d_b = flat.sum(axis=0)
        for k, t in enumerate((p.W_z, p.W_r, p.W_h)):
            if t.requires_grad:
                t._accumulate(d_w[:, k * H : (k + 1) * H])
        for k, t in enumerate((p.b_z, p.b_r, p.b_h)):
            if t.requires_grad:
                t._accumulate(d_b[k * H : (k + 1) * H])
        if p.U_z.requires_grad:
            p.U_z._accumulate(d_uzr[:, :H])
        if p.U_r.requires_grad:
            p.U_r._accumulate(d_uzr[:, H:])
        if p.U_h.requires_grad:
            p.U_h._accumulate(d_uh)

    return tn.record(states.reshape(*lead, T, H), parents, fn)


def bigru_forward(x, fwd, bwd, return_sequences):
    """Forward and backward GRU scans with concatenated states.

    ``return_sequences`` gives [..., T, 2*d_h]; otherwise the last state of
    each direction, [h_fwd_T ; h_bwd_1], shaped [..., 2*d_h].
    """
    if x.shape[-2] < 1:
        raise ContractViolation("bigru needs at least one time step")
    f_states = gru_scan(x, fwd)
    b_states = gru_scan(x, bwd, reverse=True)
    if return_sequences:
        return tn.concat([f_states, b_states], axis=-1)
    T = x.shape[-2]
    last_f = f_states[(Ellipsis, T - 1, slice(None))]
    first_b = b_states[(Ellipsis, 0, slice(None))]
    return tn.concat([last_f, first_b], axis=-1)


def dense_forward(x, W, b, activation="none"):
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ContractViolation(f"dense: x {x.shape}, W {W.shape}, b {b.shape} do not fit")
    out = x @ W + b
    if activation == "relu":
        return tn.relu(out)
    if activation == "sigmoid":
        return tn.sigmoid(out)
    if activation == "none":
        return out
    raise ConfigurationError(f"unknown activation {activation!r}")


def dropout(x, rate, training, rng):
    """Inverted dropout; identity (same object) at inference or rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.data.dtype) / np.asarray(1.0 - rate, dtype=x.data.dtype)
    return tn.mul(x, Tensor(mask))
