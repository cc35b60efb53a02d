"""Minimal reverse-mode autodiff over dense f64 numpy arrays.

Every op returns a new Tensor that remembers its parents and a closure
computing the parent gradients.  ``Tensor.backward()`` walks the recorded
graph once in reverse topological order and accumulates gradients
additively, so a tensor consumed by several ops receives the sum of all
contributions.  Forward values are checked for NaN/Inf at construction
time; a non-finite result raises ``NonFiniteError`` instead of silently
propagating.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

_SQRT1_2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# toggled by no_grad(); when False ops do not record the tape
_grad_enabled = True
# finite checks can be switched off for timing runs
check_finite = True


class NonFiniteError(FloatingPointError):
    """A forward op produced NaN or Inf."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (eval / benchmarking)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        if check_finite and not np.all(np.isfinite(self.data)):
            raise NonFiniteError("non-finite values in tensor")
        self.grad = None
        if _grad_enabled:
            self._parents = parents
            self._backward = backward
        else:
            self._parents = ()
            self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, seed=None):
        """Reverse pass from this tensor; seeds with ones unless given."""
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.ones_like(self.data) if seed is None else seed)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # convenience operators used throughout the model code
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(g, shape):
    """Sum gradient g down to a broadcast operand's original shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return Tensor(out_data, (a, b), backward)


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data - b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(-_unbroadcast(g, b.shape))

    return Tensor(out_data, (a, b), backward)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return Tensor(out_data, (a, b), backward)


def matmul(a, b):
    """Matrix product; batched leading dims allowed on either operand.

    A 1-D left operand is treated as a row vector and the result squeezed
    back to 1-D, so unbatched [d] @ [d, n] works.
    """
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 1 or b.ndim < 2:
        raise ShapeError("matmul needs rank >= 1 left and rank >= 2 right operand")
    row_vec = a.ndim == 1
    a_data = a.data[None, :] if row_vec else a.data
    if a_data.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    out_data = np.matmul(a_data, b.data)
    if row_vec:
        out_data = out_data[..., 0, :]

    def backward(g):
        gm = g[..., None, :] if row_vec else g
        ga = np.matmul(gm, np.swapaxes(b.data, -1, -2))
        if row_vec:
            ga = ga[..., 0, :]
        a._accumulate(_unbroadcast(ga, a.shape))
        b._accumulate(_unbroadcast(np.matmul(np.swapaxes(a_data, -1, -2), gm),
                                   b.shape))

    return Tensor(out_data, (a, b), backward)


def transpose(a):
    """Swap the last two axes."""
    a = _wrap(a)
    out_data = np.swapaxes(a.data, -1, -2)

    def backward(g):
        a._accumulate(np.swapaxes(g, -1, -2))

    return Tensor(out_data, (a,), backward)


def concat(a, b, axis=-1):
    a, b = _wrap(a), _wrap(b)
    n = a.shape[axis]
    out_data = np.concatenate([a.data, b.data], axis=axis)

    def backward(g):
        ga, gb = np.split(g, [n], axis=axis)
        a._accumulate(ga)
        b._accumulate(gb)

    return Tensor(out_data, (a, b), backward)


def reduce_sum(a):
    a = _wrap(a)
    out_data = np.asarray(a.data.sum())

    def backward(g):
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return Tensor(out_data, (a,), backward)


def reduce_mean(a):
    a = _wrap(a)
    n = a.data.size
    out_data = np.asarray(a.data.mean())

    def backward(g):
        a._accumulate(np.broadcast_to(g / n, a.shape).copy())

    return Tensor(out_data, (a,), backward)


def get_item(a, index):
    """Pick one element; returns a scalar tensor (used for mixing weights)."""
    a = _wrap(a)
    out_data = np.asarray(a.data[index])

    def backward(g):
        buf = np.zeros_like(a.data)
        buf[index] = g
        a._accumulate(buf)

    return Tensor(out_data, (a,), backward)


def last_step(a):
    """Select the final time step of [..., N, d] -> [..., d]."""
    a = _wrap(a)
    out_data = a.data[..., -1, :]

    def backward(g):
        buf = np.zeros_like(a.data)
        buf[..., -1, :] = g
        a._accumulate(buf)

    return Tensor(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# activations

def _silu(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s


def _silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


def _gelu(x):
    # exact Gaussian-CDF form
    return 0.5 * x * (1.0 + erf(x * _SQRT1_2))


def _gelu_grad(x):
    cdf = 0.5 * (1.0 + erf(x * _SQRT1_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


_ACTIVATIONS = {
    "sigmoid": (
        lambda x: 1.0 / (1.0 + np.exp(-x)),
        lambda x: (lambda s: s * (1.0 - s))(1.0 / (1.0 + np.exp(-x))),
    ),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
    "relu": (lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(np.float64)),
    "elu": (
        lambda x: np.where(x > 0, x, np.expm1(x)),
        lambda x: np.where(x > 0, 1.0, np.exp(x)),
    ),
    "silu": (_silu, _silu_grad),
    "gelu": (_gelu, _gelu_grad),
}


def activation(a, kind):
    a = _wrap(a)
    try:
        fwd, deriv = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    out_data = fwd(a.data)

    def backward(g):
        a._accumulate(g * deriv(a.data))

    return Tensor(out_data, (a,), backward)


def sigmoid(a):
    return activation(a, "sigmoid")


def tanh(a):
    return activation(a, "tanh")


def silu(a):
    return activation(a, "silu")


def gelu(a):
    return activation(a, "gelu")


def elu(a):
    return activation(a, "elu")


# ---------------------------------------------------------------------------
# normalizations

def softmax_rows(a):
    """Stable softmax along the last axis."""
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        s = out_data
        a._accumulate(s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return Tensor(out_data, (a,), backward)


def l2_normalize(a, axis="row"):
    """Unit-L2 rows (last axis) or columns (second-to-last axis).

    Zero vectors pass through unchanged with zero gradient.
    """
    a = _wrap(a)
    ax = -1 if axis == "row" else -2
    if axis not in ("row", "column"):
        raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")
    norm = np.sqrt((a.data ** 2).sum(axis=ax, keepdims=True))
    safe = np.where(norm == 0.0, 1.0, norm)
    out_data = a.data / safe

    def backward(g):
        y = out_data
        gx = (g - y * (g * y).sum(axis=ax, keepdims=True)) / safe
        gx = np.where(norm == 0.0, 0.0, gx)
        a._accumulate(gx)

    return Tensor(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# structural / model-specific ops

def embedding_lookup(table, indices):
    """Row lookup into a [V, d] table; gradient scatters back into rows."""
    table = _wrap(table)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError("embedding index out of range")
    out_data = table.data[idx]

    def backward(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    return Tensor(out_data, (table,), backward)


def depthwise_conv1d(x, kernel):
    """Depthwise temporal convolution over [..., N, d] with a [k, d] kernel.

    Zero padding of (k-1)//2 on both sides keeps the output length N;
    k must be odd.
    """
    x = _wrap(x)
    kernel = _wrap(kernel)
    k, d = kernel.shape
    if k % 2 == 0:
        raise ShapeError(f"kernel size must be odd, got {k}")
    n = x.shape[-2]
    if n < 1:
        raise ShapeError("empty sequence")
    if x.shape[-1] != d:
        raise ShapeError("channel count mismatch between input and kernel")
    half = k // 2
    pad_spec = [(0, 0)] * (x.ndim - 2) + [(half, half), (0, 0)]
    xp = np.pad(x.data, pad_spec)
    out_data = np.zeros_like(x.data)
    for j in range(k):
        out_data += kernel.data[j] * xp[..., j:j + n, :]

    def backward(g):
        gx = np.zeros_like(xp)
        gk = np.zeros_like(kernel.data)
        flat_axes = tuple(range(g.ndim - 1))
        for j in range(k):
            gx[..., j:j + n, :] += kernel.data[j] * g
            gk[j] = (g * xp[..., j:j + n, :]).sum(axis=flat_axes)
        x._accumulate(gx[..., half:half + n, :] if half else gx)
        kernel._accumulate(gk)

    return Tensor(out_data, (x, kernel), backward)


def dropout(x, rate, training, rng):
    """Inverted dropout: identity in eval mode, kept entries scaled 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = _wrap(x)
    if not training or rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward(g):
        x._accumulate(g * mask)

    return Tensor(x.data * mask, (x,), backward)


# ---------------------------------------------------------------------------
# initialization / optimizer

def xavier_init(shape, rng):
    """Uniform Glorot initialization for a 2-D weight matrix."""
    if len(shape) != 2:
        raise ShapeError(f"xavier_init needs a 2-D shape, got {shape}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    fan_in, fan_out = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape))


def zeros(shape):
    return Tensor(np.zeros(shape))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One bias-corrected Adam update over a named parameter dict (in place)."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape mismatch for {name!r}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
