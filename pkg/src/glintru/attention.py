"""Linear attention expert plus the quadratic softmax baseline.

The linear form applies elu then row/column L2 normalization to the
query/key projections and associates K-first, so the per-head cost is
O(N * d_h^2) instead of O(N^2 * d_h).  The quadratic kernel exists only
for the complexity-scaling benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class AttentionParams:
    w_q: Tensor  # [d, d]
    w_k: Tensor  # [d, d]
    w_v: Tensor  # [d, d]
    heads: int

    @staticmethod
    def init(d, heads, rng):
        if d % heads != 0:
            raise T.ShapeError(f"head count {heads} does not divide d={d}")
        return AttentionParams(
            w_q=T.xavier_init((d, d), rng),
            w_k=T.xavier_init((d, d), rng),
            w_v=T.xavier_init((d, d), rng),
            heads=heads,
        )

    def named(self, prefix):
        return {f"{prefix}.w_q": self.w_q, f"{prefix}.w_k": self.w_k,
                f"{prefix}.w_v": self.w_v}


def _split_heads(x, heads):
    """[..., N, d] -> [..., heads, N, d/h] without copying twice."""
    d = x.shape[-1]
    dh = d // heads
    out_data = np.swapaxes(
        x.data.reshape(x.shape[:-1] + (heads, dh)), -3, -2)

    def backward(g):
        x._accumulate(
            np.swapaxes(g, -3, -2).reshape(x.shape))

    return Tensor(out_data, (x,), backward)


def _merge_heads(x):
    """[..., heads, N, d/h] -> [..., N, d]."""
    heads, n, dh = x.shape[-3:]
    out_data = np.swapaxes(x.data, -3, -2).reshape(x.shape[:-3] + (n, heads * dh))

    def backward(g):
        x._accumulate(
            np.swapaxes(g.reshape(g.shape[:-1] + (heads, dh)), -3, -2))

    return Tensor(out_data, (x,), backward)


def _project_heads(x, p):
    if x.shape[-1] % p.heads != 0:
        raise T.ShapeError(f"heads {p.heads} do not divide d={x.shape[-1]}")
    q = _split_heads(T.matmul(x, p.w_q), p.heads)
    k = _split_heads(T.matmul(x, p.w_k), p.heads)
    v = _split_heads(T.matmul(x, p.w_v), p.heads)
    return q, k, v


def linear_attention(x, p, q_first=False):
    """Linear attention over [..., N, d]; heads concatenated, no out-proj.

    q_first=True evaluates (rowL2(elu(Q)) colL2(elu(K))^T) V instead; the
    two orders are algebraically identical and only differ in cost, which
    the associativity test exploits.
    """
    q, k, v = _project_heads(x, p)
    qn = T.l2_normalize(T.elu(q), axis="row")
    kn = T.l2_normalize(T.elu(k), axis="column")
    if q_first:
        out = T.matmul(T.matmul(qn, T.transpose(kn)), v)
    else:
        out = T.matmul(qn, T.matmul(T.transpose(kn), v))
    return _merge_heads(out)


def quadratic_softmax_attention(x, p):
    """Standard softmax(QK^T / sqrt(d_h)) V baseline; O(N^2) by design."""
    q, k, v = _project_heads(x, p)
    dh = x.shape[-1] // p.heads
    scores = T.matmul(q, T.transpose(k)) * Tensor(1.0 / np.sqrt(dh))
    return _merge_heads(T.matmul(T.softmax_rows(scores), v))
