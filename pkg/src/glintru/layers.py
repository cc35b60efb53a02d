"""Dense selective GRU expert and its constituent layers.

All layers operate on [..., N, d] tensors so the same code path serves a
single sequence [N, d] and a batch [B, N, d].  The GRU scan is sequential
in N; everything else is position-parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class TemporalConvParams:
    """Depthwise k-tap kernel plus an optional dense pre-projection."""

    kernel: Tensor          # [k, d]
    w0: Tensor | None = None  # [d, d], only on the input-side convolution
    b0: Tensor | None = None  # [d]

    @staticmethod
    def init(d, k, rng, with_projection):
        if k % 2 == 0:
            raise T.ShapeError(f"kernel size must be odd, got {k}")
        # small uniform kernel init, same fan-based scale as a [k, 1] layer
        bound = np.sqrt(6.0 / (k + 1))
        kernel = Tensor(rng.uniform(-bound, bound, size=(k, d)))
        if with_projection:
            return TemporalConvParams(kernel, T.xavier_init((d, d), rng), T.zeros(d))
        return TemporalConvParams(kernel)

    def named(self, prefix):
        out = {f"{prefix}.kernel": self.kernel}
        if self.w0 is not None:
            out[f"{prefix}.w0"] = self.w0
            out[f"{prefix}.b0"] = self.b0
        return out


@dataclass
class GruParams:
    """Gate and candidate weights over the concatenation [h_prev, x]."""

    w_z: Tensor  # [2d, d]
    w_r: Tensor  # [2d, d]
    w_c: Tensor  # [2d, d]
    b_z: Tensor  # [d]
    b_r: Tensor  # [d]
    b_c: Tensor  # [d]

    @staticmethod
    def init(d, rng):
        return GruParams(
            w_z=T.xavier_init((2 * d, d), rng),
            w_r=T.xavier_init((2 * d, d), rng),
            w_c=T.xavier_init((2 * d, d), rng),
            b_z=T.zeros(d),
            b_r=T.zeros(d),
            b_c=T.zeros(d),
        )

    def named(self, prefix):
        return {
            f"{prefix}.w_z": self.w_z, f"{prefix}.w_r": self.w_r,
            f"{prefix}.w_c": self.w_c, f"{prefix}.b_z": self.b_z,
            f"{prefix}.b_r": self.b_r, f"{prefix}.b_c": self.b_c,
        }


@dataclass
class SelectiveGateParams:
    """Two tiny SiLU-gated linear layers plus the channel-crossing layer."""

    w_in: Tensor     # [d, d] first gate layer
    b_in: Tensor     # [d]
    w_out: Tensor    # [d, d] second gate layer
    b_out: Tensor    # [d]
    w_cross: Tensor  # [d, d] channel crossing on the hidden states
    b_cross: Tensor  # [d]

    @staticmethod
    def init(d, rng):
        return SelectiveGateParams(
            w_in=T.xavier_init((d, d), rng), b_in=T.zeros(d),
            w_out=T.xavier_init((d, d), rng), b_out=T.zeros(d),
            w_cross=T.xavier_init((d, d), rng), b_cross=T.zeros(d),
        )

    def named(self, prefix):
        return {
            f"{prefix}.w_in": self.w_in, f"{prefix}.b_in": self.b_in,
            f"{prefix}.w_out": self.w_out, f"{prefix}.b_out": self.b_out,
            f"{prefix}.w_cross": self.w_cross, f"{prefix}.b_cross": self.b_cross,
        }


@dataclass
class DenseGruParams:
    """The full dense selective GRU expert."""

    conv_in: TemporalConvParams   # with pre-projection
    gru: GruParams
    gate: SelectiveGateParams
    conv_out: TemporalConvParams  # kernel only

    @staticmethod
    def init(d, k, rng):
        return DenseGruParams(
            conv_in=TemporalConvParams.init(d, k, rng, with_projection=True),
            gru=GruParams.init(d, rng),
            gate=SelectiveGateParams.init(d, rng),
            conv_out=TemporalConvParams.init(d, k, rng, with_projection=False),
        )

    def named(self, prefix):
        out = {}
        out.update(self.conv_in.named(f"{prefix}.conv_in"))
        out.update(self.gru.named(f"{prefix}.gru"))
        out.update(self.gate.named(f"{prefix}.gate"))
        out.update(self.conv_out.named(f"{prefix}.conv_out"))
        return out


def temporal_conv1d(x, params, apply_projection):
    """Depthwise temporal convolution, optionally after a dense projection.

    Non-causal: zero padding of (k-1)//2 on both sides, so every output
    position fuses its neighbours on both sides and the length stays N.
    """
    if apply_projection:
        if params.w0 is None:
            raise ValueError("params carry no projection weights")
        x = T.matmul(x, params.w0) + params.b0
    return T.depthwise_conv1d(x, params.kernel)


def gru_cell(x_t, h_prev, p):
    """One GRU step on [..., d] slices.

    Returns (h_t, z_t, h_tilde); the gate and candidate are exposed so the
    closed-form hidden-state decomposition can be checked against the scan.
    """
    hx = T.concat(h_prev, x_t, axis=-1)
    z = T.sigmoid(T.matmul(hx, p.w_z) + p.b_z)
    r = T.sigmoid(T.matmul(hx, p.w_r) + p.b_r)
    rhx = T.concat(r * h_prev, x_t, axis=-1)
    h_tilde = T.tanh(T.matmul(rhx, p.w_c) + p.b_c)
    h_t = z * h_prev + (Tensor(1.0) - z) * h_tilde
    return h_t, z, h_tilde


def gru_sequence(c, p, return_trace=False):
    """Left-to-right GRU scan over [..., N, d] from h0 = 0.

    With return_trace=True also returns the per-step (z_t, h_tilde_t)
    tensors used by the decomposition identity test.
    """
    n = c.shape[-2]
    if n < 1:
        raise T.ShapeError("empty sequence")
    # [..., d] slices per step; matmul is batched over the leading dims
    h = T.zeros(c.shape[:-2] + (c.shape[-1],))
    steps, trace = [], []
    for t in range(n):
        x_t = _time_slice(c, t)
        h, z, h_tilde = gru_cell(x_t, h, p)
        steps.append(h)
        trace.append((z, h_tilde))
    out = _stack_time(steps)
    if return_trace:
        return out, trace
    return out


def _time_slice(x, t):
    """Pick time step t out of [..., N, d] -> [..., d]."""
    out_data = x.data[..., t, :]

    def backward(g):
        buf = np.zeros_like(x.data)
        buf[..., t, :] = g
        x._accumulate(buf)

    return Tensor(out_data, (x,), backward)


def _stack_time(steps):
    """Stack [..., d] slices into [..., N, d]."""
    out_data = np.stack([s.data for s in steps], axis=-2)
    parents = tuple(steps)

    def backward(g):
        for t, s in enumerate(steps):
            s._accumulate(g[..., t, :])

    return Tensor(out_data, parents, backward)


def selective_gate(c, h, p):
    """SiLU selective gate modulating the channel-crossed hidden states."""
    if c.shape != h.shape:
        raise T.ShapeError(f"shape mismatch {c.shape} vs {h.shape}")
    gate = T.matmul(T.silu(T.matmul(c, p.w_in) + p.b_in), p.w_out) + p.b_out
    crossed = T.matmul(h, p.w_cross) + p.b_cross
    return gate * crossed


def dense_selective_gru(x, params, use_temporal_conv=True):
    """Full expert: conv-in -> GRU scan -> selective gate -> conv-out.

    With use_temporal_conv=False (ablation) both depthwise kernels are
    skipped but the input projection is kept, so the GRU still sees a
    learned transform of the embeddings.
    """
    if use_temporal_conv:
        c = temporal_conv1d(x, params.conv_in, apply_projection=True)
    else:
        c = T.matmul(x, params.conv_in.w0) + params.conv_in.b0
    h = gru_sequence(c, params.gru)
    g = selective_gate(c, h, params.gate)
    if use_temporal_conv:
        return T.depthwise_conv1d(g, params.conv_out.kernel)
    return g
