"""Full network: embedding, stacked expert-mixing + gated-MLP layers,
tied-embedding prediction head, and the ablation variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as T
from .attention import AttentionParams, linear_attention
from .layers import DenseGruParams, dense_selective_gru
from .tensor import Tensor

ABLATION_VARIANTS = {
    "default": {},
    "w/o GRU": {"use_gru": False},
    "w/o Attention": {"use_attention": False},
    "w/o Temporal Conv1d": {"use_temporal_conv": False},
    "w/o Gated MLP": {"use_gated_mlp": False},  # Light variant
}


@dataclass
class ModelConfig:
    vocab_size: int           # |V| + 1, index 0 is padding
    hidden_size: int = 64
    kernel_size: int = 3
    heads: int = 2
    num_layers: int = 1
    dropout: float = 0.0
    max_seq_len: int = 100
    use_gru: bool = True
    use_attention: bool = True
    use_temporal_conv: bool = True
    use_gated_mlp: bool = True

    def __post_init__(self):
        if self.hidden_size <= 0:
            raise ValueError("hidden_size must be positive")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if self.hidden_size % self.heads != 0:
            raise ValueError("heads must divide hidden_size")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if not self.use_gru and not self.use_attention:
            raise ValueError("at least one expert must stay enabled")

    def to_dict(self):
        return asdict(self)

    def with_variant(self, name):
        """Apply one of the named ablation variants."""
        flags = ABLATION_VARIANTS[name]
        d = self.to_dict()
        d.update(flags)
        return ModelConfig(**d)


@dataclass
class LayerParams:
    dense_gru: DenseGruParams
    attn: AttentionParams
    mix_logits: Tensor        # [2] raw mixing parameters, softmaxed
    w_data_gate: Tensor       # [d, d] data-aware gate
    b_data_gate: Tensor       # [d]
    w_mlp_gate: Tensor        # [d, d] gated MLP: gate branch
    b_mlp_gate: Tensor        # [d]
    w_mlp: Tensor             # [d, d] gated MLP: value branch
    b_mlp: Tensor             # [d]
    w_mlp_out: Tensor         # [d, d] gated MLP: output projection
    b_mlp_out: Tensor         # [d]

    @staticmethod
    def init(cfg, rng):
        d = cfg.hidden_size
        return LayerParams(
            dense_gru=DenseGruParams.init(d, cfg.kernel_size, rng),
            attn=AttentionParams.init(d, cfg.heads, rng),
            mix_logits=T.zeros(2),
            w_data_gate=T.xavier_init((d, d), rng), b_data_gate=T.zeros(d),
            w_mlp_gate=T.xavier_init((d, d), rng), b_mlp_gate=T.zeros(d),
            w_mlp=T.xavier_init((d, d), rng), b_mlp=T.zeros(d),
            w_mlp_out=T.xavier_init((d, d), rng), b_mlp_out=T.zeros(d),
        )

    def named(self, prefix):
        out = {}
        out.update(self.dense_gru.named(f"{prefix}.dense_gru"))
        out.update(self.attn.named(f"{prefix}.attn"))
        out.update({
            f"{prefix}.mix_logits": self.mix_logits,
            f"{prefix}.w_data_gate": self.w_data_gate,
            f"{prefix}.b_data_gate": self.b_data_gate,
            f"{prefix}.w_mlp_gate": self.w_mlp_gate,
            f"{prefix}.b_mlp_gate": self.b_mlp_gate,
            f"{prefix}.w_mlp": self.w_mlp,
            f"{prefix}.b_mlp": self.b_mlp,
            f"{prefix}.w_mlp_out": self.w_mlp_out,
            f"{prefix}.b_mlp_out": self.b_mlp_out,
        })
        return out


@dataclass
class ModelParams:
    embedding: Tensor         # [vocab_size, d]; row 0 all-zero, frozen
    layers: list = field(default_factory=list)

    @staticmethod
    def init(cfg, rng):
        emb = T.xavier_init((cfg.vocab_size, cfg.hidden_size), rng)
        emb.data[0] = 0.0  # padding row
        return ModelParams(
            embedding=emb,
            layers=[LayerParams.init(cfg, rng) for _ in range(cfg.num_layers)],
        )

    def named_parameters(self):
        out = {"embedding": self.embedding}
        for i, layer in enumerate(self.layers):
            out.update(layer.named(f"layer{i}"))
        return out

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.zero_grad()


def embed(items, params, cfg, training=False, rng=None):
    """Item index lookup; no positional embedding, dropout in train mode."""
    x = T.embedding_lookup(params.embedding, items)
    if training and cfg.dropout > 0.0:
        x = T.dropout(x, cfg.dropout, training=True, rng=rng)
    return x


def mixing_weights(layer):
    """Softmax of the two raw mixing logits -> scalar tensors (w1, w2)."""
    w = T.softmax_rows(layer.mix_logits)
    return T.get_item(w, 0), T.get_item(w, 1)


def expert_mixing_block(x, layer, cfg):
    """Mix the attention and dense-GRU experts, then the data-aware gate.

    Ablation flags drop one expert and give the survivor weight 1.
    """
    if cfg.use_gru and cfg.use_attention:
        w1, w2 = mixing_weights(layer)
        m = w1 * linear_attention(x, layer.attn) \
            + w2 * dense_selective_gru(x, layer.dense_gru, cfg.use_temporal_conv)
    elif cfg.use_attention:
        m = linear_attention(x, layer.attn)
    elif cfg.use_gru:
        m = dense_selective_gru(x, layer.dense_gru, cfg.use_temporal_conv)
    else:
        raise ValueError("both experts disabled")
    gate = T.gelu(T.matmul(x, layer.w_data_gate) + layer.b_data_gate)
    return gate * m


def gated_mlp_block(z, layer, cfg, training=False, rng=None):
    """GeLU-gated MLP head; identity when disabled (Light variant)."""
    if not cfg.use_gated_mlp:
        return z
    gate = T.gelu(T.matmul(z, layer.w_mlp_gate) + layer.b_mlp_gate)
    value = T.matmul(z, layer.w_mlp) + layer.b_mlp
    if training and cfg.dropout > 0.0:
        value = T.dropout(value, cfg.dropout, training=True, rng=rng)
    p = gate * value
    return T.matmul(p, layer.w_mlp_out) + layer.b_mlp_out


def forward(items, lengths, params, cfg, training=False, rng=None):
    """Score all items for a batch of left-padded index sequences.

    items: int array [B, N] (0 = padding, left-aligned padding)
    lengths: int array [B] of valid lengths; all must be >= 1
    Returns logits [B, vocab_size] = R_last @ embedding^T.
    """
    items = np.asarray(items, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if items.ndim != 2 or items.shape[0] == 0:
        raise ValueError("empty batch")
    if items.shape[1] > cfg.max_seq_len:
        raise ValueError(
            f"sequence length {items.shape[1]} exceeds max_seq_len {cfg.max_seq_len}")
    if np.any(lengths < 1):
        raise ValueError("all-padding sequence in batch")
    # pad positions are zeroed after every block so they cannot leak into
    # valid positions through the non-causal convolution or attention sums
    mask = Tensor((items != 0).astype(np.float64)[..., None])
    x = embed(items, params, cfg, training, rng) * mask
    for layer in params.layers:
        z = expert_mixing_block(x, layer, cfg)
        r = gated_mlp_block(z, layer, cfg, training, rng)
        x = r * mask
    r_last = T.last_step(x)  # left padding: last column is always valid
    return T.matmul(r_last, T.transpose(params.embedding))
