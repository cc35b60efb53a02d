"""Flat key-value run configuration shared by the CLI subcommands.

File format: one ``key = value`` pair per line, ``#`` comments, blank
lines ignored.  Every key has a matching CLI flag; flags override file
values and the fully resolved configuration is echoed into each result
JSON.  Unknown keys are rejected.
"""

from __future__ import annotations

from .model import ModelConfig
from .training import TrainConfig

MODEL_KEYS = {
    "hidden_size": int,
    "kernel_size": int,
    "heads": int,
    "num_layers": int,
    "dropout": float,
    "max_seq_len": int,
    "use_gru": bool,
    "use_attention": bool,
    "use_temporal_conv": bool,
    "use_gated_mlp": bool,
}

TRAIN_KEYS = {
    "learning_rate": float,
    "batch_size": int,
    "eval_batch_size": int,
    "max_epochs": int,
    "patience": int,
    "seed": int,
    "weight_decay": float,
    "eval_k": int,
}

ALL_KEYS = {**MODEL_KEYS, **TRAIN_KEYS}


def _parse_value(key, raw):
    typ = ALL_KEYS[key]
    if typ is bool:
        low = str(raw).strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean for {key!r}: {raw!r}")
    return typ(raw)


def read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in ALL_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def resolve(file_values, cli_overrides, vocab_size):
    """defaults <- config file <- CLI flags; returns (ModelConfig, TrainConfig)."""
    merged = dict(file_values)
    for key, value in cli_overrides.items():
        if value is not None:
            if key not in ALL_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = value
    model_kwargs = {k: v for k, v in merged.items() if k in MODEL_KEYS}
    train_kwargs = {k: v for k, v in merged.items() if k in TRAIN_KEYS}
    return (ModelConfig(vocab_size=vocab_size, **model_kwargs),
            TrainConfig(**train_kwargs))


def echo(model_cfg, train_cfg):
    out = model_cfg.to_dict()
    out.update(train_cfg.to_dict())
    return out
