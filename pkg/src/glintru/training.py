"""Cross-entropy loss, the training loop, and parameter checkpoints."""

from __future__ import annotations

import copy
import json
import os
import sys
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as T
from .data import leave_one_out_split, make_batches
from .evaluation import evaluate
from .model import ModelParams, forward, mixing_weights
from .tensor import Tensor


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    eval_batch_size: int = 256
    max_epochs: int = 50
    patience: int = 10          # early stop on validation NDCG@10
    seed: int = 0
    weight_decay: float = 0.0
    eval_k: int = 10

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_metrics: dict
    mixing_weights: list  # per layer [w1, w2]
    wall_time: float


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_ndcg: float = -1.0
    stopped_early: bool = False

    def append(self, rec):
        self.epochs.append(rec)

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.epochs:
                fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")


def cross_entropy_loss(logits, targets):
    """Mean categorical NLL of the target item under softmax(logits).

    Stable log-sum-exp; targets must never be the padding item 0.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if np.any(targets == 0):
        raise ValueError("padding item cannot be a target")
    if np.any(targets < 0) or np.any(targets >= logits.shape[-1]):
        raise IndexError("target index out of range")
    z = logits.data
    zmax = z.max(axis=-1, keepdims=True)
    lse = zmax[..., 0] + np.log(np.exp(z - zmax).sum(axis=-1))
    b = targets.shape[0]
    rows = np.arange(b)
    loss_val = (lse - z[rows, targets]).mean()

    def backward(g):
        p = np.exp(z - zmax)
        p /= p.sum(axis=-1, keepdims=True)
        p[rows, targets] -= 1.0
        logits._accumulate(g * p / b)

    return Tensor(np.asarray(loss_val), (logits,), backward)


def train(cfg, train_cfg, dataset=None, views=None, log_jsonl=None,
          checkpoint_dir=None, quiet=False):
    """Run the optimization loop and return (best_params, TrainLog).

    Xavier init, shuffled epochs, Adam on all parameters including the
    mixing logits; the padding embedding row stays frozen.  Early stop on
    validation NDCG@10 patience; the best parameters are returned.
    """
    if views is None:
        views = leave_one_out_split(dataset)
    master = np.random.SeedSequence(train_cfg.seed)
    init_rng, drop_rng = [np.random.default_rng(s) for s in master.spawn(2)]
    params = ModelParams.init(cfg, init_rng)
    named = params.named_parameters()
    state = T.AdamState(lr=train_cfg.learning_rate)
    log = TrainLog()
    best_params = None
    since_best = 0
    for epoch in range(1, train_cfg.max_epochs + 1):
        t0 = time.perf_counter()
        losses = []
        batches = make_batches(views.train, cfg.max_seq_len,
                               train_cfg.batch_size,
                               shuffle_seed=train_cfg.seed * 100003 + epoch)
        for bidx, batch in enumerate(batches):
            params.zero_grad()
            logits = forward(batch.items, batch.lengths, params, cfg,
                             training=True, rng=drop_rng)
            loss = cross_entropy_loss(logits, batch.targets)
            if not np.isfinite(loss.data):
                raise T.NonFiniteError(f"non-finite loss at epoch {epoch} batch {bidx}")
            loss.backward()
            grads = {}
            for name, p in named.items():
                if p.grad is None:
                    continue
                g = p.grad
                if train_cfg.weight_decay:
                    g = g + train_cfg.weight_decay * p.data
                grads[name] = g
            if "embedding" in grads:
                grads["embedding"][0] = 0.0  # padding row frozen
            T.adam_step(named, grads, state)
            losses.append(float(loss.data))
        valid = evaluate(params, cfg, views.valid, k=train_cfg.eval_k,
                         batch_size=train_cfg.eval_batch_size)
        mix = [[float(x) for x in T.softmax_rows(layer.mix_logits).data]
               for layer in params.layers]
        rec = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            valid_metrics=valid.to_dict(),
            mixing_weights=mix,
            wall_time=time.perf_counter() - t0,
        )
        log.append(rec)
        if not quiet:
            print(f"epoch {epoch}: loss {rec.train_loss:.4f} "
                  f"valid ndcg@{valid.k} {valid.ndcg_at_k:.4f}",
                  file=sys.stderr, flush=True)
        if valid.ndcg_at_k > log.best_ndcg:
            log.best_ndcg = valid.ndcg_at_k
            log.best_epoch = epoch
            best_params = copy.deepcopy(params)
            since_best = 0
        else:
            since_best += 1
            if since_best >= train_cfg.patience:
                log.stopped_early = True
                break
    if log_jsonl:
        log.to_jsonl(log_jsonl)
    if checkpoint_dir:
        save_checkpoint(best_params, checkpoint_dir)
    return best_params, log


# ---------------------------------------------------------------------------
# checkpoints: JSON manifest (name -> shape/dtype/offset) + raw LE payload

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "weights.bin"


def save_checkpoint(params, path, cfg=None):
    os.makedirs(path, exist_ok=True)
    named = params.named_parameters()
    manifest = {"tensors": {}, "num_layers": len(params.layers)}
    if cfg is not None:
        manifest["config"] = cfg.to_dict()
    offset = 0
    payload = []
    for name in sorted(named):
        arr = np.ascontiguousarray(named[name].data, dtype="<f8")
        manifest["tensors"][name] = {
            "shape": list(arr.shape),
            "dtype": "<f8",
            "offset": offset,
        }
        payload.append(arr.tobytes())
        offset += arr.nbytes
    with open(os.path.join(path, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    with open(os.path.join(path, PAYLOAD_NAME), "wb") as fh:
        fh.write(b"".join(payload))


def load_checkpoint(path, cfg):
    """Rebuild ModelParams for cfg; shapes are validated tensor by tensor."""
    from .model import LayerParams  # local import avoids cycle at module load

    with open(os.path.join(path, MANIFEST_NAME)) as fh:
        manifest = json.load(fh)
    raw = open(os.path.join(path, PAYLOAD_NAME), "rb").read()
    rng = np.random.default_rng(0)
    params = ModelParams(
        embedding=T.zeros((cfg.vocab_size, cfg.hidden_size)),
        layers=[LayerParams.init(cfg, rng) for _ in range(cfg.num_layers)],
    )
    named = params.named_parameters()
    if set(named) != set(manifest["tensors"]):
        missing = set(named) ^ set(manifest["tensors"])
        raise ValueError(f"checkpoint/config tensor sets differ: {sorted(missing)}")
    for name, meta in manifest["tensors"].items():
        expect = named[name].data.shape
        if tuple(meta["shape"]) != expect:
            raise ValueError(
                f"shape mismatch for {name!r}: checkpoint {meta['shape']}, "
                f"config expects {list(expect)}")
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        arr = np.frombuffer(raw, dtype=meta["dtype"], count=count,
                            offset=meta["offset"]).reshape(meta["shape"])
        named[name].data = arr.astype(np.float64).copy()
    return params
