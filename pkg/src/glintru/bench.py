"""Efficiency harness: complexity-scaling sweeps, the ablation matrix, and
hyperparameter sweeps.  Timing uses wall-clock medians over warm repetitions.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as T
from .attention import AttentionParams, linear_attention, quadratic_softmax_attention
from .data import leave_one_out_split
from .evaluation import evaluate
from .layers import DenseGruParams
from .model import LayerParams, ModelConfig, expert_mixing_block, gated_mlp_block
from .tensor import Tensor
from .training import train

WARMUP_RUNS = 2
MIN_MEASURABLE = 1e-3  # seconds; below this the call is looped internally


@dataclass
class TimingRecord:
    component: str
    n: int
    d: int
    k: int
    batch_size: int
    median_time: float
    reps: int

    def to_dict(self):
        return asdict(self)


@dataclass
class AblationResult:
    variant: str
    metrics: dict
    timing: TimingRecord
    first_loss: float
    last_loss: float

    @property
    def loss_drop(self):
        return 1.0 - self.last_loss / self.first_loss


def _median_time(fn, reps):
    """Median wall time of fn() over reps warm runs (2 warmups discarded).

    Calls faster than the timer can resolve are looped internally and the
    per-call time reported.
    """
    inner = 1
    for _ in range(WARMUP_RUNS):
        fn()
    t0 = time.perf_counter()
    fn()
    probe = time.perf_counter() - t0
    if probe < MIN_MEASURABLE:
        inner = max(1, int(np.ceil(MIN_MEASURABLE / max(probe, 1e-9))))
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        times.append((time.perf_counter() - t0) / inner)
    return float(np.median(times)), reps


def _make_forward(component, n, d, k, batch_size, heads, rng):
    x = Tensor(rng.standard_normal((batch_size, n, d)))
    if component == "linear_attn":
        p = AttentionParams.init(d, heads, rng)
        return lambda: linear_attention(x, p)
    if component == "quadratic_attn":
        p = AttentionParams.init(d, heads, rng)
        return lambda: quadratic_softmax_attention(x, p)
    if component == "glint_layer":
        cfg = ModelConfig(vocab_size=2, hidden_size=d, kernel_size=k,
                          heads=heads, max_seq_len=n)
        layer = LayerParams.init(cfg, rng)
        return lambda: gated_mlp_block(expert_mixing_block(x, layer, cfg),
                                       layer, cfg)
    raise ValueError(f"unknown component {component!r}")


def scaling_sweep(component, n_list, d=32, k=3, reps=5, batch_size=8,
                  heads=2, seed=0):
    """Median forward time per sequence length; returns TimingRecords."""
    if len(n_list) < 3:
        raise ValueError("need at least 3 sequence lengths")
    if list(n_list) != sorted(n_list):
        raise ValueError("n_list must be ascending")
    rng = np.random.default_rng(seed)
    records = []
    for n in n_list:
        fn = _make_forward(component, n, d, k, batch_size, heads, rng)
        with T.no_grad():
            med, used = _median_time(fn, reps)
        records.append(TimingRecord(component, n, d, k, batch_size, med, used))
    return records


def interleaved_medians(fns, reps=9, stat="median"):
    """Wall time per labelled callable, measured round-robin.

    Interleaving the candidates inside each round makes slow machine-load
    drift hit every candidate equally, which matters when comparing times
    that differ by far less than the drift.  stat="min" gives the classic
    noise-robust cost estimate (load only ever inflates a measurement).
    """
    reducer = np.min if stat == "min" else np.median
    with T.no_grad():
        for fn in fns.values():
            for _ in range(WARMUP_RUNS):
                fn()
        times = {label: [] for label in fns}
        for _ in range(reps):
            for label, fn in fns.items():
                t0 = time.perf_counter()
                fn()
                times[label].append(time.perf_counter() - t0)
    return {label: float(reducer(v)) for label, v in times.items()}


def kernel_size_times(k_list, n=256, d=32, batch_size=8, heads=2, reps=15,
                      seed=0):
    """Best full-layer forward time for each kernel size, interleaved."""
    rng = np.random.default_rng(seed)
    fns = {k: _make_forward("glint_layer", n, d, k, batch_size, heads, rng)
           for k in k_list}
    return interleaved_medians(fns, reps=reps, stat="min")


def loglog_slope(records):
    """Least-squares slope of log(time) against log(N)."""
    n = np.log([r.n for r in records])
    t = np.log([r.median_time for r in records])
    return float(np.polyfit(n, t, 1)[0])


def _time_model_forward(params, cfg, view, batch_size, reps):
    from .data import make_batches
    from .model import forward

    batch = next(make_batches(view, cfg.max_seq_len, batch_size))

    def fn():
        forward(batch.items, batch.lengths, params, cfg, training=False)

    with T.no_grad():
        med, used = _median_time(fn, reps)
    return TimingRecord("model_forward", cfg.max_seq_len, cfg.hidden_size,
                        cfg.kernel_size, len(batch.targets), med, used)


def ablation_run(dataset, base_cfg, train_cfg, k=10, reps=5, timing_batch=64,
                 quiet=True):
    """Train and evaluate the five component variants with identical seeds."""
    from .model import ABLATION_VARIANTS

    views = leave_one_out_split(dataset)
    results = []
    for variant in ABLATION_VARIANTS:
        cfg = base_cfg.with_variant(variant)
        params, log = train(cfg, train_cfg, views=views, quiet=quiet)
        metrics = evaluate(params, cfg, views.test, k=k,
                           batch_size=train_cfg.eval_batch_size)
        timing = _time_model_forward(params, cfg, views.test,
                                     timing_batch, reps)
        results.append(AblationResult(
            variant=variant,
            metrics=metrics.to_dict(),
            timing=timing,
            first_loss=log.epochs[0].train_loss,
            last_loss=log.epochs[-1].train_loss,
        ))
    return results


SWEEP_AXES = {"k": "kernel_size", "d": "hidden_size", "L": "num_layers"}


def param_sweep(axis, values, dataset, base_cfg, train_cfg, k=10, quiet=True):
    """Train/evaluate over a grid of one architecture hyperparameter."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {sorted(SWEEP_AXES)}")
    field_name = SWEEP_AXES[axis]
    views = leave_one_out_split(dataset)
    rows = []
    for value in values:
        d = base_cfg.to_dict()
        d[field_name] = value
        cfg = ModelConfig(**d)
        t0 = time.perf_counter()
        params, log = train(cfg, train_cfg, views=views, quiet=quiet)
        train_time = time.perf_counter() - t0
        metrics = evaluate(params, cfg, views.test, k=k,
                           batch_size=train_cfg.eval_batch_size)
        row = {"axis": axis, "value": value, "train_time": train_time,
               "epochs": len(log.epochs)}
        row.update(metrics.to_dict())
        rows.append(row)
    return rows


def write_csv(rows, path):
    """One row per record; dicts or TimingRecords both accepted."""
    dicts = [r.to_dict() if hasattr(r, "to_dict") else dict(r) for r in rows]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(dicts[0].keys()))
        writer.writeheader()
        writer.writerows(dicts)
