"""Desk-scale sequential recommender: dense selective GRU + linear
attention expert mixing with a gated MLP head, on a minimal f64 autodiff
substrate."""

from .tensor import Tensor, no_grad
from .model import ModelConfig, ModelParams, forward
from .training import TrainConfig, train, cross_entropy_loss
from .evaluation import MetricsReport, evaluate, metrics_at_k
from .data import InteractionDataset, ingest, leave_one_out_split, synth_cyclic

__version__ = "0.1.0"

__all__ = [
    "Tensor", "no_grad", "ModelConfig", "ModelParams", "forward",
    "TrainConfig", "train", "cross_entropy_loss", "MetricsReport",
    "evaluate", "metrics_at_k", "InteractionDataset", "ingest",
    "leave_one_out_split", "synth_cyclic", "__version__",
]
