"""Full-catalog ranking metrics and the leave-one-out evaluation driver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import make_batches
from .model import forward


@dataclass
class MetricsReport:
    k: int
    recall_at_k: float
    mrr_at_k: float
    ndcg_at_k: float
    num_examples: int

    def to_dict(self):
        return {
            "k": self.k,
            f"recall@{self.k}": self.recall_at_k,
            f"mrr@{self.k}": self.mrr_at_k,
            f"ndcg@{self.k}": self.ndcg_at_k,
            "num_examples": self.num_examples,
        }


def rank_of_target(scores, target, exclude=()):
    """1-based rank of target by descending score over non-excluded items.

    Ties break by ascending item index, so ranking is deterministic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    exclude = set(exclude)
    if target in exclude:
        raise ValueError("target is excluded from ranking")
    s_t = scores[target]
    rank = 1
    for j in range(scores.shape[0]):
        if j == target or j in exclude:
            continue
        if scores[j] > s_t or (scores[j] == s_t and j < target):
            rank += 1
    return rank


def _ranks_batch(scores, targets, exclude_masks):
    """Vectorized rank_of_target over a [B, V] score matrix."""
    b = scores.shape[0]
    ranks = np.empty(b, dtype=np.int64)
    cols = np.arange(scores.shape[1])
    for i in range(b):
        t = targets[i]
        s = scores[i]
        keep = ~exclude_masks[i]
        keep[t] = False  # the target itself is not its own competitor
        better = (s[keep] > s[t]).sum() + ((s[keep] == s[t]) & (cols[keep] < t)).sum()
        ranks[i] = 1 + better
    return ranks


def metrics_at_k(ranks, k):
    """Single-relevant-item Recall/MRR/NDCG at cutoff k (IDCG = 1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = np.asarray(ranks, dtype=np.int64)
    if np.any(ranks < 1):
        raise ValueError("ranks are 1-based")
    hit = ranks <= k
    recall = hit.mean()
    mrr = np.where(hit, 1.0 / ranks, 0.0).mean()
    ndcg = np.where(hit, 1.0 / np.log2(ranks + 1.0), 0.0).mean()
    return MetricsReport(
        k=k,
        recall_at_k=float(recall),
        mrr_at_k=float(mrr),
        ndcg_at_k=float(ndcg),
        num_examples=int(ranks.shape[0]),
    )


def evaluate(params, cfg, view, k=10, batch_size=256, exclude_seen=True,
             rank_dump=None):
    """Rank the held-out target for every example in the view.

    The padding item is always excluded; items already inside the input
    window are excluded as well unless exclude_seen=False.  rank_dump, if
    given, is a path that receives one (user, target, rank) TSV row per
    example for debugging.
    """
    if not view:
        raise ValueError("empty evaluation view")
    ranks = []
    dump_rows = []
    for batch in make_batches(view, cfg.max_seq_len, batch_size):
        with T.no_grad():
            logits = forward(batch.items, batch.lengths, params, cfg,
                             training=False)
        scores = logits.data
        masks = np.zeros(scores.shape, dtype=bool)
        masks[:, 0] = True  # padding item never ranked
        if exclude_seen:
            for i in range(scores.shape[0]):
                masks[i, batch.items[i]] = True
                masks[i, 0] = True
                masks[i, batch.targets[i]] = False
        batch_ranks = _ranks_batch(scores, batch.targets, masks)
        ranks.extend(batch_ranks.tolist())
        if rank_dump is not None:
            dump_rows.extend(zip(batch.users.tolist(),
                                 batch.targets.tolist(),
                                 batch_ranks.tolist()))
    if rank_dump is not None:
        with open(rank_dump, "w") as fh:
            fh.write("user\ttarget\trank\n")
            for user, target, rank in dump_rows:
                fh.write(f"{user}\t{target}\t{rank}\n")
    return metrics_at_k(ranks, k)
