"""Interaction-log ingestion, leave-one-out splitting, and batching.

Input format is TSV with columns user_id, item_id, timestamp (header row
optional: it is detected when the third column of the first row does not
parse as a number).  Item and user external ids are mapped to dense
indices in sorted-id order, so the mapping is invariant to row order;
index 0 is reserved for padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_SEQ_LEN = 3  # split needs train >= 1, valid 1, test 1


class IngestError(ValueError):
    pass


@dataclass
class Example:
    """One next-item prediction instance."""
    user: int
    items: list        # input window, dense indices, chronological
    target: int


@dataclass
class InteractionDataset:
    sequences: dict            # user dense index -> list of item indices
    item_to_index: dict        # external item id -> dense index (1-based)
    index_to_item: dict
    user_to_index: dict
    num_dropped_users: int = 0

    @property
    def num_users(self):
        return len(self.sequences)

    @property
    def num_items(self):
        return len(self.item_to_index)

    @property
    def num_interactions(self):
        return sum(len(s) for s in self.sequences.values())

    def stats(self):
        users, items, inter = self.num_users, self.num_items, self.num_interactions
        return {
            "num_users": users,
            "num_items": items,
            "num_interactions": inter,
            "avg_length": inter / users if users else 0.0,
            "sparsity": 1.0 - inter / (users * items) if users and items else 0.0,
            "num_dropped_users": self.num_dropped_users,
        }


def _sort_key(external_id):
    """Numeric-aware ordering so '10' sorts after '2'."""
    try:
        return (0, float(external_id), str(external_id))
    except ValueError:
        return (1, 0.0, str(external_id))


def ingest(path):
    """Read a user/item/timestamp TSV into an InteractionDataset."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise IngestError(f"{path}:{lineno}: expected 3 tab-separated columns")
            user, item, ts = parts[0], parts[1], parts[2]
            try:
                ts_val = float(ts)
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise IngestError(f"{path}:{lineno}: bad timestamp {ts!r}") from None
            rows.append((user, item, ts_val, lineno))
    if not rows:
        raise IngestError(f"{path}: no interaction rows")
    return _build_dataset(rows)


def _build_dataset(rows):
    # canonical order: per-user timestamp sort, stable in input order
    by_user = {}
    for user, item, ts, lineno in rows:
        by_user.setdefault(user, []).append((ts, lineno, item))
    dropped = 0
    kept = {}
    for user, events in by_user.items():
        events.sort(key=lambda e: (e[0], e[1]))
        if len(events) < MIN_SEQ_LEN:
            dropped += 1
            continue
        kept[user] = [item for _, _, item in events]
    if not kept:
        raise IngestError("no users with enough interactions")
    item_ids = sorted({item for seq in kept.values() for item in seq}, key=_sort_key)
    item_to_index = {item: i + 1 for i, item in enumerate(item_ids)}
    user_ids = sorted(kept, key=_sort_key)
    user_to_index = {u: i for i, u in enumerate(user_ids)}
    sequences = {
        user_to_index[u]: [item_to_index[item] for item in kept[u]]
        for u in user_ids
    }
    return InteractionDataset(
        sequences=sequences,
        item_to_index=item_to_index,
        index_to_item={i: item for item, i in item_to_index.items()},
        user_to_index=user_to_index,
        num_dropped_users=dropped,
    )


@dataclass
class SplitViews:
    train: list  # list[Example]
    valid: list
    test: list

    def manifest(self):
        return {
            "num_train": len(self.train),
            "num_valid": len(self.valid),
            "num_test": len(self.test),
        }


def leave_one_out_split(ds):
    """Per user [v1..vn]: test target vn, valid target v(n-1), and one
    training pair per prefix of [v1..v(n-2)], so the last train target is
    v(n-1).  Every user contributes at least one training pair.
    """
    train, valid, test = [], [], []
    for user, seq in sorted(ds.sequences.items()):
        n = len(seq)
        if n < MIN_SEQ_LEN:
            raise ValueError(f"user {user} has fewer than {MIN_SEQ_LEN} interactions")
        test.append(Example(user, seq[:-1], seq[-1]))
        valid.append(Example(user, seq[:-2], seq[-2]))
        for t in range(1, n - 1):
            train.append(Example(user, seq[:t], seq[t]))
    return SplitViews(train, valid, test)


@dataclass
class Batch:
    items: np.ndarray    # [B, N] int64, left-padded with 0
    lengths: np.ndarray  # [B]
    targets: np.ndarray  # [B]
    users: np.ndarray    # [B]


def pad_window(items, n_max):
    """Keep the most recent n_max items, left-pad with 0 to length n_max."""
    window = items[-n_max:]
    return [0] * (n_max - len(window)) + list(window)


def make_batches(view, n_max, batch_size, shuffle_seed=None):
    """Yield Batch objects covering the view exactly once per epoch."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    order = np.arange(len(view))
    if shuffle_seed is not None:
        np.random.default_rng(shuffle_seed).shuffle(order)
    for start in range(0, len(view), batch_size):
        chunk = [view[i] for i in order[start:start + batch_size]]
        yield Batch(
            items=np.array([pad_window(ex.items, n_max) for ex in chunk],
                           dtype=np.int64),
            lengths=np.array([min(len(ex.items), n_max) for ex in chunk],
                             dtype=np.int64),
            targets=np.array([ex.target for ex in chunk], dtype=np.int64),
            users=np.array([ex.user for ex in chunk], dtype=np.int64),
        )


def synth_cyclic(num_items, num_users, seq_len, seed=0):
    """Deterministic successor fixture: v(t+1) = (v_t mod num_items) + 1.

    A model must learn the cycle to predict; Bayes-optimal Recall@1 is 1.
    """
    if num_items < 2:
        raise ValueError("num_items must be >= 2")
    rng = np.random.default_rng(seed)
    sequences = {}
    for u in range(num_users):
        v = int(rng.integers(1, num_items + 1))
        seq = [v]
        for _ in range(seq_len - 1):
            v = (v % num_items) + 1
            seq.append(v)
        sequences[u] = seq
    items = {str(i): i for i in range(1, num_items + 1)}
    return InteractionDataset(
        sequences=sequences,
        item_to_index=items,
        index_to_item={i: s for s, i in items.items()},
        user_to_index={str(u): u for u in range(num_users)},
    )


def write_tsv(ds, path):
    """Dump a dataset back to the ingestion TSV format (header included)."""
    with open(path, "w") as fh:
        fh.write("user_id\titem_id\ttimestamp\n")
        for user in sorted(ds.sequences):
            for t, item in enumerate(ds.sequences[user]):
                fh.write(f"u{user}\t{ds.index_to_item[item]}\t{t}\n")
