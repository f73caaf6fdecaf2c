"""Dialogue-level cross-validation folds."""

from __future__ import annotations

import numpy as np


def make_folds(corpus, k, seed):
    """Shuffle dialogues with ``seed`` and cut k near-equal partitions.

    Returns a list of (train, test) dialogue lists where fold i serves as
    the test set.  Splitting never crosses dialogue boundaries, and fold
    sizes differ by at most one.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(corpus) < k:
        raise ValueError(f"corpus of {len(corpus)} dialogues cannot make {k} folds")
    order = np.random.default_rng(seed).permutation(len(corpus))
    chunks = np.array_split(order, k)
    folds = []
    for i in range(k):
        test_idx = set(chunks[i].tolist())
        test = [corpus[j] for j in chunks[i]]
        train = [corpus[j] for j in order if j not in test_idx]
        folds.append((train, test))
    return folds


def carve_validation(train, fraction, seed):
    """Split a training set into (train, validation) by dialogue."""
    if fraction <= 0:
        return list(train), []
    n_val = int(round(len(train) * fraction))
    if n_val == 0:
        return list(train), []
    order = np.random.default_rng(seed).permutation(len(train))
    val_idx = set(order[:n_val].tolist())
    kept = [d for i, d in enumerate(train) if i not in val_idx]
    held = [d for i, d in enumerate(train) if i in val_idx]
    return kept, held
