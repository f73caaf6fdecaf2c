"""Classification heads: emission scorers, MLP softmax heads, success head."""

from __future__ import annotations

import numpy as np

from .autodiff import Linear, Module, Tensor, glorot_uniform
from .autodiff import ops


def cross_entropy_sum(logits, labels):
    """Sum over rows of -log softmax(logits)[row, label]."""
    log_probs = ops.log_softmax_rows(logits)
    loss = None
    for t, y in enumerate(labels):
        term = -ops.pick(log_probs, t, int(y))
        loss = term if loss is None else loss + term
    return loss


class EmissionScorer(Module):
    """Affine map from context rows to per-label feature scores."""

    def __init__(self, input_dim, n_labels, rng):
        self.lin = Linear(input_dim, n_labels, rng)
        self.n_labels = n_labels

    def __call__(self, ctx):
        return self.lin(ctx)


class MlpHead(Module):
    """Two affine layers with a ReLU between; softmax over labels."""

    def __init__(self, input_dim, hidden, n_labels, rng):
        self.lin1 = Linear(input_dim, hidden, rng)
        self.lin2 = Linear(hidden, n_labels, rng)
        self.n_labels = n_labels

    def logits(self, ctx):
        return self.lin2(ops.relu(self.lin1(ctx)))

    def probabilities(self, ctx):
        return ops.softmax_rows(self.logits(ctx))

    def loss(self, ctx, labels):
        return cross_entropy_sum(self.logits(ctx), labels)

    def predict(self, ctx):
        return self.logits(ctx).data.argmax(axis=1).tolist()


class SuccessClassifier(Module):
    """Dialogue-outcome head: self-attention, mean pool, two-layer MLP.

    Output is a distribution over {fail, success}; with all-zero weights
    the logits are symmetric and the success probability is exactly 0.5.
    """

    def __init__(self, input_dim, hidden, rng):
        self.wq = Tensor(glorot_uniform(rng, input_dim, input_dim), requires_grad=True)
        self.wk = Tensor(glorot_uniform(rng, input_dim, input_dim), requires_grad=True)
        self.wv = Tensor(glorot_uniform(rng, input_dim, input_dim), requires_grad=True)
        self.lin1 = Linear(input_dim, hidden, rng)
        self.lin2 = Linear(hidden, 2, rng)
        self.input_dim = input_dim

    def logits(self, ctx):
        scale = 1.0 / np.sqrt(self.input_dim)
        weights = ops.softmax_rows((ctx @ self.wq) @ (ctx @ self.wk).T * scale)
        attended = weights @ (ctx @ self.wv)
        pooled = ops.sum_axis(attended, 0) * (1.0 / ctx.shape[0])
        return self.lin2(ops.relu(self.lin1(pooled)))

    def probability(self, ctx):
        probs = ops.softmax_rows(self.logits(ctx))
        return float(probs.data[0, 1])

    def loss(self, ctx, success):
        return cross_entropy_sum(self.logits(ctx), [1 if success else 0])
