"""Parameterized layers built on the tape: projections, attention, FFN, LSTM.

Every layer keeps its weights in plain ``Tensor`` leaves and exposes them
through ``named_parameters`` so the optimizer and the snapshot container can
walk the whole model by name.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def glorot_uniform(rng, fan_in, fan_out):
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Minimal parameter container with recursive name walking."""

    def _local_params(self):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        for name, p in self._local_params():
            yield (f"{prefix}{name}", p)
        for name, child in self._children():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]


class Linear(Module):
    def __init__(self, d_in, d_out, rng, bias=True):
        self.weight = Tensor(glorot_uniform(rng, d_in, d_out), requires_grad=True)
        self.bias = Tensor(np.zeros((1, d_out)), requires_grad=True) if bias else None

    def __call__(self, x):
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out


def scaled_dot_attention(q, k, v):
    """softmax(q kᵀ / sqrt(d)) v over full row-wise attention."""
    d = q.shape[1]
    if k.shape != q.shape or v.shape != q.shape:
        raise T.ShapeError(
            f"attention expects matching shapes, got q={q.shape} k={k.shape} v={v.shape}"
        )
    logits = (q @ k.T) * (1.0 / np.sqrt(d))
    return T.softmax_rows(logits) @ v


class MultiHeadAttention(Module):
    """Per-head q/k/v projections, concatenated heads, output projection."""

    def __init__(self, d_model, heads, rng, dropout=0.0):
        if d_model % heads != 0:
            raise ValueError(f"d_model={d_model} not divisible by heads={heads}")
        self.heads = heads
        self.d_head = d_model // heads
        self.dropout = dropout
        self.wq = [Tensor(glorot_uniform(rng, d_model, self.d_head), requires_grad=True)
                   for _ in range(heads)]
        self.wk = [Tensor(glorot_uniform(rng, d_model, self.d_head), requires_grad=True)
                   for _ in range(heads)]
        self.wv = [Tensor(glorot_uniform(rng, d_model, self.d_head), requires_grad=True)
                   for _ in range(heads)]
        self.wo = Tensor(glorot_uniform(rng, d_model, d_model), requires_grad=True)

    def _local_params(self):
        yield "wo", self.wo
        for i in range(self.heads):
            yield f"wq.{i}", self.wq[i]
            yield f"wk.{i}", self.wk[i]
            yield f"wv.{i}", self.wv[i]

    def __call__(self, x, *, training=False, rng=None):
        scale = 1.0 / np.sqrt(self.d_head)
        outs = []
        for i in range(self.heads):
            q = x @ self.wq[i]
            k = x @ self.wk[i]
            v = x @ self.wv[i]
            weights = T.softmax_rows((q @ k.T) * scale)
            weights = T.dropout(weights, self.dropout, rng, training)
            outs.append(weights @ v)
        joined = outs[0] if len(outs) == 1 else T.concat_cols(outs)
        return joined @ self.wo


class PositionWiseFFN(Module):
    """max(0, x W1 + b1) W2 + b2 applied to every row."""

    def __init__(self, d_model, d_hidden, rng):
        self.lin1 = Linear(d_model, d_hidden, rng)
        self.lin2 = Linear(d_hidden, d_model, rng)

    def __call__(self, x):
        return self.lin2(T.relu(self.lin1(x)))


class LayerNorm(Module):
    def __init__(self, d, eps=1e-5):
        self.gain = Tensor(np.ones((1, d)), requires_grad=True)
        self.shift = Tensor(np.zeros((1, d)), requires_grad=True)
        self.eps = eps
        self.d = d

    def __call__(self, x):
        mu = T.sum_axis(x, 1) * (1.0 / self.d)
        centered = x - mu
        var = T.sum_axis(centered * centered, 1) * (1.0 / self.d)
        inv = T.pow_const(var + self.eps, -0.5)
        return centered * inv * self.gain + self.shift


def sinusoidal_positions(length, d):
    """Fixed position signal: sin on even columns, cos on odd ones."""
    pos = np.arange(length)[:, None].astype(np.float64)
    dims = np.arange(d)[None, :]
    angles = pos / np.power(10000.0, (2 * (dims // 2)) / d)
    enc = np.where(dims % 2 == 0, np.sin(angles), np.cos(angles))
    return enc


class LSTMCell(Module):
    """Single-direction LSTM over a list of (1, d) rows.

    Gate block order is input, forget, cell, output; the forget-gate bias
    starts at 1 so early training does not wipe the cell state.
    """

    def __init__(self, d_in, hidden, rng):
        self.hidden = hidden
        self.w_in = Tensor(glorot_uniform(rng, d_in, 4 * hidden), requires_grad=True)
        self.w_rec = Tensor(glorot_uniform(rng, hidden, 4 * hidden), requires_grad=True)
        bias = np.zeros((1, 4 * hidden))
        bias[0, hidden:2 * hidden] = 1.0
        self.bias = Tensor(bias, requires_grad=True)

    def run(self, rows):
        h = T.zeros((1, self.hidden))
        c = T.zeros((1, self.hidden))
        n = self.hidden
        outputs = []
        for x in rows:
            z = x @ self.w_in + h @ self.w_rec + self.bias
            gate_in = T.sigmoid(T.slice_cols(z, 0, n))
            gate_forget = T.sigmoid(T.slice_cols(z, n, 2 * n))
            cell_new = T.tanh(T.slice_cols(z, 2 * n, 3 * n))
            gate_out = T.sigmoid(T.slice_cols(z, 3 * n, 4 * n))
            c = gate_forget * c + gate_in * cell_new
            h = gate_out * T.tanh(c)
            outputs.append(h)
        return outputs


class LSTM(Module):
    """Unidirectional or bidirectional recurrence over a row sequence."""

    def __init__(self, d_in, hidden, rng, bidirectional=False):
        self.bidirectional = bidirectional
        self.fwd = LSTMCell(d_in, hidden, rng)
        self.bwd = LSTMCell(d_in, hidden, rng) if bidirectional else None

    def __call__(self, rows):
        if len(rows) == 0:
            raise ValueError("lstm_sequence requires a nonempty sequence")
        out = self.fwd.run(rows)
        if self.bwd is None:
            return out
        rev = self.bwd.run(list(reversed(rows)))[::-1]
        return [T.concat_cols([f, b]) for f, b in zip(out, rev)]


def lstm_sequence(rows, cell, bidirectional_cell=None):
    """Functional form over prebuilt cells; see :class:`LSTM`."""
    if len(rows) == 0:
        raise ValueError("lstm_sequence requires a nonempty sequence")
    out = cell.run(rows)
    if bidirectional_cell is None:
        return out
    rev = bidirectional_cell.run(list(reversed(rows)))[::-1]
    return [T.concat_cols([f, b]) for f, b in zip(out, rev)]
