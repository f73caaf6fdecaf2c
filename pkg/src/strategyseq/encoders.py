"""Context encoders over utterance feature sequences.

The same encoder abstraction serves three places: the whole-conversation
pass, and one pass per speaker over that speaker's subsequence of the
conversation output.  Each speaker encoder owns its own parameters.

Kinds:

* ``transformer`` — a stack of self-attention blocks, each multi-head
  attention followed by a position-wise FFN, with optional residual
  connections + layer norm around both sub-layers and optional sinusoidal
  position signal added at the input.
* ``lstm`` / ``bilstm`` — stacked (bi)directional recurrences.
* ``none`` — a single affine projection, useful as an identity baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    LSTM,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    PositionWiseFFN,
    Tensor,
    sinusoidal_positions,
)
from .autodiff import ops

ENCODER_KINDS = ("transformer", "lstm", "bilstm", "none")


@dataclass
class EncoderConfig:
    kind: str = "transformer"
    layers: int = 2
    heads: int = 2
    hidden: int = 1024
    dropout: float = 0.1
    use_positional: bool = True
    use_residual_norm: bool = True
    ffn_hidden: int | None = None

    def validate(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.layers < 1:
            raise ValueError("encoder needs at least one layer")
        if self.kind == "transformer" and self.hidden % self.heads != 0:
            raise ValueError(
                f"hidden={self.hidden} not divisible by heads={self.heads}"
            )
        if self.kind == "bilstm" and self.hidden % 2 != 0:
            raise ValueError("bilstm needs an even hidden size")
        return self


@dataclass
class ContextOutput:
    """All context representations for one dialogue."""

    inter: Tensor                      # (T, d)
    er_specific: Tensor | None         # (T_er, d)
    ee_specific: Tensor | None         # (T_ee, d)
    merged: Tensor                     # (T, 2d) or (T, d) without speaker encoders
    er_positions: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.intp))
    ee_positions: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.intp))


class TransformerBlock(Module):
    def __init__(self, cfg, rng):
        self.attn = MultiHeadAttention(cfg.hidden, cfg.heads, rng, dropout=cfg.dropout)
        self.ffn = PositionWiseFFN(cfg.hidden, cfg.ffn_hidden or cfg.hidden, rng)
        self.use_residual_norm = cfg.use_residual_norm
        self.dropout = cfg.dropout
        if cfg.use_residual_norm:
            self.norm1 = LayerNorm(cfg.hidden)
            self.norm2 = LayerNorm(cfg.hidden)

    def __call__(self, x, *, training=False, rng=None):
        attn_out = self.attn(x, training=training, rng=rng)
        x = self.norm1(x + attn_out) if self.use_residual_norm else attn_out
        ffn_out = ops.dropout(self.ffn(x), self.dropout, rng, training)
        x = self.norm2(x + ffn_out) if self.use_residual_norm else ffn_out
        return x


class ContextEncoder(Module):
    """Maps a (T, input_dim) sequence to (T, hidden) context rows."""

    def __init__(self, input_dim, cfg: EncoderConfig, rng):
        cfg.validate()
        self.cfg = cfg
        self.input_dim = input_dim
        if cfg.kind == "transformer":
            self.proj = Linear(input_dim, cfg.hidden, rng)
            self.blocks = [TransformerBlock(cfg, rng) for _ in range(cfg.layers)]
        elif cfg.kind in ("lstm", "bilstm"):
            bidi = cfg.kind == "bilstm"
            width = cfg.hidden // 2 if bidi else cfg.hidden
            dims = [input_dim] + [cfg.hidden] * (cfg.layers - 1)
            self.blocks = [LSTM(d, width, rng, bidirectional=bidi) for d in dims]
        else:  # none
            self.proj = Linear(input_dim, cfg.hidden, rng)

    def __call__(self, x, *, training=False, rng=None):
        if x.shape[0] < 1:
            raise ValueError("encoder input must have at least one row")
        cfg = self.cfg
        if cfg.kind == "transformer":
            h = self.proj(x)
            if cfg.use_positional:
                h = h + Tensor(sinusoidal_positions(h.shape[0], cfg.hidden))
            for block in self.blocks:
                h = block(h, training=training, rng=rng)
            return h
        if cfg.kind in ("lstm", "bilstm"):
            rows = [ops.gather_rows(x, [t]) for t in range(x.shape[0])]
            for block in self.blocks:
                rows = block(rows)
            return ops.concat_rows(rows)
        return self.proj(x)


def split_positions(roles):
    """Positions of each role in the dialogue, as index arrays."""
    roles = np.asarray(roles)
    er = np.flatnonzero(roles == 0)
    ee = np.flatnonzero(roles == 1)
    return er, ee


def encode_speaker_specific(inter_out, roles, er_encoder, ee_encoder, *,
                            training=False, rng=None):
    """Run each speaker's subsequence of the conversation output through
    that speaker's own encoder.  Empty subsequences yield ``None``."""
    er_pos, ee_pos = split_positions(roles)
    er_out = ee_out = None
    if len(er_pos):
        er_out = er_encoder(ops.gather_rows(inter_out, er_pos), training=training, rng=rng)
    if len(ee_pos):
        ee_out = ee_encoder(ops.gather_rows(inter_out, ee_pos), training=training, rng=rng)
    return er_out, ee_out, er_pos, ee_pos


def build_merged(inter_out, er_out, ee_out, er_pos, ee_pos):
    """Per-role concatenation [speaker-specific ; inter], restored to
    original dialogue order.  Row t is (2d,) wide."""
    blocks = []
    if er_out is not None:
        blocks.append((ops.concat_cols([er_out, ops.gather_rows(inter_out, er_pos)]), er_pos))
    if ee_out is not None:
        blocks.append((ops.concat_cols([ee_out, ops.gather_rows(inter_out, ee_pos)]), ee_pos))
    if len(blocks) == 1:
        block, pos = blocks[0]
        order = np.argsort(pos)
        return ops.gather_rows(block, order)
    (a, pa), (b, pb) = blocks
    return ops.interleave_rows(a, pa, b, pb)
