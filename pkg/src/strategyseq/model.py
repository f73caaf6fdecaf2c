"""Model variants: encoder stacks wired to CRF or softmax heads.

Every variant shares the same skeleton: a whole-conversation encoder, an
optional pair of per-speaker encoders over that output, and a prediction
head on the merged representation.  Flags select the head family:

* ``ext_crf`` — the mixed-role chain CRF decodes the merged sequence
  (Viterbi at test time); per-speaker chain CRFs and the dialogue-outcome
  head contribute auxiliary losses.
* ``role_crf`` without ``ext_crf`` — per-speaker chain CRFs are auxiliary
  losses; predictions come from the per-role MLP softmax heads.
* neither — per-role MLP softmax heads only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Module
from .autodiff import ops
from .crf import ChainCRF, RolePairCRF
from .data.corpus import Role
from .encoders import ContextEncoder, ContextOutput, EncoderConfig, build_merged, \
    encode_speaker_specific, split_positions
from .heads import EmissionScorer, MlpHead, SuccessClassifier


@dataclass(frozen=True)
class VariantSpec:
    name: str
    inter_kind: str
    speaker_kind: str | None
    role_crf: bool
    ext_crf: bool
    success_head: bool


VARIANTS = {
    v.name: v
    for v in [
        VariantSpec("clstm", "lstm", None, False, False, False),
        VariantSpec("bclstm", "bilstm", None, False, False, False),
        VariantSpec("clstms", "lstm", "lstm", False, False, False),
        VariantSpec("clstms-crf", "lstm", "lstm", True, False, False),
        VariantSpec("clstms-extcrf", "lstm", "lstm", True, True, True),
        VariantSpec("transformers", "transformer", "transformer", False, False, False),
        VariantSpec("transformers-crf", "transformer", "transformer", True, False, False),
        VariantSpec("transformers-extcrf", "transformer", "transformer", True, True, True),
        VariantSpec("transformers-clstms-extcrf", "transformer", "lstm", True, True, True),
    ]
}

TABLE4_GRID = [
    "clstm", "bclstm", "clstms", "clstms-crf", "clstms-extcrf",
    "transformers", "transformers-crf", "transformers-extcrf",
    "transformers-clstms-extcrf",
]
TABLE5_GRID = [
    "clstm", "bclstm", "clstms", "clstms-crf", "clstms-extcrf",
    "transformers", "transformers-crf", "transformers-extcrf",
]


def get_variant(name):
    try:
        return VARIANTS[name]
    except KeyError:
        known = ", ".join(sorted(VARIANTS))
        raise ValueError(f"unknown variant {name!r}; known variants: {known}") from None


def default_layers(kind):
    return 2 if kind == "transformer" else 1


def default_learning_rate(variant):
    return 1e-5 if get_variant(variant).inter_kind == "transformer" else 1e-4


@dataclass
class Instance:
    """One dialogue as numbers: features, role ids, gold labels, outcome."""

    dialogue_id: str
    features: np.ndarray          # (T, dim)
    roles: np.ndarray             # (T,) 0 = persuader, 1 = persuadee
    labels: list | None = None    # per-position ids in that role's vocabulary
    success: bool | None = None

    def __len__(self):
        return len(self.roles)


def instances_from_corpus(corpus, store):
    instances = []
    for d in corpus:
        instances.append(
            Instance(
                dialogue_id=d.id,
                features=np.asarray(store.get(d.id)),
                roles=np.array([u.role.index for u in d.utterances], dtype=np.int8),
                labels=[u.label_id for u in d.utterances],
                success=d.success,
            )
        )
    return instances


class StrategyModel(Module):
    def __init__(self, variant, feat_dim, n_er, n_ee, *, hidden=64, heads=2,
                 layers=None, dropout=0.1, use_positional=True,
                 use_residual_norm=True, mlp_hidden=None, seed=0):
        if isinstance(variant, str):
            variant = get_variant(variant)
        self.variant = variant
        self.feat_dim = feat_dim
        self.n_er = n_er
        self.n_ee = n_ee
        self.hidden = hidden
        self._layers = layers
        self._mlp_hidden = mlp_hidden
        rng = np.random.default_rng(seed)

        def cfg_for(kind):
            return EncoderConfig(
                kind=kind,
                layers=layers if layers is not None else default_layers(kind),
                heads=heads,
                hidden=hidden,
                dropout=dropout,
                use_positional=use_positional,
                use_residual_norm=use_residual_norm,
            )

        self.inter = ContextEncoder(feat_dim, cfg_for(variant.inter_kind), rng)
        if variant.speaker_kind is not None:
            self.spk_er = ContextEncoder(hidden, cfg_for(variant.speaker_kind), rng)
            self.spk_ee = ContextEncoder(hidden, cfg_for(variant.speaker_kind), rng)
            self.merged_dim = 2 * hidden
        else:
            self.spk_er = self.spk_ee = None
            self.merged_dim = hidden

        if variant.ext_crf:
            self.emit_er = EmissionScorer(self.merged_dim, n_er, rng)
            self.emit_ee = EmissionScorer(self.merged_dim, n_ee, rng)
            self.crf = RolePairCRF(n_er, n_ee)
        else:
            width = mlp_hidden or hidden
            self.head_er = MlpHead(self.merged_dim, width, n_er, rng)
            self.head_ee = MlpHead(self.merged_dim, width, n_ee, rng)

        if variant.role_crf:
            self.role_emit_er = EmissionScorer(self.merged_dim, n_er, rng)
            self.role_emit_ee = EmissionScorer(self.merged_dim, n_ee, rng)
            self.role_crf_er = ChainCRF(n_er)
            self.role_crf_ee = ChainCRF(n_ee)

        if variant.success_head:
            self.success = SuccessClassifier(self.merged_dim, hidden, rng)

    # ----- forward pieces -------------------------------------------------

    def context(self, inst, *, training=False, rng=None):
        x = ops.tensor(inst.features)
        inter_out = self.inter(x, training=training, rng=rng)
        if self.spk_er is None:
            er_pos, ee_pos = split_positions(inst.roles)
            return ContextOutput(inter=inter_out, er_specific=None, ee_specific=None,
                                 merged=inter_out, er_positions=er_pos,
                                 ee_positions=ee_pos)
        er_out, ee_out, er_pos, ee_pos = encode_speaker_specific(
            inter_out, inst.roles, self.spk_er, self.spk_ee,
            training=training, rng=rng,
        )
        merged = build_merged(inter_out, er_out, ee_out, er_pos, ee_pos)
        return ContextOutput(inter=inter_out, er_specific=er_out, ee_specific=ee_out,
                             merged=merged, er_positions=er_pos, ee_positions=ee_pos)

    def _mixed_emissions(self, ctx):
        """Per-position emission rows over each position's role vocabulary."""
        er_scores = self.emit_er(ops.gather_rows(ctx.merged, ctx.er_positions)) \
            if len(ctx.er_positions) else None
        ee_scores = self.emit_ee(ops.gather_rows(ctx.merged, ctx.ee_positions)) \
            if len(ctx.ee_positions) else None
        t = len(ctx.er_positions) + len(ctx.ee_positions)
        rows = [None] * t
        for k, pos in enumerate(ctx.er_positions):
            rows[pos] = ops.gather_rows(er_scores, [k])
        for k, pos in enumerate(ctx.ee_positions):
            rows[pos] = ops.gather_rows(ee_scores, [k])
        return rows

    # ----- losses ----------------------------------------------------------

    def loss_terms(self, inst, *, training=True, rng=None):
        """Unnormalized loss terms for one dialogue, keyed m/r/e/succ."""
        ctx = self.context(inst, training=training, rng=rng)
        labels = inst.labels
        terms = {}
        if self.variant.ext_crf:
            emissions = self._mixed_emissions(ctx)
            terms["m"] = self.crf.nll(emissions, inst.roles.tolist(), labels)
        else:
            gathered = []
            for role_value, head, pos in (
                (0, self.head_er, ctx.er_positions),
                (1, self.head_ee, ctx.ee_positions),
            ):
                if not len(pos):
                    continue
                role_labels = [labels[p] for p in pos]
                gathered.append(head.loss(ops.gather_rows(ctx.merged, pos), role_labels))
            terms["m"] = gathered[0] if len(gathered) == 1 else gathered[0] + gathered[1]
        if self.variant.role_crf:
            for key, pos, scorer, chain in (
                ("r", ctx.er_positions, self.role_emit_er, self.role_crf_er),
                ("e", ctx.ee_positions, self.role_emit_ee, self.role_crf_ee),
            ):
                if not len(pos):
                    continue
                scores = scorer(ops.gather_rows(ctx.merged, pos))
                rows = [ops.gather_rows(scores, [k]) for k in range(len(pos))]
                role_labels = [labels[p] for p in pos]
                roles = [int(inst.roles[pos[0]])] * len(pos)
                terms[key] = chain.nll(rows, roles, role_labels)
        if self.variant.success_head and inst.success is not None:
            terms["succ"] = self.success.loss(ctx.merged, inst.success)
        return terms

    # ----- inference --------------------------------------------------------

    def predict(self, inst):
        """Per-position label ids; Viterbi for CRF variants, else argmax."""
        ctx = self.context(inst, training=False)
        if self.variant.ext_crf:
            emissions = self._mixed_emissions(ctx)
            return self.crf.decode(emissions, inst.roles.tolist())
        out = [None] * len(inst)
        for head, pos in ((self.head_er, ctx.er_positions),
                          (self.head_ee, ctx.ee_positions)):
            if not len(pos):
                continue
            preds = head.predict(ops.gather_rows(ctx.merged, pos))
            for k, p in enumerate(pos):
                out[p] = preds[k]
        return out

    def predict_success(self, inst):
        if not self.variant.success_head:
            raise ValueError(f"variant {self.variant.name!r} has no outcome head")
        ctx = self.context(inst, training=False)
        return self.success.probability(ctx.merged)

    def config_dict(self):
        """Everything needed to rebuild an identically shaped model."""
        return {
            "variant": self.variant.name,
            "feat_dim": self.feat_dim,
            "n_er": self.n_er,
            "n_ee": self.n_ee,
            "hidden": self.hidden,
            "heads": self.inter.cfg.heads,
            "layers": self._layers,
            "dropout": self.inter.cfg.dropout,
            "use_positional": self.inter.cfg.use_positional,
            "use_residual_norm": self.inter.cfg.use_residual_norm,
            "mlp_hidden": self._mlp_hidden,
        }

    @classmethod
    def from_config(cls, config, seed=0):
        config = dict(config)
        variant = config.pop("variant")
        feat_dim = config.pop("feat_dim")
        n_er = config.pop("n_er")
        n_ee = config.pop("n_ee")
        return cls(variant, feat_dim, n_er, n_ee, seed=seed, **config)


ROLE_OF_INDEX = {0: Role.ER, 1: Role.EE}
