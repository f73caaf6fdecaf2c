"""Scikit-learn style estimator over the dialogue labeling models.

``X`` is a list of dialogues in numeric form: each entry is a pair
``(features, roles)`` where ``features`` is a (T, dim) float array and
``roles`` is a length-T sequence of ``"ER"``/``"EE"`` strings (or 0/1
ints).  ``y`` is a list of length-T sequences of label ids, each id
indexing that position's role vocabulary.  The estimator clones, grid
searches and pickles like any other sklearn estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .data.corpus import Role
from .metrics import f1_report
from .model import Instance, StrategyModel, get_variant
from .training import TrainConfig, Trainer


def _coerce_roles(roles):
    out = []
    for r in roles:
        if isinstance(r, (int, np.integer)):
            if r not in (0, 1):
                raise ValueError(f"role int must be 0 or 1, got {r}")
            out.append(int(r))
        else:
            out.append(Role(str(r)).index)
    return np.array(out, dtype=np.int8)


def check_dialogue_inputs(X, y=None, n_er=None, n_ee=None):
    """Validate (features, roles) pairs and optional label sequences.

    Returns instances plus the per-role label-space sizes (inferred from
    ``y`` when not given).
    """
    if len(X) == 0:
        raise ValueError("X must contain at least one dialogue")
    if y is not None and len(y) != len(X):
        raise ValueError(f"X and y differ in length: {len(X)} vs {len(y)}")
    dim = None
    instances = []
    for i, entry in enumerate(X):
        try:
            features, roles = entry
        except (TypeError, ValueError):
            raise ValueError(
                f"X[{i}] must be a (features, roles) pair"
            ) from None
        features = np.asarray(features, dtype=np.float32)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValueError(f"X[{i}]: features must be a nonempty (T, dim) matrix")
        if dim is None:
            dim = features.shape[1]
        elif features.shape[1] != dim:
            raise ValueError(
                f"X[{i}]: feature width {features.shape[1]} != {dim} seen earlier"
            )
        role_ids = _coerce_roles(roles)
        if len(role_ids) != features.shape[0]:
            raise ValueError(
                f"X[{i}]: {features.shape[0]} feature rows but {len(role_ids)} roles"
            )
        labels = None
        if y is not None:
            labels = [int(v) for v in y[i]]
            if len(labels) != features.shape[0]:
                raise ValueError(
                    f"y[{i}] has {len(labels)} labels for {features.shape[0]} positions"
                )
        instances.append(
            Instance(dialogue_id=f"dlg-{i}", features=features, roles=role_ids,
                     labels=labels)
        )
    if y is not None:
        seen = {0: -1, 1: -1}
        for inst in instances:
            for pos, role in enumerate(inst.roles):
                seen[int(role)] = max(seen[int(role)], inst.labels[pos])
        n_er = n_er if n_er is not None else seen[0] + 1
        n_ee = n_ee if n_ee is not None else seen[1] + 1
        for inst in instances:
            for pos, role in enumerate(inst.roles):
                limit = n_er if role == 0 else n_ee
                if not 0 <= inst.labels[pos] < limit:
                    raise ValueError(
                        f"label {inst.labels[pos]} out of range for a "
                        f"{limit}-label role vocabulary"
                    )
    return instances, dim, n_er, n_ee


class _IdVocab:
    """Label ids standing in for names when scoring without a vocabulary."""

    def __init__(self, n):
        self.names = tuple(str(i) for i in range(n))

    def __len__(self):
        return len(self.names)


class StrategyLabeler(BaseEstimator):
    """Sequence labeler over two-role dialogues.

    Parameters mirror :class:`~strategyseq.training.TrainConfig`;
    ``n_er``/``n_ee`` fix the per-role label-space sizes (inferred from
    the training labels when omitted).
    """

    def __init__(self, variant="transformers-extcrf", hidden=32, heads=2,
                 layers=None, dropout=0.1, learning_rate=1e-3, l2_weight=0.0,
                 epochs=30, batch_size=16, seed=0, use_positional=True,
                 use_residual_norm=True, mlp_hidden=None, n_er=None, n_ee=None,
                 verbose=False):
        self.variant = variant
        self.hidden = hidden
        self.heads = heads
        self.layers = layers
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.l2_weight = l2_weight
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.use_positional = use_positional
        self.use_residual_norm = use_residual_norm
        self.mlp_hidden = mlp_hidden
        self.n_er = n_er
        self.n_ee = n_ee
        self.verbose = verbose

    def _config(self):
        return TrainConfig(
            variant=self.variant, learning_rate=self.learning_rate,
            l2_weight=self.l2_weight, dropout=self.dropout, epochs=self.epochs,
            batch_size=self.batch_size, seed=self.seed, hidden=self.hidden,
            heads=self.heads, layers=self.layers, mlp_hidden=self.mlp_hidden,
            use_positional=self.use_positional,
            use_residual_norm=self.use_residual_norm,
        ).validate()

    def fit(self, X, y, success=None):
        get_variant(self.variant)
        instances, dim, n_er, n_ee = check_dialogue_inputs(
            X, y, n_er=self.n_er, n_ee=self.n_ee
        )
        if success is not None:
            for inst, s in zip(instances, success):
                inst.success = bool(s)
        cfg = self._config()
        self.n_er_, self.n_ee_, self.feat_dim_ = n_er, n_ee, dim
        self.model_ = StrategyModel(
            self.variant, dim, n_er, n_ee, hidden=self.hidden, heads=self.heads,
            layers=self.layers, dropout=self.dropout,
            use_positional=self.use_positional,
            use_residual_norm=self.use_residual_norm, mlp_hidden=self.mlp_hidden,
            seed=self.seed,
        )
        self.trainer_ = Trainer(self.model_, cfg, seed=self.seed)
        self.trainer_.fit(instances, verbose=self.verbose)
        self.loss_history_ = list(self.trainer_.history)
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit first")

    def predict(self, X):
        self._require_fitted()
        instances, _, _, _ = check_dialogue_inputs(X)
        return [self.model_.predict(inst) for inst in instances]

    def score(self, X, y):
        """Mean of the two per-role macro F1 scores, pooled over dialogues."""
        self._require_fitted()
        preds = self.predict(X)
        gold = {0: [], 1: []}
        pred = {0: [], 1: []}
        for (features, roles), y_d, p_d in zip(X, y, preds):
            for role, g, p in zip(_coerce_roles(roles), y_d, p_d):
                gold[int(role)].append(int(g))
                pred[int(role)].append(int(p))
        scores = []
        for role, n in ((0, self.n_er_), (1, self.n_ee_)):
            if gold[role]:
                scores.append(f1_report(gold[role], pred[role], _IdVocab(n)).macro_f1)
        return float(np.mean(scores))
