"""Training loop, composite loss, cross-validation harness, grid runner.

The protocol: dialogues are shuffled and cut into k folds; each fold in
turn is the test set, a slice of the remaining dialogues is held out as
validation, and the model trains on the rest for a fixed number of epochs.
The whole k-fold pass repeats ``repeats`` times with shifted seeds; the
reported score is the mean over folds, then over repeats.  Runs whose loss
turns non-finite are dropped from the averages and counted explicitly.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Adam, Tape, backward
from .autodiff import ops
from .data.corpus import Role, bi_transform, bi_vocabulary
from .data.folds import carve_validation, make_folds
from .metrics import EvalReport, f1_from_confusion, f1_report
from .model import (
    Instance,
    StrategyModel,
    TABLE4_GRID,
    TABLE5_GRID,
    default_learning_rate,
    get_variant,
    instances_from_corpus,
)


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """Hyper-parameters; defaults follow the benchmark configuration.

    ``learning_rate`` and ``layers`` default per encoder family when left
    as None (1e-5 / 2 layers for transformer-based variants, 1e-4 / 1
    layer for the recurrent ones).
    """

    variant: str = "transformers-extcrf"
    learning_rate: float | None = None
    l2_weight: float = 1e-5
    dropout: float = 0.1
    epochs: int = 65
    batch_size: int = 16
    folds: int = 5
    repeats: int = 5
    seed: int = 0
    hidden: int = 1024
    heads: int = 2
    layers: int | None = None
    mlp_hidden: int | None = None
    val_fraction: float = 0.1
    use_positional: bool = True
    use_residual_norm: bool = True
    bi_scheme: bool = False
    deterministic: bool = False  # suppress wall-clock fields in reports

    def validate(self):
        get_variant(self.variant)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for name in ("l2_weight", "dropout", "batch_size", "hidden"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        return self

    def resolved_lr(self):
        return self.learning_rate if self.learning_rate is not None \
            else default_learning_rate(self.variant)

    def to_dict(self):
        return dict(vars(self))


def total_loss(model, batch, l2_weight, *, training=True, rng=None):
    """Composite objective over one batch of dialogues.

    Each active term (merged-sequence loss, the two per-speaker auxiliary
    losses, the outcome loss) is summed over the batch and divided by the
    batch's total utterance count; the squared-L2 penalty over all
    parameters is added once.
    """
    total_utts = sum(len(inst) for inst in batch)
    acc = None
    for inst in batch:
        terms = model.loss_terms(inst, training=training, rng=rng)
        for term in terms.values():
            acc = term if acc is None else acc + term
    loss = acc * (1.0 / total_utts)
    if l2_weight > 0:
        reg = None
        for p in model.parameters():
            sq = ops.total(p * p)
            reg = sq if reg is None else reg + sq
        loss = loss + l2_weight * reg
    return loss


class Trainer:
    """Epoch-level driver around one model instance."""

    def __init__(self, model, cfg: TrainConfig, seed=0):
        self.model = model
        self.cfg = cfg
        self.params = model.parameters()
        self.opt = Adam(self.params, lr=cfg.resolved_lr())
        self.rng = np.random.default_rng(seed)
        self.history = []

    def run_epoch(self, instances):
        order = self.rng.permutation(len(instances))
        bs = max(1, self.cfg.batch_size)
        epoch_loss = 0.0
        epoch_utts = 0
        for start in range(0, len(order), bs):
            batch = [instances[i] for i in order[start:start + bs]]
            with Tape():
                loss = total_loss(self.model, batch, self.cfg.l2_weight,
                                  training=True, rng=self.rng)
                value = loss.item()
                if not np.isfinite(value):
                    raise DivergenceError(
                        f"non-finite loss ({value}) in variant {self.cfg.variant}"
                    )
                backward(loss)
            for p in self.params:
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
            self.opt.step()
            self.opt.zero_grad()
            n = sum(len(inst) for inst in batch)
            epoch_loss += value * n
            epoch_utts += n
        mean = epoch_loss / max(1, epoch_utts)
        self.history.append(mean)
        return mean

    def fit(self, instances, epochs=None, verbose=False):
        for epoch in range(epochs or self.cfg.epochs):
            mean = self.run_epoch(instances)
            if verbose:
                print(f"    epoch {epoch + 1:3d}  loss {mean:.4f}", flush=True)
        return self


def evaluate_model(model, instances, er_vocab, ee_vocab):
    """Pool test predictions by role and score them; adds outcome accuracy
    when the variant carries the outcome head."""
    gold = {Role.ER: [], Role.EE: []}
    pred = {Role.ER: [], Role.EE: []}
    succ_hits, succ_total = 0, 0
    for inst in instances:
        decoded = model.predict(inst)
        for pos, role_idx in enumerate(inst.roles):
            role = Role.ER if role_idx == 0 else Role.EE
            gold[role].append(inst.labels[pos])
            pred[role].append(decoded[pos])
        if model.variant.success_head and inst.success is not None:
            succ_hits += int((model.predict_success(inst) >= 0.5) == inst.success)
            succ_total += 1
    report = EvalReport(
        er=f1_report(gold[Role.ER], pred[Role.ER], er_vocab),
        ee=f1_report(gold[Role.EE], pred[Role.EE], ee_vocab),
        success_accuracy=(succ_hits / succ_total) if succ_total else None,
    )
    return report


@dataclass
class FoldOutcome:
    repeat: int
    fold: int
    report: EvalReport | None
    diverged: bool = False
    train_seconds: float = 0.0


@dataclass
class VariantResult:
    variant: str
    config: TrainConfig
    outcomes: list
    er_vocab: object
    ee_vocab: object
    model: StrategyModel | None = None

    def _collect(self, getter):
        by_repeat = {}
        for o in self.outcomes:
            if o.diverged:
                continue
            by_repeat.setdefault(o.repeat, []).append(getter(o.report))
        return [float(np.mean(v)) for v in by_repeat.values()]

    def mean_metric(self, role, which="macro_f1"):
        per_repeat = self._collect(lambda rep: getattr(getattr(rep, role), which))
        return float(np.mean(per_repeat)) if per_repeat else float("nan")

    def std_metric(self, role, which="macro_f1"):
        per_repeat = self._collect(lambda rep: getattr(getattr(rep, role), which))
        return float(np.std(per_repeat)) if per_repeat else float("nan")

    @property
    def divergent_runs(self):
        return sum(1 for o in self.outcomes if o.diverged)

    def pooled_confusion(self, role):
        mats = [getattr(o.report, role).confusion for o in self.outcomes if not o.diverged]
        return np.sum(mats, axis=0) if mats else None

    def summary(self):
        return {
            "variant": self.variant,
            "er_macro_f1": self.mean_metric("er", "macro_f1"),
            "er_weighted_f1": self.mean_metric("er", "weighted_f1"),
            "ee_macro_f1": self.mean_metric("ee", "macro_f1"),
            "ee_weighted_f1": self.mean_metric("ee", "weighted_f1"),
            "er_macro_f1_std": self.std_metric("er", "macro_f1"),
            "ee_macro_f1_std": self.std_metric("ee", "macro_f1"),
            "divergent_runs": self.divergent_runs,
        }

    def to_dict(self):
        out = self.summary()
        out["config"] = self.config.to_dict()
        out["folds"] = [
            {
                "repeat": o.repeat,
                "fold": o.fold,
                "diverged": o.diverged,
                "train_seconds": o.train_seconds,
                "report": o.report.to_dict() if o.report else None,
            }
            for o in self.outcomes
        ]
        for role in ("er", "ee"):
            pooled = self.pooled_confusion(role)
            if pooled is not None:
                vocab = self.er_vocab if role == "er" else self.ee_vocab
                out[f"{role}_pooled"] = f1_from_confusion(pooled, vocab).to_dict()
        return out


def _worker_count():
    raw = os.environ.get("STRATEGYSEQ_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def prepare_bi(corpus, er_vocab, ee_vocab):
    er_bi, ee_bi = bi_vocabulary(er_vocab), bi_vocabulary(ee_vocab)
    rewritten = [bi_transform(d, er_vocab, ee_vocab)[0] for d in corpus]
    return rewritten, er_bi, ee_bi


def train_variant(cfg, corpus, er_vocab, ee_vocab, store, *, verbose=False):
    """Run the full repeated cross-validation protocol for one variant."""
    cfg.validate()
    if cfg.bi_scheme:
        corpus, er_vocab, ee_vocab = prepare_bi(corpus, er_vocab, ee_vocab)
    store.validate(corpus)
    feat_dim = store.dim
    n_er, n_ee = len(er_vocab), len(ee_vocab)

    jobs = []
    for r in range(cfg.repeats):
        seed_r = cfg.seed + r
        folds = make_folds(corpus, cfg.folds, seed_r)
        for f, (train, test) in enumerate(folds):
            jobs.append((r, f, seed_r, train, test))

    def run_job(job):
        r, f, seed_r, train, test = job
        model_seed = seed_r * 10007 + f
        kept, _val = carve_validation(train, cfg.val_fraction, model_seed)
        model = StrategyModel(
            cfg.variant, feat_dim, n_er, n_ee,
            hidden=cfg.hidden, heads=cfg.heads, layers=cfg.layers,
            dropout=cfg.dropout, use_positional=cfg.use_positional,
            use_residual_norm=cfg.use_residual_norm, mlp_hidden=cfg.mlp_hidden,
            seed=model_seed,
        )
        trainer = Trainer(model, cfg, seed=model_seed)
        start = time.monotonic()

        def elapsed():
            return 0.0 if cfg.deterministic else time.monotonic() - start

        try:
            trainer.fit(instances_from_corpus(kept, store), verbose=verbose)
        except DivergenceError:
            return FoldOutcome(repeat=r, fold=f, report=None, diverged=True,
                               train_seconds=elapsed()), None
        report = evaluate_model(model, instances_from_corpus(test, store),
                                er_vocab, ee_vocab)
        outcome = FoldOutcome(repeat=r, fold=f, report=report,
                              train_seconds=elapsed())
        if verbose:
            print(f"  [{cfg.variant}] repeat {r} fold {f}: "
                  f"ER macro {report.er.macro_f1:.3f}  EE macro {report.ee.macro_f1:.3f}",
                  flush=True)
        return outcome, model

    workers = _worker_count()
    results = []
    if workers == 1:
        results = [run_job(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_job, jobs))
    outcomes = [o for o, _ in results]
    last_model = next((m for _, m in reversed(results) if m is not None), None)
    return VariantResult(variant=cfg.variant, config=cfg, outcomes=outcomes,
                         er_vocab=er_vocab, ee_vocab=ee_vocab, model=last_model)


GRIDS = {"table4": TABLE4_GRID, "table5": TABLE5_GRID}


@dataclass
class GridResult:
    grid: str
    results: list = field(default_factory=list)

    def to_dict(self):
        return {
            "grid": self.grid,
            "rows": [r.summary() for r in self.results],
            "details": [r.to_dict() for r in self.results],
        }

    def format_table(self):
        """Aligned text table: one row per variant, ER/EE x W-Avg/Macro F1."""
        header = f"{'variant':<28} {'ER W-Avg':>9} {'ER Macro':>9} {'EE W-Avg':>9} {'EE Macro':>9}"
        lines = [header, "-" * len(header)]
        for r in self.results:
            s = r.summary()
            lines.append(
                f"{s['variant']:<28} "
                f"{100 * s['er_weighted_f1']:>9.1f} {100 * s['er_macro_f1']:>9.1f} "
                f"{100 * s['ee_weighted_f1']:>9.1f} {100 * s['ee_macro_f1']:>9.1f}"
            )
        return "\n".join(lines)


def run_grid(grid, base_cfg, corpus, er_vocab, ee_vocab, store, *, verbose=False):
    """Run every variant of a named grid (or explicit list) under one protocol."""
    if isinstance(grid, str):
        if grid not in GRIDS:
            raise ValueError(f"unknown grid {grid!r}; pick one of {sorted(GRIDS)}")
        names = GRIDS[grid]
        bi = grid == "table5"
        grid_name = grid
    else:
        names = list(grid)
        bi = base_cfg.bi_scheme
        grid_name = "custom"
    out = GridResult(grid=grid_name)
    for name in names:
        cfg = replace(base_cfg, variant=name, bi_scheme=bi)
        out.results.append(
            train_variant(cfg, corpus, er_vocab, ee_vocab, store, verbose=verbose)
        )
    return out


def report_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False)
