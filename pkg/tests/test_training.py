"""Composite loss, trainer behavior, cross-validation protocol."""

import numpy as np
import pytest

import strategyseq as S
from strategyseq.autodiff import Tape, backward, precision
from strategyseq.model import instances_from_corpus
from strategyseq.training import DivergenceError, TrainConfig, Trainer, total_loss

from conftest import check_gradients


def tiny_setup(n=10, seed=3, dim=6, n_er=4, n_ee=5):
    corpus, er, ee = S.synthetic_corpus(n, seed=seed, n_er=n_er, n_ee=n_ee)
    store = S.synth_features(corpus, dim=dim, seed=seed + 1, sigma=0.1)
    return corpus, er, ee, store


def tiny_config(**kw):
    base = dict(variant="transformers-extcrf", learning_rate=1e-3, l2_weight=0.0,
                dropout=0.0, epochs=2, batch_size=4, folds=2, repeats=1, seed=0,
                hidden=8, heads=2, val_fraction=0.0, deterministic=True)
    base.update(kw)
    return TrainConfig(**base).validate()


class TestTotalLoss:
    def test_l2_term_strictly_increases_loss(self, rng):
        corpus, er, ee, store = tiny_setup()
        insts = instances_from_corpus(corpus, store)[:3]
        model = S.StrategyModel("clstms", store.dim, len(er), len(ee), hidden=8,
                                seed=0)
        plain = total_loss(model, insts, l2_weight=0.0, training=False).item()
        reg = total_loss(model, insts, l2_weight=1e-3, training=False).item()
        assert reg > plain

    def test_l2_zero_iff_all_parameters_zero(self, rng):
        corpus, er, ee, store = tiny_setup()
        insts = instances_from_corpus(corpus, store)[:2]
        model = S.StrategyModel("clstms", store.dim, len(er), len(ee), hidden=8,
                                seed=0)
        plain = total_loss(model, insts, l2_weight=0.0, training=False).item()
        reg = total_loss(model, insts, l2_weight=1.0, training=False).item()
        assert reg - plain > 0
        for p in model.parameters():
            p.data[:] = 0
        plain0 = total_loss(model, insts, l2_weight=0.0, training=False).item()
        reg0 = total_loss(model, insts, l2_weight=1.0, training=False).item()
        assert reg0 == pytest.approx(plain0)

    def test_near_perfect_model_drives_loss_to_zero(self):
        corpus, er, ee, store = tiny_setup(n=2, dim=6)
        insts = instances_from_corpus(corpus, store)[:1]
        model = S.StrategyModel("transformers", store.dim, len(er), len(ee),
                                hidden=8, seed=0)
        cfg = tiny_config(variant="transformers", epochs=1, learning_rate=5e-3)
        trainer = Trainer(model, cfg, seed=0)
        for _ in range(200):
            trainer.run_epoch(insts)
        assert trainer.history[-1] < 0.05

    def test_gradient_vs_finite_differences_end_to_end(self):
        with precision("float64"):
            corpus, er, ee, store = tiny_setup(n=2, dim=4, n_er=3, n_ee=3)
            insts = instances_from_corpus(corpus, store)[:1]
            model = S.StrategyModel("clstms-extcrf", store.dim, len(er), len(ee),
                                    hidden=4, heads=2, seed=0)
            check_gradients(
                lambda: total_loss(model, insts, l2_weight=1e-3, training=True),
                model.parameters(), tol=1e-3, eps=1e-5,
            )


class TestTrainer:
    def test_loss_decreases_on_separable_data(self):
        corpus, er, ee, store = tiny_setup(n=16, seed=7)
        insts = instances_from_corpus(corpus, store)
        model = S.StrategyModel("clstms", store.dim, len(er), len(ee), hidden=8,
                                seed=1)
        trainer = Trainer(model, tiny_config(variant="clstms", learning_rate=2e-3),
                          seed=1)
        for _ in range(10):
            trainer.run_epoch(insts)
        history = trainer.history
        smooth = [np.mean(history[i:i + 5]) for i in range(len(history) - 4)]
        assert all(b < a for a, b in zip(smooth, smooth[1:]))

    def test_divergence_error_on_nonfinite_loss(self):
        corpus, er, ee, store = tiny_setup(n=4)
        insts = instances_from_corpus(corpus, store)
        model = S.StrategyModel("clstms", store.dim, len(er), len(ee), hidden=8,
                                seed=0)
        model.parameters()[0].data[:] = np.nan
        trainer = Trainer(model, tiny_config(variant="clstms"), seed=0)
        with pytest.raises(DivergenceError, match="non-finite"):
            trainer.run_epoch(insts)


class TestTrainVariant:
    def test_smoke_produces_well_formed_report(self):
        corpus, er, ee, store = tiny_setup(n=10)
        result = S.train_variant(tiny_config(), corpus, er, ee, store)
        assert result.divergent_runs == 0
        assert len(result.outcomes) == 2  # 1 repeat x 2 folds
        summary = result.summary()
        for key in ("er_macro_f1", "ee_macro_f1", "er_weighted_f1",
                    "ee_weighted_f1"):
            assert 0.0 <= summary[key] <= 1.0
        d = result.to_dict()
        assert len(d["folds"]) == 2
        assert d["folds"][0]["report"]["er"]["per_label"]

    def test_fold_average_is_mean_of_fold_metrics(self):
        corpus, er, ee, store = tiny_setup(n=12)
        result = S.train_variant(tiny_config(), corpus, er, ee, store)
        per_fold = [o.report.er.macro_f1 for o in result.outcomes]
        assert result.mean_metric("er", "macro_f1") == pytest.approx(
            float(np.mean(per_fold)))

    def test_identical_seeds_identical_reports(self):
        corpus, er, ee, store = tiny_setup(n=10)
        a = S.train_variant(tiny_config(), corpus, er, ee, store).to_dict()
        b = S.train_variant(tiny_config(), corpus, er, ee, store).to_dict()
        assert a == b

    def test_divergent_run_excluded_and_counted(self):
        corpus, er, ee, store = tiny_setup(n=8)
        poisoned = S.FeatureStore(store.dim)
        for i, d in enumerate(corpus):
            matrix = store.get(d.id).copy()
            if i == 0:
                matrix[:] = np.nan
            poisoned.put(d.id, matrix)
        result = S.train_variant(tiny_config(variant="clstms"), corpus, er, ee,
                                 poisoned)
        assert result.divergent_runs == 1
        assert np.isfinite(result.mean_metric("er", "macro_f1"))

    def test_bi_scheme_doubles_label_space(self):
        corpus, er, ee, store = tiny_setup(n=10)
        result = S.train_variant(tiny_config(bi_scheme=True, variant="clstms"),
                                 corpus, er, ee, store)
        assert len(result.er_vocab) == 2 * len(er)
        assert all(n.startswith(("B-", "I-")) for n in result.er_vocab.names)


class TestDecodeConsistency:
    def test_zeroed_crf_decodes_like_plain_argmax(self):
        # a CRF whose transitions stay at zero must decode exactly like the
        # CRF-free family: per-position emission argmax
        corpus, er, ee, store = tiny_setup(n=6)
        insts = instances_from_corpus(corpus, store)
        model = S.StrategyModel("transformers-extcrf", store.dim, len(er),
                                len(ee), hidden=8, seed=4)
        for m in (model.crf.table.t00, model.crf.table.t01,
                  model.crf.table.t10, model.crf.table.t11):
            m.data[:] = 0
        for inst in insts:
            ctx = model.context(inst, training=False)
            emissions = model._mixed_emissions(ctx)
            argmax = [int(e.data.argmax()) for e in emissions]
            assert model.predict(inst) == argmax


class TestWorkerPool:
    def test_parallel_workers_match_single_worker(self, monkeypatch):
        corpus, er, ee, store = tiny_setup(n=10)
        monkeypatch.setenv("STRATEGYSEQ_THREADS", "1")
        serial = S.train_variant(tiny_config(), corpus, er, ee, store).to_dict()
        monkeypatch.setenv("STRATEGYSEQ_THREADS", "3")
        parallel = S.train_variant(tiny_config(), corpus, er, ee, store).to_dict()
        assert serial == parallel


class TestRunGrid:
    def test_two_variant_grid_emits_two_rows(self):
        corpus, er, ee, store = tiny_setup(n=10)
        grid = S.run_grid(["clstms", "transformers"], tiny_config(), corpus,
                          er, ee, store)
        table = grid.format_table()
        assert len(grid.results) == 2
        assert "clstms" in table and "transformers" in table
        d = grid.to_dict()
        assert len(d["rows"]) == 2
        assert {r["variant"] for r in d["rows"]} == {"clstms", "transformers"}

    def test_unknown_grid_rejected(self):
        corpus, er, ee, store = tiny_setup(n=10)
        with pytest.raises(ValueError, match="unknown grid"):
            S.run_grid("table9", tiny_config(), corpus, er, ee, store)

    def test_default_protocol_shape(self):
        cfg = TrainConfig()
        assert cfg.folds == 5 and cfg.repeats == 5 and cfg.epochs == 65
        assert cfg.batch_size == 16 and cfg.hidden == 1024
        assert cfg.heads == 2 and cfg.l2_weight == 1e-5 and cfg.dropout == 0.1
        assert cfg.resolved_lr() == 1e-5
        assert TrainConfig(variant="clstms").resolved_lr() == 1e-4
