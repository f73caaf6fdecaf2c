"""Sklearn-facing estimator: validation, fit/predict/score, cloning."""

import numpy as np
import pytest
from sklearn.base import clone

import strategyseq as S
from strategyseq.estimator import StrategyLabeler, check_dialogue_inputs


def to_xy(corpus, store):
    xs, ys = [], []
    for d in corpus:
        roles = [u.role.value for u in d.utterances]
        xs.append((store.get(d.id), roles))
        ys.append([u.label_id for u in d.utterances])
    return xs, ys


@pytest.fixture
def xy():
    corpus, er, ee = S.synthetic_corpus(12, seed=6, n_er=4, n_ee=5)
    store = S.synth_features(corpus, dim=6, seed=2, sigma=0.1)
    return to_xy(corpus, store)


class TestValidation:
    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="at least one"):
            check_dialogue_inputs([])

    def test_rejects_role_feature_length_mismatch(self):
        x = [(np.zeros((3, 4)), ["ER", "EE"])]
        with pytest.raises(ValueError, match="roles"):
            check_dialogue_inputs(x)

    def test_rejects_bad_role_token(self):
        x = [(np.zeros((1, 4)), ["XX"])]
        with pytest.raises(ValueError):
            check_dialogue_inputs(x)

    def test_rejects_label_out_of_range(self):
        x = [(np.zeros((2, 4)), ["ER", "EE"])]
        with pytest.raises(ValueError, match="out of range"):
            check_dialogue_inputs(x, [[0, 3]], n_er=2, n_ee=2)

    def test_rejects_ragged_feature_width(self):
        x = [(np.zeros((2, 4)), ["ER", "EE"]), (np.zeros((2, 5)), ["ER", "EE"])]
        with pytest.raises(ValueError, match="width"):
            check_dialogue_inputs(x)

    def test_accepts_integer_roles(self):
        x = [(np.zeros((2, 4)), [0, 1])]
        instances, dim, _, _ = check_dialogue_inputs(x)
        assert dim == 4 and list(instances[0].roles) == [0, 1]


class TestEstimator:
    def test_fit_predict_shapes(self, xy):
        xs, ys = xy
        est = StrategyLabeler(variant="clstms", hidden=8, epochs=3,
                              learning_rate=1e-3, seed=0)
        est.fit(xs, ys)
        preds = est.predict(xs)
        assert len(preds) == len(xs)
        for (features, roles), pred in zip(xs, preds):
            assert len(pred) == len(roles)

    def test_overfits_small_separable_data(self, xy):
        xs, ys = xy
        est = StrategyLabeler(variant="clstms", hidden=16, epochs=40,
                              learning_rate=5e-3, seed=0)
        est.fit(xs, ys)
        assert est.score(xs, ys) > 0.9

    def test_get_params_set_params_clone(self):
        est = StrategyLabeler(variant="transformers-extcrf", hidden=12)
        params = est.get_params()
        assert params["variant"] == "transformers-extcrf"
        assert params["hidden"] == 12
        twin = clone(est)
        assert twin.get_params() == params
        twin.set_params(hidden=24)
        assert twin.hidden == 24 and est.hidden == 12

    def test_unfitted_predict_raises(self, xy):
        xs, _ = xy
        with pytest.raises(RuntimeError, match="not fitted"):
            StrategyLabeler().predict(xs)

    def test_unknown_variant_rejected_at_fit(self, xy):
        xs, ys = xy
        with pytest.raises(ValueError, match="unknown variant"):
            StrategyLabeler(variant="bogus").fit(xs, ys)

    def test_success_labels_feed_outcome_head(self, xy):
        xs, ys = xy
        est = StrategyLabeler(variant="transformers-extcrf", hidden=8, epochs=2,
                              learning_rate=1e-3, seed=0)
        est.fit(xs, ys, success=[i % 2 == 0 for i in range(len(xs))])
        roles = np.array([0 if r == "ER" else 1 for r in xs[0][1]], dtype=np.int8)
        prob = est.model_.predict_success(S.Instance("d", xs[0][0], roles))
        assert 0.0 < prob < 1.0
