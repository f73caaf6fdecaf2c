"""Metric fidelity: hand cases, reference-implementation agreement."""

import numpy as np
import pytest
from sklearn.metrics import f1_score

from strategyseq.data.corpus import LabelVocabulary, Role
from strategyseq.metrics import confusion_counts, f1_from_confusion, f1_report


def vocab(n, role=Role.ER):
    return LabelVocabulary(role, tuple(f"lab{i}" for i in range(n)))


class TestF1Report:
    def test_perfect_prediction(self):
        rep = f1_report([0, 1, 2, 1], [0, 1, 2, 1], vocab(3))
        assert rep.macro_f1 == 1.0
        assert rep.weighted_f1 == 1.0

    def test_hand_computed_case(self):
        # gold aab / pred abb: F1(a) = F1(b) = 2/3
        rep = f1_report([0, 0, 1], [0, 1, 1], vocab(2))
        assert rep.per_label["lab0"].f1 == pytest.approx(2 / 3)
        assert rep.per_label["lab1"].f1 == pytest.approx(2 / 3)
        assert rep.macro_f1 == pytest.approx(2 / 3)

    def test_absent_label_does_not_affect_macro(self):
        small = f1_report([0, 1], [0, 1], vocab(2))
        padded = f1_report([0, 1], [0, 1], vocab(9))
        assert small.macro_f1 == padded.macro_f1 == 1.0

    def test_predicted_only_label_excluded_from_macro(self):
        # label 2 never occurs in gold; predicting it hurts recall of 0/1
        # but 2 itself contributes no macro term
        rep = f1_report([0, 1], [2, 2], vocab(3))
        assert set(
            name for name, s in rep.per_label.items() if s.support > 0
        ) == {"lab0", "lab1"}
        assert rep.macro_f1 == 0.0

    def test_zero_denominator_yields_zero_f1(self):
        rep = f1_report([0, 0], [1, 1], vocab(2))
        assert rep.per_label["lab0"].f1 == 0.0
        assert rep.macro_f1 == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            f1_report([0, 1], [0], vocab(2))

    def test_agrees_with_reference_implementation(self, rng):
        for trial in range(1000):
            n = int(rng.integers(2, 8))
            size = int(rng.integers(1, 40))
            gold = rng.integers(0, n, size=size)
            pred = rng.integers(0, n, size=size)
            rep = f1_report(gold, pred, vocab(n))
            present = sorted(set(gold.tolist()))
            ref_macro = f1_score(gold, pred, labels=present, average="macro",
                                 zero_division=0)
            ref_weighted = f1_score(gold, pred, labels=present,
                                    average="weighted", zero_division=0)
            assert abs(rep.macro_f1 - ref_macro) < 1e-12
            assert abs(rep.weighted_f1 - ref_weighted) < 1e-12

    def test_macro_invariant_to_label_permutation(self, rng):
        n = 5
        gold = rng.integers(0, n, size=60)
        pred = rng.integers(0, n, size=60)
        perm = rng.permutation(n)
        rep = f1_report(gold, pred, vocab(n))
        rep_perm = f1_report(perm[gold], perm[pred], vocab(n))
        assert rep_perm.macro_f1 == pytest.approx(rep.macro_f1, abs=1e-12)
        assert rep_perm.weighted_f1 == pytest.approx(rep.weighted_f1, abs=1e-12)


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        m = confusion_counts([0, 1, 2, 2], [0, 1, 2, 2], 3)
        assert np.array_equal(m, np.diag([1, 1, 2]))

    def test_total_mass_is_sequence_length(self, rng):
        gold = rng.integers(0, 4, size=33)
        pred = rng.integers(0, 4, size=33)
        assert confusion_counts(gold, pred, 4).sum() == 33

    def test_row_sums_equal_gold_supports(self, rng):
        gold = rng.integers(0, 4, size=50)
        pred = rng.integers(0, 4, size=50)
        m = confusion_counts(gold, pred, 4)
        for i in range(4):
            assert m[i].sum() == int((gold == i).sum())

    def test_f1_recomputed_from_matrix_matches(self, rng):
        # independent recomputation straight off the matrix definition
        gold = rng.integers(0, 5, size=80)
        pred = rng.integers(0, 5, size=80)
        v = vocab(5)
        rep = f1_report(gold, pred, v)
        m = rep.confusion
        for i, name in enumerate(v.names):
            tp = m[i, i]
            p = tp / m[:, i].sum() if m[:, i].sum() else 0.0
            r = tp / m[i, :].sum() if m[i, :].sum() else 0.0
            f1 = 2 * p * r / (p + r) if p + r else 0.0
            assert rep.per_label[name].f1 == pytest.approx(f1, abs=1e-12)
        assert f1_from_confusion(m, v).macro_f1 == pytest.approx(rep.macro_f1)
