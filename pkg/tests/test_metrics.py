import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selftrain.errors import DataError
from selftrain.metrics import (
    Aggregate,
    accuracy,
    aggregate,
    confusion,
    labeling_accuracy,
    macro_f1,
    micro_f1,
    per_class_scores,
    report_from_confusion,
)

NAMES = ("positive", "negative", "neutral")


def naive_counts(gold, pred, c):
    cm = [[0] * c for _ in range(c)]
    for g, p in zip(gold, pred):
        cm[g][p] += 1
    return cm


def naive_macro_f1(cm):
    """Independent scalar recomputation, one class at a time."""
    c = len(cm)
    f1s = []
    for k in range(c):
        tp = cm[k][k]
        pred_total = sum(cm[r][k] for r in range(c))
        gold_total = sum(cm[k])
        precision = tp / pred_total if pred_total else 0.0
        recall = tp / gold_total if gold_total else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return sum(f1s) / c


class TestConfusion:
    def test_perfect_diagonal(self):
        labels = [0, 1, 2, 0, 1, 2, 1, 1, 0, 2]
        cm = confusion(labels, labels, 3)
        assert np.trace(cm) == 10
        assert cm.sum() == 10

    def test_zero_diagonal(self):
        cm = confusion([0, 1], [1, 0], 3)
        assert np.trace(cm) == 0
        assert cm[0, 1] == 1 and cm[1, 0] == 1

    def test_random_pairs_match_naive_recount(self):
        rng = np.random.default_rng(3)
        gold = rng.integers(0, 3, size=200).tolist()
        pred = rng.integers(0, 3, size=200).tolist()
        cm = confusion(gold, pred, 3)
        assert cm.tolist() == naive_counts(gold, pred, 3)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            confusion([0, 1], [0], 3)


class TestMacroF1:
    def test_perfect(self):
        cm = np.diag([5, 7, 9])
        assert macro_f1(cm) == pytest.approx(1.0, abs=1e-12)

    def test_one_class_predictor_on_balanced_gold(self):
        # always predicts class 0 on 30 balanced instances:
        # class 0 F1 = 2*(1/3)*1 / (1/3 + 1) = 0.5, others 0 -> macro 1/6
        gold = [0] * 10 + [1] * 10 + [2] * 10
        pred = [0] * 30
        cm = confusion(gold, pred, 3)
        assert macro_f1(cm) == pytest.approx(1 / 6, abs=1e-12)

    def test_fixture_matrix_matches_hand_computation(self):
        cm = np.array([[8, 2, 0], [1, 9, 0], [0, 0, 10]])
        # class 0: P=8/9,  R=8/10 -> F1 = 16/19
        # class 1: P=9/11, R=9/10 -> F1 = 6/7
        # class 2: P=1,    R=1    -> F1 = 1
        expected = (16 / 19 + 6 / 7 + 1.0) / 3.0
        assert macro_f1(cm) == pytest.approx(expected, abs=1e-12)
        assert macro_f1(cm) == pytest.approx(naive_macro_f1(cm.tolist()), abs=1e-12)

    def test_hundred_random_matrices_match_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            c = int(rng.integers(2, 6))
            cm = rng.integers(0, 50, size=(c, c))
            if rng.random() < 0.3:
                cm[rng.integers(c), :] = 0  # absent gold class
            if rng.random() < 0.3:
                cm[:, rng.integers(c)] = 0  # never-predicted class
            assert macro_f1(cm) == pytest.approx(naive_macro_f1(cm.tolist()), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 40), min_size=9, max_size=9), st.permutations([0, 1, 2]))
    def test_permutation_invariance(self, entries, perm):
        cm = np.array(entries).reshape(3, 3)
        permuted = cm[np.ix_(perm, perm)]
        assert macro_f1(permuted) == pytest.approx(macro_f1(cm), abs=1e-12)


class TestReport:
    def test_accuracy_recomputable_from_matrix(self):
        cm = np.array([[8, 2, 0], [1, 9, 0], [0, 0, 10]])
        report = report_from_confusion(cm, NAMES)
        assert report.accuracy == pytest.approx(np.trace(cm) / cm.sum(), abs=1e-12)
        assert report.micro_f1 == pytest.approx(accuracy(cm), abs=1e-12)
        assert report.n_evaluated == 30

    def test_all_one_class_on_balanced_gold(self):
        gold = [0] * 10 + [1] * 10 + [2] * 10
        cm = confusion(gold, [0] * 30, 3)
        report = report_from_confusion(cm, NAMES)
        assert report.accuracy == pytest.approx(1 / 3, abs=1e-12)
        assert report.macro_f1 == pytest.approx(1 / 6, abs=1e-12)

    def test_zero_division_flagged(self):
        cm = np.array([[5, 0, 0], [0, 5, 0], [0, 0, 0]])
        report = report_from_confusion(cm, NAMES)
        assert any("neutral" in flag for flag in report.flags)
        assert report.per_class[2].f1 == 0.0

    def test_schema(self):
        cm = np.diag([3, 3, 3])
        d = report_from_confusion(cm, NAMES).to_dict()
        assert set(d) == {"accuracy", "macro_f1", "micro_f1", "per_class", "n", "flags"}
        assert [c["name"] for c in d["per_class"]] == list(NAMES)
        assert {"name", "precision", "recall", "f1", "support"} == set(d["per_class"][0])

    def test_support_is_gold_count(self):
        cm = np.array([[2, 1, 0], [0, 4, 0], [1, 0, 3]])
        report = report_from_confusion(cm, NAMES)
        assert [c.support for c in report.per_class] == [3, 4, 4]


class TestLabelingAccuracy:
    def test_all_correct(self):
        shadow = {f"i{k}": k % 3 for k in range(10)}
        pairs = [(f"i{k}", k % 3) for k in range(10)]
        assert labeling_accuracy(pairs, shadow) == 1.0

    def test_half_correct(self):
        shadow = {f"i{k}": 0 for k in range(10)}
        pairs = [(f"i{k}", 0 if k < 5 else 1) for k in range(10)]
        assert labeling_accuracy(pairs, shadow) == 0.5

    def test_thousand_random_match_naive(self):
        rng = np.random.default_rng(5)
        shadow = {f"i{k}": int(rng.integers(3)) for k in range(1000)}
        pairs = [(f"i{k}", int(rng.integers(3))) for k in range(1000)]
        naive = sum(1 for i, y in pairs if shadow[i] == y) / len(pairs)
        assert labeling_accuracy(pairs, shadow) == pytest.approx(naive, abs=1e-15)

    def test_missing_shadow_rejected(self):
        with pytest.raises(DataError):
            labeling_accuracy([("ghost", 0)], {"other": 1})


class TestAggregate:
    def test_mean_and_ci(self):
        agg = aggregate([0.8, 0.9, 1.0])
        assert agg.mean == pytest.approx(0.9, abs=1e-12)
        # t(0.975, df=2) = 4.302652..., sd = 0.1, n = 3
        assert agg.ci95 == pytest.approx(4.302652729911275 * 0.1 / np.sqrt(3), rel=1e-9)

    def test_single_value_has_no_ci(self):
        agg = aggregate([0.5])
        assert agg == Aggregate(mean=0.5, ci95=None, values=(0.5,))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            aggregate([])
