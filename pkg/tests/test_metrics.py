import itertools

import numpy as np
import pytest

from labelforge.corpus import Document, LabeledExample
from labelforge.errors import IdAlignment, LengthMismatch
from labelforge.label_model import ProbabilisticLabel
from labelforge.lf_core import ABSTAIN, LabelMatrix
from labelforge.metrics import (
    append_ledger_row,
    coverage,
    evaluate_labeling,
    label_quality,
    weighted_f1,
)


def matrix(rows):
    entries = np.asarray(rows, dtype=int)
    return LabelMatrix(
        entries=entries,
        row_ids=[f"d{i}" for i in range(entries.shape[0])],
        col_ids=[f"lf{j}" for j in range(entries.shape[1])],
    )


def test_coverage_row_counts():
    m = matrix([[0, ABSTAIN], [ABSTAIN, 1], [ABSTAIN, ABSTAIN]])
    assert coverage(m) == pytest.approx(2 / 3)
    assert coverage(matrix([[ABSTAIN], [ABSTAIN]])) == 0.0
    assert coverage(matrix([[0], [1]])) == 1.0


def test_weighted_f1_perfect():
    per_class, weighted = weighted_f1([0, 1, 0], [0, 1, 0], 2)
    assert per_class == [1.0, 1.0]
    assert weighted == 1.0


def test_weighted_f1_hand_confusion_table():
    per_class, weighted = weighted_f1([0, 1, 1, 1], [0, 0, 1, 1], 2)
    assert per_class[0] == pytest.approx(2 / 3)
    assert per_class[1] == pytest.approx(0.8)
    assert weighted == pytest.approx(0.5 * (2 / 3) + 0.5 * 0.8)


def test_weighted_f1_absent_class_zero_f1():
    # class 1 never predicted, never recalled correctly
    per_class, weighted = weighted_f1([0, 0], [0, 1], 2)
    assert per_class[1] == 0.0
    assert weighted == pytest.approx(0.5 * per_class[0])


def test_weighted_f1_length_mismatch():
    with pytest.raises(LengthMismatch):
        weighted_f1([0], [0, 1], 2)


def f1_oracle(pred, gold, num_classes):
    """Brute-force per-class F1 from raw pair counts."""
    out = []
    for c in range(num_classes):
        tp = sum(1 for p, g in zip(pred, gold) if p == c and g == c)
        fp = sum(1 for p, g in zip(pred, gold) if p == c and g != c)
        fn = sum(1 for p, g in zip(pred, gold) if p != c and g == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        out.append(
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    weighted = sum(
        (sum(1 for g in gold if g == c) / len(gold)) * out[c] for c in range(num_classes)
    )
    return out, weighted


def test_weighted_f1_matches_oracle_exhaustively():
    # every (pred, gold) combination over 2 classes and 4 items
    for gold in itertools.product(range(2), repeat=4):
        for pred in itertools.product(range(2), repeat=4):
            per_class, weighted = weighted_f1(list(pred), list(gold), 2)
            oracle_per, oracle_weighted = f1_oracle(pred, gold, 2)
            assert per_class == pytest.approx(oracle_per)
            assert weighted == pytest.approx(oracle_weighted)


def test_weighted_f1_matches_oracle_random_multiclass():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 10))
        num_classes = int(rng.integers(2, 5))
        gold = rng.integers(0, num_classes, size=n).tolist()
        pred = rng.integers(0, num_classes, size=n).tolist()
        per_class, weighted = weighted_f1(pred, gold, num_classes)
        oracle_per, oracle_weighted = f1_oracle(pred, gold, num_classes)
        assert per_class == pytest.approx(oracle_per)
        assert weighted == pytest.approx(oracle_weighted)
        assert 0.0 <= weighted <= 1.0


def test_label_quality_product():
    assert label_quality(0.9, 0.8) == pytest.approx(0.72)
    assert label_quality(1.0, 0.37) == pytest.approx(0.37)
    assert label_quality(0.0, 0.9) == 0.0
    with pytest.raises(ValueError):
        label_quality(1.2, 0.5)


def test_label_quality_never_exceeds_factors():
    rng = np.random.default_rng(1)
    for _ in range(200):
        c, w = rng.uniform(0, 1, size=2)
        q = label_quality(float(c), float(w))
        assert q <= c + 1e-12 and q <= w + 1e-12


def probs_for(hard, covered):
    out = []
    for h, cov in zip(hard, covered):
        dist = np.full(2, 0.5) if not cov else np.eye(2)[h]
        out.append(ProbabilisticLabel(dist=dist, covered=cov))
    return out


def gold_for(matrix_rows, labels):
    return [
        LabeledExample(doc=Document(id=f"d{i}", text=""), gold=g)
        for i, g in enumerate(labels)
    ]


def test_evaluate_labeling_perfect():
    m = matrix([[0], [1]])
    probs = probs_for([0, 1], [True, True])
    report = evaluate_labeling(m, probs, gold_for(m, [0, 1]))
    assert report.coverage == 1.0
    assert report.weighted_f1 == 1.0
    assert report.label_quality == 1.0
    assert report.n_evaluated == 2


def test_evaluate_labeling_half_covered_quality():
    m = matrix([[0], [ABSTAIN]])
    probs = probs_for([0, 0], [True, False])
    report = evaluate_labeling(m, probs, gold_for(m, [0, 1]))
    assert report.coverage == pytest.approx(0.5)
    assert report.weighted_f1 == 1.0  # covered rows only
    assert report.label_quality == pytest.approx(0.5)


def test_evaluate_labeling_id_alignment():
    m = matrix([[0], [1]])
    probs = probs_for([0, 1], [True, True])
    wrong_gold = [LabeledExample(doc=Document(id="zz", text=""), gold=0),
                  LabeledExample(doc=Document(id="d1", text=""), gold=1)]
    with pytest.raises(IdAlignment):
        evaluate_labeling(m, probs, wrong_gold)


def test_ledger_append(tmp_path):
    path = str(tmp_path / "ledger.csv")
    append_ledger_row(path, {"dataset": "x", "coverage": 1.0, "config_hash": "abc"})
    append_ledger_row(path, {"dataset": "y", "coverage": 0.5, "config_hash": "def"})
    lines = open(path).read().splitlines()
    assert lines[0].startswith("dataset,coverage")
    assert len(lines) == 3
