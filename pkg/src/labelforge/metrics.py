"""Coverage, weighted F1, label quality, and evaluation reports.

Label quality is coverage times the weighted F1 of aggregated hard labels;
the F1 is computed over covered rows only since the coverage factor already
charges once for abstained instances.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .corpus import LabeledExample
from .errors import IdAlignment, LengthMismatch
from .lf_core import ABSTAIN, LabelMatrix
from .label_model import ProbabilisticLabel, hard_labels


@dataclass
class EvalReport:
    coverage: float
    per_class_f1: list[float]
    weighted_f1: float
    label_quality: float
    confusion: list[list[int]]
    n_evaluated: int
    f1_convention: str = "covered_rows_only"

    def to_json(self) -> dict:
        return {
            "coverage": self.coverage,
            "per_class_f1": self.per_class_f1,
            "weighted_f1": self.weighted_f1,
            "label_quality": self.label_quality,
            "confusion": self.confusion,
            "n_evaluated": self.n_evaluated,
            "f1_convention": self.f1_convention,
        }


def coverage(matrix: LabelMatrix) -> float:
    """Fraction of rows receiving at least one non-abstain vote."""
    if matrix.n_rows == 0:
        raise ValueError("coverage needs a non-empty matrix")
    return float(np.mean((matrix.entries != ABSTAIN).any(axis=1)))


def confusion_counts(pred: list[int], gold: list[int], num_classes: int) -> np.ndarray:
    counts = np.zeros((num_classes, num_classes), dtype=int)
    for p, g in zip(pred, gold):
        counts[g, p] += 1
    return counts


def weighted_f1(
    pred: list[int], gold: list[int], num_classes: int
) -> tuple[list[float], float]:
    """Per-class F1 plus the gold-proportion weighted mean.

    F1_c is 0 when precision + recall is 0; classes absent from gold carry
    zero weight.
    """
    if len(pred) != len(gold):
        raise LengthMismatch(f"pred has {len(pred)} items, gold has {len(gold)}")
    if not gold:
        raise ValueError("weighted_f1 needs at least one example")
    counts = confusion_counts(pred, gold, num_classes)
    per_class = []
    weighted = 0.0
    total = counts.sum()
    for c in range(num_classes):
        tp = counts[c, c]
        predicted = counts[:, c].sum()
        actual = counts[c, :].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(float(f1))
        if actual:
            weighted += (actual / total) * f1
    return per_class, float(weighted)


def label_quality(cov: float, weighted: float) -> float:
    """Coverage-weighted F1: the exact product of the two factors."""
    if not (0 <= cov <= 1 and 0 <= weighted <= 1):
        raise ValueError("coverage and weighted F1 must be in [0, 1]")
    return cov * weighted


def evaluate_labeling(
    matrix: LabelMatrix,
    probs: list[ProbabilisticLabel],
    gold: list[LabeledExample],
) -> EvalReport:
    """Score aggregated labels against gold aligned by document id."""
    gold_by_id = {ex.doc.id: ex.gold for ex in gold}
    if len(gold_by_id) != len(gold) or set(gold_by_id) != set(matrix.row_ids):
        raise IdAlignment("gold examples do not align with matrix rows")
    if len(probs) != matrix.n_rows:
        raise IdAlignment("probabilistic labels do not align with matrix rows")
    num_classes = probs[0].dist.shape[0]
    hard = hard_labels(probs)
    pred, truth = [], []
    for (cls, covered), doc_id in zip(hard, matrix.row_ids):
        if covered:
            pred.append(cls)
            truth.append(gold_by_id[doc_id])
    cov = coverage(matrix)
    if pred:
        per_class, weighted = weighted_f1(pred, truth, num_classes)
        confusion = confusion_counts(pred, truth, num_classes).tolist()
    else:
        per_class, weighted = [0.0] * num_classes, 0.0
        confusion = np.zeros((num_classes, num_classes), dtype=int).tolist()
    return EvalReport(
        coverage=cov,
        per_class_f1=per_class,
        weighted_f1=weighted,
        label_quality=label_quality(cov, weighted),
        confusion=confusion,
        n_evaluated=len(pred),
    )


LEDGER_FIELDS = (
    "dataset",
    "coverage",
    "weighted_f1",
    "label_quality",
    "e2e_f1",
    "config_hash",
    "timestamp",
)


def append_ledger_row(path: str, row: dict) -> None:
    """Append one results row, writing the header on first use."""
    exists = os.path.exists(path)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LEDGER_FIELDS)
        if not exists:
            writer.writeheader()
        writer.writerow({k: row.get(k, "") for k in LEDGER_FIELDS})


def write_report_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
