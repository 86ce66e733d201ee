"""Abstention-aware aggregation of the label matrix into probabilistic labels.

Three aggregators share one contract: every output row is a distribution over
classes, and rows where every LF abstained come back uniform with
covered=False so downstream consumers can exclude them. ABSTAIN is treated as
missing data throughout (never as a class).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import LabelSpace
from .errors import AllWeightsZero, NoSignal
from .lf_core import ABSTAIN, LabelMatrix

DS_SMOOTHING = 1e-6


@dataclass
class ProbabilisticLabel:
    dist: np.ndarray
    covered: bool


@dataclass(frozen=True)
class MajorityVote:
    kind: str = "majority_vote"


@dataclass(frozen=True)
class WeightedMajorityVote:
    weights: tuple[float, ...]
    kind: str = "weighted_majority_vote"


@dataclass(frozen=True)
class DawidSkene:
    max_iter: int = 100
    tol: float = 1e-6
    kind: str = "dawid_skene"


LabelModelKind = MajorityVote | WeightedMajorityVote | DawidSkene


@dataclass
class DawidSkeneModel:
    """Class priors plus one row-stochastic confusion matrix per LF."""

    class_priors: np.ndarray
    confusion: np.ndarray  # m x C x C, rows sum to 1
    iterations_run: int
    converged: bool
    posteriors: np.ndarray  # over rows used for fitting
    log_likelihood_history: list[float] = field(default_factory=list)


def _vote_mass(matrix: LabelMatrix, num_classes: int, weights: np.ndarray) -> np.ndarray:
    n, m = matrix.entries.shape
    mass = np.zeros((n, num_classes))
    for j in range(m):
        col = matrix.entries[:, j]
        voted = col != ABSTAIN
        np.add.at(mass, (np.flatnonzero(voted), col[voted]), weights[j])
    return mass


def _log_likelihood(
    entries: np.ndarray, priors: np.ndarray, confusion: np.ndarray
) -> float:
    n, m = entries.shape
    num_classes = len(priors)
    log_joint = np.tile(np.log(priors + 1e-300), (n, 1))
    for j in range(m):
        col = entries[:, j]
        voted = col != ABSTAIN
        log_joint[voted] += np.log(confusion[j][:, col[voted]].T + 1e-300)
    row_max = log_joint.max(axis=1, keepdims=True)
    return float(np.sum(row_max[:, 0] + np.log(np.exp(log_joint - row_max).sum(axis=1))))


def fit_dawid_skene(
    matrix: LabelMatrix, num_classes: int, max_iter: int = 100, tol: float = 1e-6
) -> DawidSkeneModel:
    """Classic EM over covered rows, with ABSTAIN skipped in the likelihood.

    Posteriors start from majority-vote distributions; the M-step smooths
    counts by DS_SMOOTHING so confusion rows stay stochastic even when an LF
    never emits some class. Stops when the largest posterior change drops
    below tol.
    """
    entries = matrix.entries
    covered = (entries != ABSTAIN).any(axis=1)
    if not covered.any():
        raise NoSignal("every matrix entry is ABSTAIN")
    entries = entries[covered]
    n, m = entries.shape

    mass = np.zeros((n, num_classes))
    for j in range(m):
        col = entries[:, j]
        voted = col != ABSTAIN
        np.add.at(mass, (np.flatnonzero(voted), col[voted]), 1.0)
    totals = mass.sum(axis=1, keepdims=True)
    posteriors = np.where(totals > 0, mass / np.maximum(totals, 1e-300), 1.0 / num_classes)

    priors = np.full(num_classes, 1.0 / num_classes)
    confusion = np.zeros((m, num_classes, num_classes))
    iterations = 0
    converged = False
    ll_history: list[float] = []

    for iterations in range(1, max_iter + 1):
        # M-step: priors and per-LF confusion rows from current posteriors
        priors = posteriors.sum(axis=0) + DS_SMOOTHING
        priors /= priors.sum()
        for j in range(m):
            col = entries[:, j]
            voted = col != ABSTAIN
            counts = np.zeros((num_classes, num_classes))
            if voted.any():
                sub = posteriors[voted]
                votes = col[voted]
                for label in np.unique(votes):
                    counts[:, label] = sub[votes == label].sum(axis=0)
            counts += DS_SMOOTHING
            confusion[j] = counts / counts.sum(axis=1, keepdims=True)

        ll_history.append(_log_likelihood(entries, priors, confusion))

        # E-step: row posteriors from priors and confusion matrices
        log_joint = np.tile(np.log(priors), (n, 1))
        for j in range(m):
            col = entries[:, j]
            voted = col != ABSTAIN
            log_joint[voted] += np.log(confusion[j][:, col[voted]].T + 1e-300)
        log_joint -= log_joint.max(axis=1, keepdims=True)
        new_posteriors = np.exp(log_joint)
        new_posteriors /= new_posteriors.sum(axis=1, keepdims=True)

        delta = float(np.max(np.abs(new_posteriors - posteriors)))
        posteriors = new_posteriors
        if delta < tol:
            converged = True
            break

    return DawidSkeneModel(
        class_priors=priors,
        confusion=confusion,
        iterations_run=iterations,
        converged=converged,
        posteriors=posteriors,
        log_likelihood_history=ll_history,
    )


def aggregate(
    matrix: LabelMatrix, kind: LabelModelKind, labels: LabelSpace
) -> list[ProbabilisticLabel]:
    """Map each matrix row to a distribution over classes."""
    if matrix.n_rows == 0 or matrix.n_cols == 0:
        raise ValueError("aggregate needs a non-empty label matrix")
    num_classes = labels.num_classes
    covered = (matrix.entries != ABSTAIN).any(axis=1)
    uniform = np.full(num_classes, 1.0 / num_classes)

    if isinstance(kind, (MajorityVote, WeightedMajorityVote)):
        if isinstance(kind, WeightedMajorityVote):
            weights = np.asarray(kind.weights, dtype=float)
            if len(weights) != matrix.n_cols:
                raise ValueError("weights length must match the LF count")
            if np.any(weights < 0):
                raise ValueError("weights must be non-negative")
            if not np.any(weights > 0):
                raise AllWeightsZero("weighted vote needs a positive weight")
        else:
            weights = np.ones(matrix.n_cols)
        mass = _vote_mass(matrix, num_classes, weights)
        totals = mass.sum(axis=1, keepdims=True)
        dists = np.where(totals > 0, mass / np.maximum(totals, 1e-300), uniform)
    else:
        model = fit_dawid_skene(matrix, num_classes, kind.max_iter, kind.tol)
        dists = np.tile(uniform, (matrix.n_rows, 1))
        dists[covered] = model.posteriors

    out = []
    for i in range(matrix.n_rows):
        dist = dists[i] if covered[i] else uniform
        out.append(ProbabilisticLabel(dist=dist.copy(), covered=bool(covered[i])))
    return out


def hard_labels(probs: list[ProbabilisticLabel]) -> list[tuple[int, bool]]:
    """Argmax per row; ties break toward the smallest class index."""
    return [(int(np.argmax(p.dist)), p.covered) for p in probs]


def export_labels_jsonl(
    path: str,
    probs: list[ProbabilisticLabel],
    doc_ids: list[str],
    labels: LabelSpace,
) -> None:
    hard = hard_labels(probs)
    with open(path, "w", encoding="utf-8") as fh:
        for (cls, _), prob, doc_id in zip(hard, probs, doc_ids):
            rec = {
                "doc_id": doc_id,
                "dist": [float(v) for v in prob.dist],
                "covered": prob.covered,
                "hard": labels.name_of(cls),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_labels_jsonl(path: str, labels: LabelSpace) -> tuple[list[ProbabilisticLabel], list[str]]:
    probs: list[ProbabilisticLabel] = []
    doc_ids: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            probs.append(
                ProbabilisticLabel(dist=np.asarray(rec["dist"], dtype=float), covered=rec["covered"])
            )
            doc_ids.append(rec["doc_id"])
    return probs, doc_ids
