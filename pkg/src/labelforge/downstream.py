"""End classifier: an MLP trained on probabilistic labels, scored on gold test.

Training minimizes soft-target cross-entropy against the aggregated label
distributions (hard mode swaps in one-hot targets through the same loop).
Rows the label model left uncovered are excluded from training by default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, LabeledExample
from .errors import DegenerateTargets
from .label_model import ProbabilisticLabel
from .metrics import EvalReport, confusion_counts, weighted_f1
from .nets import MlpNet


@dataclass
class DownstreamConfig:
    hidden: int = 100
    epochs: int = 50
    batch_size: int = 32
    lr: float = 0.01
    mode: str = "soft"  # "soft" | "hard"
    rng_seed: int = 0
    include_uncovered: bool = False


@dataclass
class MlpClassifier:
    """One-hidden-layer ReLU net over the downstream featurization."""

    net: MlpNet
    featurizer: object
    config: DownstreamConfig = field(default_factory=DownstreamConfig)

    def predict_proba_docs(self, docs: list[Document]) -> np.ndarray:
        return self.net.forward(self.featurizer.transform_many(docs))

    def predict_docs(self, docs: list[Document]) -> np.ndarray:
        return self.predict_proba_docs(docs).argmax(axis=1)

    def checkpoint(self, path: str, config_hash: str = "") -> None:
        payload = {
            "dim_in": self.net.dim_in,
            "hidden": self.net.hidden,
            "num_classes": self.net.num_classes,
            "w1": self.net.w1.tolist(),
            "b1": self.net.b1.tolist(),
            "w2": self.net.w2.tolist(),
            "b2": self.net.b2.tolist(),
            "config_hash": config_hash,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)


def build_targets(
    probs: list[ProbabilisticLabel], mode: str, include_uncovered: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Select training rows and their target distributions.

    Returns (row indices, targets). Hard mode one-hot-encodes the argmax, so
    soft training with one-hot distributions is gradient-identical to it.
    """
    keep = [i for i, p in enumerate(probs) if p.covered or include_uncovered]
    if not keep:
        raise DegenerateTargets("no covered rows to train on")
    num_classes = probs[0].dist.shape[0]
    targets = np.zeros((len(keep), num_classes))
    for row, i in enumerate(keep):
        if mode == "hard":
            targets[row, int(np.argmax(probs[i].dist))] = 1.0
        else:
            targets[row] = probs[i].dist
    hard = targets.argmax(axis=1)
    if len(set(hard.tolist())) < 2:
        raise DegenerateTargets("covered hard labels span fewer than 2 classes")
    return np.array(keep), targets


def train_downstream(
    probs: list[ProbabilisticLabel],
    docs: list[Document],
    featurizer,
    config: DownstreamConfig = DownstreamConfig(),
) -> MlpClassifier:
    """Fit the MLP on probabilistic labels; deterministic for a fixed seed."""
    if len(probs) != len(docs):
        raise ValueError("probs and docs must align")
    keep, targets = build_targets(probs, config.mode, config.include_uncovered)
    x = featurizer.transform_many([docs[i] for i in keep])
    num_classes = targets.shape[1]
    net = MlpNet(x.shape[1], config.hidden, num_classes, rng_seed=config.rng_seed)
    net.fit(
        x,
        targets,
        epochs=config.epochs,
        lr=config.lr,
        batch_size=config.batch_size,
        shuffle_seed=config.rng_seed,
    )
    return MlpClassifier(net=net, featurizer=featurizer, config=config)


def evaluate_e2e(clf: MlpClassifier, test: list[LabeledExample], featurizer=None) -> EvalReport:
    """Weighted F1 of argmax predictions against the held-out gold labels."""
    if not test:
        raise ValueError("evaluate_e2e needs a non-empty test split")
    featurizer = featurizer or clf.featurizer
    probs = clf.net.forward(featurizer.transform_many([ex.doc for ex in test]))
    pred = probs.argmax(axis=1).tolist()
    gold = [ex.gold for ex in test]
    num_classes = clf.net.num_classes
    per_class, weighted = weighted_f1(pred, gold, num_classes)
    return EvalReport(
        coverage=1.0,
        per_class_f1=per_class,
        weighted_f1=weighted,
        label_quality=weighted,
        confusion=confusion_counts(pred, gold, num_classes).tolist(),
        n_evaluated=len(test),
        f1_convention="all_rows",
    )


def export_predictions_jsonl(path: str, clf: MlpClassifier, docs: list[Document], labels) -> None:
    probs = clf.predict_proba_docs(docs)
    with open(path, "w", encoding="utf-8") as fh:
        for doc, dist in zip(docs, probs):
            rec = {
                "doc_id": doc.id,
                "dist": [float(v) for v in dist],
                "pred": labels.name_of(int(np.argmax(dist))),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def features_digest(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()[:16]
