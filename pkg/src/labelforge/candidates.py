"""Structural and semantic LF candidates: train, calibrate, threshold.

Each candidate is a lightweight probabilistic classifier trained on a random
seed subsample, turned into a label function by a confidence threshold. The
threshold is picked on a grid by maximizing the weighted harmonic mean of
precision (on the seed) and coverage, with beta weighting precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset, Document, LabeledExample
from .errors import DegenerateSubsample, DimensionMismatch
from .lf_core import ABSTAIN, EPS, Category, LabelFunction, estimate_accuracy, estimate_coverage
from .nets import MlpNet, cross_entropy, softmax


@dataclass
class LinearClassifier:
    """Multinomial logistic regression fit by full-batch gradient descent."""

    weights: np.ndarray  # C x d
    bias: np.ndarray  # C
    trained_on: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def predict_proba_many(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise DimensionMismatch(f"expected dim {self.dim}, got {x.shape[1]}")
        return softmax(x @ self.weights.T + self.bias)

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return self.predict_proba_many(features)[0]


def predict_proba(clf, features: np.ndarray) -> np.ndarray:
    """Distribution over classes for one feature vector."""
    return clf.predict_proba(np.asarray(features, dtype=float))


def fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    epochs: int = 300,
    lr: float = 0.5,
    l2: float = 1e-3,
) -> LinearClassifier:
    """Zero-initialized full-batch GD on cross-entropy + L2 (bias unpenalized)."""
    n, d = x.shape
    w = np.zeros((num_classes, d))
    b = np.zeros(num_classes)
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), y] = 1.0
    history = []
    for _ in range(epochs):
        probs = softmax(x @ w.T + b)
        loss = cross_entropy(probs, onehot) + 0.5 * l2 * float(np.sum(w * w))
        history.append(loss)
        err = (probs - onehot) / n
        w -= lr * (err.T @ x + l2 * w)
        b -= lr * err.sum(axis=0)
    return LinearClassifier(weights=w, bias=b, loss_history=history)


def train_candidate(
    seed: list[LabeledExample],
    featurizer,
    subsample_size: int,
    rng_seed: int,
    epochs: int = 300,
    lr: float = 0.5,
    l2: float = 1e-3,
    head_width: int = 0,
    num_classes: int | None = None,
):
    """Train one candidate on a without-replacement seed subsample.

    The subsample must contain at least two classes; up to 10 redraws are
    attempted before DegenerateSubsample. head_width 0 is the logistic head,
    anything larger a one-hidden-layer ReLU head of that width.
    """
    n = len(seed)
    if not 1 <= subsample_size <= n:
        raise ValueError("subsample_size must be in [1, len(seed)]")
    gold = np.array([ex.gold for ex in seed])
    rng = np.random.default_rng(rng_seed)
    idx = None
    for _ in range(10):
        cand = rng.permutation(n)[:subsample_size] if subsample_size < n else np.arange(n)
        if len(set(gold[cand].tolist())) >= 2:
            idx = np.sort(cand)
            break
        if subsample_size == n:
            break
    if idx is None:
        raise DegenerateSubsample(f"no 2-class subsample of size {subsample_size} found")

    if num_classes is None:
        num_classes = max(int(gold.max()) + 1, 2)
    x = featurizer.transform_many([seed[i].doc for i in idx])
    y = gold[idx]
    descriptor = {"indices": idx.tolist(), "rng_seed": rng_seed, "head_width": head_width}
    if head_width == 0:
        clf = fit_logistic(x, y, num_classes, epochs=epochs, lr=lr, l2=l2)
        clf.trained_on = descriptor
        return clf
    onehot = np.zeros((len(y), num_classes))
    onehot[np.arange(len(y)), y] = 1.0
    net = MlpNet(x.shape[1], head_width, num_classes, rng_seed=rng_seed)
    net.fit(x, onehot, epochs=epochs, lr=min(lr, 0.1), l2=l2, shuffle_seed=rng_seed)
    net.trained_on = descriptor
    return net


def whm(precision: float, coverage: float, beta: float) -> float:
    """Weighted harmonic mean (1+b^2) p c / (b^2 p + c); 0 on a zero denominator."""
    denom = beta * beta * precision + coverage
    if denom == 0:
        return 0.0
    return (1.0 + beta * beta) * precision * coverage / denom


@dataclass
class CalibratedClassifierLF:
    """Classifier + featurization + confidence threshold omega.

    Votes argmax when the max class probability strictly exceeds omega,
    abstains otherwise (omega 0 means the LF always votes).
    """

    classifier: object
    featurizer: object
    omega: float = 0.0

    def apply(self, doc: Document) -> int:
        probs = self.classifier.predict_proba_many(
            self.featurizer.transform(doc)[None, :]
        )[0]
        top = int(np.argmax(probs))
        return top if float(probs[top]) > self.omega else ABSTAIN

    def apply_many(self, docs: list[Document]) -> np.ndarray:
        if not docs:
            return np.zeros(0, dtype=int)
        probs = self.classifier.predict_proba_many(self.featurizer.transform_many(docs))
        votes = probs.argmax(axis=1)
        votes[probs.max(axis=1) <= self.omega] = ABSTAIN
        return votes

    def describe(self) -> dict:
        return {
            "omega": self.omega,
            "featurization": self.featurizer.describe(),
            "trained_on": getattr(self.classifier, "trained_on", {}),
        }


@dataclass
class CalibrationCurve:
    grid: list[tuple[float, float, float, float]]  # (omega, precision, coverage, whm)
    best_omega: float
    beta: float

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("omega,precision,coverage,whm\n")
            for omega, prec, cov, score in self.grid:
                fh.write(f"{omega},{prec},{cov},{score}\n")


def threshold_grid(grid_step: float) -> list[float]:
    if not 0 < grid_step <= 1:
        raise ValueError("grid_step must be in (0, 1]")
    steps = int(math.floor(1.0 / grid_step + 1e-9))
    grid = [k * grid_step for k in range(steps + 1)]
    if grid[-1] < 1.0 - 1e-12:
        grid.append(1.0)
    return grid


def calibrate_threshold(
    clf_lf: CalibratedClassifierLF,
    seed: list[LabeledExample],
    unlabeled: list[Document],
    beta: float,
    grid_step: float = 0.01,
) -> CalibrationCurve:
    """Pick omega maximizing WHM(precision, coverage) over the threshold grid.

    Precision comes from the seed; coverage from the unlabeled pool when the
    seed is small (< 50 examples), from the seed otherwise. Ties resolve to
    the smallest omega so coverage is never given up for free.
    """
    if not seed:
        raise ValueError("calibration needs a non-empty seed set")
    probs = clf_lf.classifier.predict_proba_many(
        clf_lf.featurizer.transform_many([ex.doc for ex in seed])
    )
    max_seed = probs.max(axis=1)
    correct = probs.argmax(axis=1) == np.array([ex.gold for ex in seed])

    if len(seed) < 50 and unlabeled:
        cov_probs = clf_lf.classifier.predict_proba_many(
            clf_lf.featurizer.transform_many(unlabeled)
        )
        max_cov = cov_probs.max(axis=1)
    else:
        max_cov = max_seed

    grid = []
    best_omega, best_score = 0.0, -1.0
    for omega in threshold_grid(grid_step):
        voted = max_seed > omega
        prec = float(np.sum(correct & voted)) / (float(np.sum(voted)) + EPS)
        cov = float(np.mean(max_cov > omega))
        score = whm(prec, cov, beta)
        grid.append((omega, prec, cov, score))
        if score > best_score + 1e-15:
            best_score, best_omega = score, omega
    clf_lf.omega = best_omega
    return CalibrationCurve(grid=grid, best_omega=best_omega, beta=beta)


def synthesize_candidates(
    category: Category,
    dataset: Dataset,
    count: int,
    config,
    featurizers: list | None = None,
    base_seed: int | None = None,
) -> tuple[list[LabelFunction], list[dict]]:
    """Produce ``count`` calibrated classifier LFs for one category.

    Candidate k trains on the subsample drawn with rng seed base_seed + k and
    takes its variation (n-gram range and regularization for structural, head
    width for semantic) round-robin from the config lists. Degenerate
    subsamples are skipped, not fatal; skips come back as report dicts.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if category not in (Category.STRUCTURAL, Category.SEMANTIC):
        raise ValueError("synthesize_candidates handles structural/semantic only")
    if featurizers is None:
        featurizers = build_featurizers(category, dataset, config)
    base = config.base_seed if base_seed is None else base_seed
    training = config.candidate_training
    regs = training["regularizations"]
    widths = training["semantic_head_widths"]
    fractions = training["subsample_fractions"]
    n_l = len(dataset.seed)

    lfs: list[LabelFunction] = []
    skips: list[dict] = []
    for k in range(1, count + 1):
        rng_seed = base + k
        fraction = fractions[(k - 1) % len(fractions)]
        subsample_size = min(max(int(math.ceil(fraction * n_l)), 1), n_l)
        if category == Category.STRUCTURAL:
            featurizer = featurizers[(k - 1) % len(featurizers)]
            l2 = regs[(k - 1) % len(regs)]
            width = 0
        else:
            featurizer = featurizers[(k - 1) % len(featurizers)]
            l2 = training["l2"]
            width = widths[(k - 1) % len(widths)]
        try:
            clf = train_candidate(
                dataset.seed,
                featurizer,
                subsample_size,
                rng_seed,
                epochs=training["epochs"] if width == 0 else training["mlp_epochs"],
                lr=training["lr"] if width == 0 else training["mlp_lr"],
                l2=l2,
                head_width=width,
                num_classes=dataset.labels.num_classes,
            )
        except DegenerateSubsample as exc:
            skips.append({"candidate": k, "rng_seed": rng_seed, "reason": str(exc)})
            continue
        clf_lf = CalibratedClassifierLF(classifier=clf, featurizer=featurizer)
        calibrate_threshold(
            clf_lf, dataset.seed, dataset.unlabeled, config.beta, config.grid_step
        )
        if not config.abstain_enabled:
            clf_lf.omega = 0.0
        lf = LabelFunction(
            id=f"{category.value}-s{rng_seed:05d}",
            category=category,
            rule=clf_lf,
            threshold=clf_lf.omega,
            meta={
                "l2": l2,
                "head_width": width,
                "subsample_size": subsample_size,
                "featurization": featurizer.describe(),
            },
        )
        lf.est_accuracy = estimate_accuracy(lf, dataset.seed)
        lf.est_coverage = estimate_coverage(lf, dataset.unlabeled)
        lfs.append(lf)
    return lfs, skips


def build_featurizers(category: Category, dataset: Dataset, config) -> list:
    """Fit the featurizer variants a category's candidates draw from."""
    from .features import (
        EmbeddingFeaturizer,
        HashingEmbedder,
        RemoteEmbedder,
        TfidfFeaturizer,
        Tokenizer,
        fit_tfidf,
    )

    if category == Category.STRUCTURAL:
        tokenizer = Tokenizer(min_token_len=config.tfidf["min_token_len"])
        out = []
        for ngram_range in config.tfidf["ngram_ranges"]:
            model = fit_tfidf(
                dataset.unlabeled,
                tokenizer=tokenizer,
                ngram_range=tuple(ngram_range),
                min_df=config.tfidf["min_df"],
            )
            out.append(TfidfFeaturizer(model))
        return out
    if config.embedding["kind"] == "hashing":
        provider = HashingEmbedder(dim=config.embedding["dim"])
    else:
        provider = RemoteEmbedder(
            endpoint=config.embedding["endpoint"],
            model=config.embedding["model"],
            dim=config.embedding["dim"],
            cache_path=config.embedding.get("cache_path"),
        )
    return [EmbeddingFeaturizer(provider)]
