"""Exploitation: intra/inter filtering, redundancy checks, and loop-back.

Candidates survive intra-type filtering when their estimated accuracy reaches
alpha times the best in their category, then a relaxed global threshold (half
the largest intra threshold) prunes extreme underperformers across
categories. Under-filled categories trigger further generation rounds until
every category holds its target count or the round budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset, Document
from .lf_core import (
    ABSTAIN,
    CATEGORIES,
    Category,
    LabelFunction,
    apply_lf_many,
    build_label_matrix,
    estimate_accuracy,
    estimate_coverage,
)
from .surface import surface_similarity

DEDUP_SAMPLE_SEED = 7351


@dataclass
class LfPool:
    by_category: dict[Category, list[LabelFunction]] = field(
        default_factory=lambda: {c: [] for c in CATEGORIES}
    )
    round: int = 0
    skip_reports: list[dict] = field(default_factory=list)

    def all_lfs(self) -> list[LabelFunction]:
        out: list[LabelFunction] = []
        for cat in CATEGORIES:
            out.extend(self.by_category[cat])
        return out

    def counts(self) -> dict[str, int]:
        return {c.value: len(self.by_category[c]) for c in CATEGORIES}


@dataclass
class FilterReport:
    round: int
    theta_intra: dict[str, float]
    theta_inter: float
    removed_intra: list[tuple[str, float]]
    removed_inter: list[tuple[str, float]]
    removed_duplicate: list[tuple[str, str, float]]
    generated: dict[str, int]
    kept: dict[str, int]
    shortfall: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "theta_intra": self.theta_intra,
            "theta_inter": self.theta_inter,
            "removed_intra": [{"id": i, "acc": a} for i, a in self.removed_intra],
            "removed_inter": [{"id": i, "acc": a} for i, a in self.removed_inter],
            "removed_duplicate": [
                {"id": i, "similar_to": j, "similarity": s}
                for i, j, s in self.removed_duplicate
            ],
            "generated": self.generated,
            "kept": self.kept,
            "shortfall": self.shortfall,
        }


@dataclass
class CoverageHint:
    """Diagnostic feedback for generators: where votes are missing on D."""

    fraction_uncovered: float
    per_class_vote_share: dict[int, float]


def intra_filter(
    pool_c: list[LabelFunction], alpha: float
) -> tuple[list[LabelFunction], list[LabelFunction], float]:
    """Keep LFs whose accuracy reaches alpha times the category maximum."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must be in [0, 1]")
    if not pool_c:
        return [], [], 0.0
    theta = alpha * max(lf.est_accuracy for lf in pool_c)
    kept = [lf for lf in pool_c if lf.est_accuracy >= theta]
    removed = [lf for lf in pool_c if lf.est_accuracy < theta]
    return kept, removed, theta


def inter_filter(
    pools: dict[Category, list[LabelFunction]], thetas: dict[Category, float]
) -> tuple[dict[Category, list[LabelFunction]], list[LabelFunction], float]:
    """Drop LFs everywhere below half the largest intra-type threshold."""
    theta_inter = 0.5 * max(thetas.values(), default=0.0)
    kept: dict[Category, list[LabelFunction]] = {}
    removed: list[LabelFunction] = []
    for cat, pool in pools.items():
        kept[cat] = [lf for lf in pool if lf.est_accuracy >= theta_inter]
        removed.extend(lf for lf in pool if lf.est_accuracy < theta_inter)
    return kept, removed, theta_inter


def output_agreement(a: LabelFunction, b: LabelFunction, docs: list[Document]) -> float:
    """Agreement over docs where either LF votes; abstention counts as disagreement."""
    va = apply_lf_many(a, docs)
    vb = apply_lf_many(b, docs)
    either = (va != ABSTAIN) | (vb != ABSTAIN)
    if not either.any():
        return 0.0
    agree = (va == vb) & (va != ABSTAIN)
    return float(np.sum(agree)) / float(np.sum(either))


def deduplicate(
    pool_c: list[LabelFunction],
    existing: list[LabelFunction],
    tau: float,
    docs: list[Document],
) -> tuple[list[LabelFunction], list[tuple[str, str, float]]]:
    """Drop candidates too similar to any already-accepted LF.

    Surface rules compare by pattern Jaccard; classifier rules by output
    agreement on the doc sample.
    """
    if not 0 < tau <= 1:
        raise ValueError("tau must be in (0, 1]")
    novel: list[LabelFunction] = []
    dropped: list[tuple[str, str, float]] = []
    for cand in pool_c:
        duplicate_of = None
        similarity = 0.0
        for accepted in existing:
            if cand.category == Category.SURFACE:
                sim = surface_similarity(cand.rule, accepted.rule)
            else:
                sim = output_agreement(cand, accepted, docs)
            if sim >= tau:
                duplicate_of, similarity = accepted.id, sim
                break
        if duplicate_of is None:
            novel.append(cand)
        else:
            dropped.append((cand.id, duplicate_of, similarity))
    return novel, dropped


def dedup_doc_sample(dataset: Dataset, sample_size: int = 500) -> list[Document]:
    """Fixed-seed sample of unlabeled docs for output-agreement checks."""
    docs = dataset.unlabeled
    if len(docs) <= sample_size:
        return list(docs)
    rng = np.random.default_rng(DEDUP_SAMPLE_SEED)
    idx = rng.permutation(len(docs))[:sample_size]
    return [docs[i] for i in np.sort(idx)]


def coverage_hint(pool: LfPool, dataset: Dataset) -> CoverageHint | None:
    lfs = pool.all_lfs()
    if not lfs:
        return None
    matrix = build_label_matrix(lfs, dataset.unlabeled)
    voted = matrix.entries != ABSTAIN
    covered_rows = voted.any(axis=1)
    fraction_uncovered = 1.0 - float(np.mean(covered_rows))
    share: dict[int, float] = {}
    n_covered = int(np.sum(covered_rows))
    if n_covered:
        num_classes = dataset.labels.num_classes
        for i in np.flatnonzero(covered_rows):
            row = matrix.entries[i]
            counts = np.bincount(row[row != ABSTAIN], minlength=num_classes)
            top = int(np.argmax(counts))
            share[top] = share.get(top, 0) + 1
        share = {c: v / n_covered for c, v in share.items()}
    return CoverageHint(fraction_uncovered=fraction_uncovered, per_class_vote_share=share)


def _ensure_estimates(lfs: list[LabelFunction], dataset: Dataset) -> None:
    for lf in lfs:
        if lf.est_accuracy is None:
            lf.est_accuracy = estimate_accuracy(lf, dataset.seed)
        if lf.est_coverage is None:
            lf.est_coverage = estimate_coverage(lf, dataset.unlabeled)


def run_exploitation_loop(
    dataset: Dataset, config, generators: dict[Category, object]
) -> tuple[LfPool, list[FilterReport]]:
    """Generate-filter rounds until every category holds K_c LFs.

    generators maps category -> closure(round_index, hint) returning candidate
    LabelFunctions (estimates may be unset; they are filled here). Each round:
    generate for under-filled categories, dedup against accepted, intra-filter
    per category, inter-filter globally, truncate to top-K_c by accuracy with
    lexicographic id tie-break. Terminates after max_rounds regardless.
    """
    targets = {c: int(config.k_per_category[c.value]) for c in CATEGORIES}
    if any(k < 1 for k in targets.values()):
        raise ValueError("k_per_category targets must be >= 1")
    if config.max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")

    pool = LfPool()
    reports: list[FilterReport] = []
    sample = dedup_doc_sample(dataset, config.dedup_sample_size)

    for round_index in range(config.max_rounds):
        pool.round = round_index + 1
        hint = coverage_hint(pool, dataset)
        generated: dict[str, int] = {}
        dropped_dups: list[tuple[str, str, float]] = []
        combined: dict[Category, list[LabelFunction]] = {}

        for cat in CATEGORIES:
            kept_c = pool.by_category[cat]
            combined[cat] = list(kept_c)
            if len(kept_c) >= targets[cat] or cat not in generators:
                generated[cat.value] = 0
                continue
            candidates = list(generators[cat](round_index, hint))
            generated[cat.value] = len(candidates)
            _ensure_estimates(candidates, dataset)
            novel, dropped = deduplicate(
                candidates, kept_c, config.tau_dup[cat.value], sample
            )
            dropped_dups.extend(dropped)
            combined[cat].extend(novel)

        thetas: dict[Category, float] = {}
        removed_intra: list[tuple[str, float]] = []
        survivors: dict[Category, list[LabelFunction]] = {}
        for cat in CATEGORIES:
            kept, removed, theta = intra_filter(combined[cat], config.alpha)
            thetas[cat] = theta
            survivors[cat] = kept
            removed_intra.extend((lf.id, lf.est_accuracy) for lf in removed)

        survivors, removed_global, theta_inter = inter_filter(survivors, thetas)
        removed_inter = [(lf.id, lf.est_accuracy) for lf in removed_global]

        for cat in CATEGORIES:
            ranked = sorted(survivors[cat], key=lambda lf: (-lf.est_accuracy, lf.id))
            pool.by_category[cat] = ranked[: targets[cat]]

        done = all(len(pool.by_category[c]) >= targets[c] for c in CATEGORIES)
        shortfall = {
            c.value: targets[c] - len(pool.by_category[c])
            for c in CATEGORIES
            if len(pool.by_category[c]) < targets[c]
        }
        reports.append(
            FilterReport(
                round=round_index + 1,
                theta_intra={c.value: thetas[c] for c in CATEGORIES},
                theta_inter=theta_inter,
                removed_intra=removed_intra,
                removed_inter=removed_inter,
                removed_duplicate=dropped_dups,
                generated=generated,
                kept=pool.counts(),
                shortfall=shortfall,
            )
        )
        if done:
            break
    return pool, reports
