import numpy as np
import pytest

from labelforge.corpus import LabelSpace
from labelforge.errors import AllWeightsZero, NoSignal
from labelforge.label_model import (
    DawidSkene,
    MajorityVote,
    ProbabilisticLabel,
    WeightedMajorityVote,
    aggregate,
    export_labels_jsonl,
    fit_dawid_skene,
    hard_labels,
    load_labels_jsonl,
)
from labelforge.lf_core import ABSTAIN, LabelMatrix

LABELS2 = LabelSpace(("pos", "neg"))
LABELS3 = LabelSpace(("a", "b", "c"))


def matrix(rows, prefix="d"):
    entries = np.asarray(rows, dtype=int)
    return LabelMatrix(
        entries=entries,
        row_ids=[f"{prefix}{i}" for i in range(entries.shape[0])],
        col_ids=[f"lf{j}" for j in range(entries.shape[1])],
    )


def test_majority_vote_counts():
    probs = aggregate(matrix([[0, 0, 1, ABSTAIN]]), MajorityVote(), LABELS2)
    assert np.allclose(probs[0].dist, [2 / 3, 1 / 3])
    assert probs[0].covered


def test_all_abstain_row_uniform_uncovered():
    probs = aggregate(matrix([[ABSTAIN, ABSTAIN]]), MajorityVote(), LABELS2)
    assert np.allclose(probs[0].dist, [0.5, 0.5])
    assert not probs[0].covered


def test_weighted_vote_mass():
    kind = WeightedMajorityVote(weights=(1.0, 1.0, 3.0))
    probs = aggregate(matrix([[0, 0, 1]]), kind, LABELS2)
    assert np.allclose(probs[0].dist, [2 / 5, 3 / 5])


def test_weighted_all_zero_raises():
    with pytest.raises(AllWeightsZero):
        aggregate(matrix([[0, 1]]), WeightedMajorityVote(weights=(0.0, 0.0)), LABELS2)


def test_equal_weights_match_majority():
    rng = np.random.default_rng(0)
    rows = rng.integers(-1, 2, size=(50, 5))
    m = matrix(rows.tolist())
    mv = aggregate(m, MajorityVote(), LABELS2)
    wv = aggregate(m, WeightedMajorityVote(weights=(2.0,) * 5), LABELS2)
    for a, b in zip(mv, wv):
        assert np.allclose(a.dist, b.dist)
        assert a.covered == b.covered


def test_weight_scaling_invariance():
    rng = np.random.default_rng(1)
    rows = rng.integers(-1, 2, size=(30, 4))
    weights = tuple(rng.uniform(0.1, 1.0, size=4))
    scaled = tuple(7.3 * w for w in weights)
    m = matrix(rows.tolist())
    a = aggregate(m, WeightedMajorityVote(weights=weights), LABELS2)
    b = aggregate(m, WeightedMajorityVote(weights=scaled), LABELS2)
    for x, y in zip(a, b):
        assert np.allclose(x.dist, y.dist)


def test_majority_vote_permutation_invariant():
    rng = np.random.default_rng(2)
    rows = rng.integers(-1, 2, size=(40, 6))
    m1 = matrix(rows.tolist())
    perm = rng.permutation(6)
    m2 = matrix(rows[:, perm].tolist())
    for a, b in zip(aggregate(m1, MajorityVote(), LABELS2), aggregate(m2, MajorityVote(), LABELS2)):
        assert np.allclose(a.dist, b.dist)


def test_every_output_is_distribution():
    rng = np.random.default_rng(3)
    for kind in (MajorityVote(), WeightedMajorityVote(weights=(0.3, 0.7, 0.1)), DawidSkene()):
        rows = rng.integers(-1, 3, size=(25, 3))
        if not (rows != ABSTAIN).any():
            continue
        probs = aggregate(matrix(rows.tolist()), kind, LABELS3)
        for p in probs:
            assert (p.dist >= 0).all()
            assert p.dist.sum() == pytest.approx(1.0, abs=1e-9)


def test_hard_labels_tie_breaks_to_smallest():
    probs = [
        ProbabilisticLabel(dist=np.array([0.7, 0.3]), covered=True),
        ProbabilisticLabel(dist=np.array([0.5, 0.5]), covered=True),
        ProbabilisticLabel(dist=np.array([0.5, 0.5]), covered=False),
    ]
    assert hard_labels(probs) == [(0, True), (0, True), (0, False)]


# --- Dawid-Skene ---


def brute_force_em(entries, num_classes, n_iter=60, smoothing=1e-6):
    """Naive-loop EM oracle: majority-vote init, abstain skipped, add-delta."""
    entries = np.asarray(entries)
    keep = [i for i in range(entries.shape[0]) if (entries[i] != ABSTAIN).any()]
    entries = entries[keep]
    n, m = entries.shape
    post = np.zeros((n, num_classes))
    for i in range(n):
        votes = [v for v in entries[i] if v != ABSTAIN]
        for v in votes:
            post[i][v] += 1.0
        post[i] = post[i] / post[i].sum() if post[i].sum() else np.full(num_classes, 1 / num_classes)
    priors = np.full(num_classes, 1.0 / num_classes)
    confusion = np.zeros((m, num_classes, num_classes))
    for _ in range(n_iter):
        priors = post.sum(axis=0) + smoothing
        priors = priors / priors.sum()
        for j in range(m):
            counts = np.zeros((num_classes, num_classes))
            for i in range(n):
                if entries[i, j] != ABSTAIN:
                    for c in range(num_classes):
                        counts[c, entries[i, j]] += post[i, c]
            counts += smoothing
            confusion[j] = counts / counts.sum(axis=1, keepdims=True)
        new_post = np.zeros_like(post)
        for i in range(n):
            for c in range(num_classes):
                val = np.log(priors[c])
                for j in range(m):
                    if entries[i, j] != ABSTAIN:
                        val += np.log(confusion[j, c, entries[i, j]] + 1e-300)
                new_post[i, c] = val
            new_post[i] -= new_post[i].max()
            new_post[i] = np.exp(new_post[i])
            new_post[i] /= new_post[i].sum()
        if np.max(np.abs(new_post - post)) < 1e-9:
            post = new_post
            break
        post = new_post
    return priors, confusion, post


def truthful_matrix(num_docs=20, num_classes=2, num_lfs=3, seed=0):
    rng = np.random.default_rng(seed)
    gold = rng.integers(0, num_classes, size=num_docs)
    rows = np.tile(gold[:, None], (1, num_lfs))
    return rows, gold


def test_ds_truthful_lfs_recover_identity():
    rows, gold = truthful_matrix()
    model = fit_dawid_skene(matrix(rows.tolist()), 2, max_iter=100, tol=1e-8)
    assert model.converged
    for j in range(3):
        assert np.allclose(model.confusion[j], np.eye(2), atol=1e-3)
    assert (model.posteriors.argmax(axis=1) == gold).all()


def test_ds_matches_brute_force_oracle_truthful():
    rows, _ = truthful_matrix(seed=3)
    model = fit_dawid_skene(matrix(rows.tolist()), 2, max_iter=60, tol=0.0)
    _, oracle_confusion, oracle_post = brute_force_em(rows, 2, n_iter=60)
    assert np.allclose(model.confusion, oracle_confusion, atol=1e-6)
    assert np.allclose(model.posteriors, oracle_post, atol=1e-6)


def test_ds_constant_lf_confusion_concentrates():
    rng = np.random.default_rng(4)
    gold = rng.integers(0, 2, size=40)
    rows = np.stack([gold, gold, np.zeros_like(gold)], axis=1)
    model = fit_dawid_skene(matrix(rows.tolist()), 2, max_iter=100, tol=1e-9)
    # the constant LF's confusion rows concentrate on column 0
    assert model.confusion[2][:, 0].min() > 0.99
    _, oracle_confusion, _ = brute_force_em(rows, 2, n_iter=100)
    assert np.allclose(model.confusion, oracle_confusion, atol=1e-5)


def test_ds_no_signal():
    with pytest.raises(NoSignal):
        fit_dawid_skene(matrix([[ABSTAIN, ABSTAIN]]), 2)


def test_ds_log_likelihood_nondecreasing():
    rng = np.random.default_rng(5)
    for trial in range(20):
        rows = rng.integers(-1, 2, size=(30, 4))
        if not (rows != ABSTAIN).any():
            continue
        model = fit_dawid_skene(matrix(rows.tolist()), 2, max_iter=40, tol=0.0)
        history = model.log_likelihood_history
        assert all(b >= a - 1e-9 for a, b in zip(history, history[1:]))


def test_ds_abstain_rows_uniform_in_aggregate():
    rows = [[0, 1], [ABSTAIN, ABSTAIN], [1, 1]]
    probs = aggregate(matrix(rows), DawidSkene(), LABELS2)
    assert not probs[1].covered
    assert np.allclose(probs[1].dist, 0.5)
    assert probs[0].covered and probs[2].covered


def heterogeneous_matrix(rng, num_docs=500, accs=(0.9, 0.9, 0.55), coverage=0.7, num_classes=2):
    """Abstention-aware LFs of heterogeneous accuracy: split rows separate
    accuracy-weighting (DS) from unweighted counting (MV)."""
    gold = rng.integers(0, num_classes, size=num_docs)
    cols = []
    for acc in accs:
        votes = gold.copy()
        flip = rng.random(num_docs) >= acc
        for i in np.flatnonzero(flip):
            wrong = [c for c in range(num_classes) if c != gold[i]]
            votes[i] = wrong[int(rng.integers(0, len(wrong)))]
        votes[rng.random(num_docs) >= coverage] = ABSTAIN
        cols.append(votes)
    return np.stack(cols, axis=1), gold


def test_ds_beats_majority_on_heterogeneous_lfs():
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        rows, gold = heterogeneous_matrix(rng)
        m = matrix(rows.tolist())
        mvp = aggregate(m, MajorityVote(), LABELS2)
        dsp = aggregate(m, DawidSkene(), LABELS2)
        covered = np.array([p.covered for p in mvp])
        mv = np.array([h for h, _ in hard_labels(mvp)])
        ds = np.array([h for h, _ in hard_labels(dsp)])
        if (ds[covered] == gold[covered]).mean() >= (mv[covered] == gold[covered]).mean():
            wins += 1
    assert wins >= 18


def test_labels_jsonl_round_trip(tmp_path):
    probs = [
        ProbabilisticLabel(dist=np.array([0.75, 0.25]), covered=True),
        ProbabilisticLabel(dist=np.array([0.5, 0.5]), covered=False),
    ]
    path = str(tmp_path / "labels.jsonl")
    export_labels_jsonl(path, probs, ["d0", "d1"], LABELS2)
    again, doc_ids = load_labels_jsonl(path, LABELS2)
    assert doc_ids == ["d0", "d1"]
    assert np.allclose(again[0].dist, probs[0].dist)
    assert again[1].covered is False
    first = open(path).readline()
    assert '"hard": "pos"' in first
