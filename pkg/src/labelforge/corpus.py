"""Data model and ingestion: label spaces, documents, and dataset splits.

A dataset is made of a large unlabeled pool, a small labeled seed set, and an
optional held-out test split. Records arrive as JSONL or CSV with the schema
{"id", "text", "label"?, "split"?}; gold labels attached to unlabeled records
are kept aside for evaluation only and never enter the labeling pipeline.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from .errors import DuplicateId, EmptySelection, MalformedRecord, UnknownLabel

SPLITS = ("unlabeled", "seed", "test")


@dataclass(frozen=True)
class LabelSpace:
    """Ordered class names; index k maps to class_names[k] for the whole run."""

    class_names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.class_names)
        object.__setattr__(self, "class_names", names)
        if len(names) < 2:
            raise ValueError("a label space needs at least 2 classes")
        if len(set(names)) != len(names) or any(not n for n in names):
            raise ValueError("class names must be unique and non-empty")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def index_of(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise UnknownLabel(name) from None

    def name_of(self, index: int) -> str:
        return self.class_names[index]


@dataclass(frozen=True)
class Document:
    id: str
    text: str  # may be empty; label functions must still handle it


@dataclass(frozen=True)
class LabeledExample:
    doc: Document
    gold: int


@dataclass
class Dataset:
    """Unlabeled pool, labeled seed, optional test split over one label space.

    ``unlabeled_gold`` stashes gold labels that arrived on unlabeled-split
    records. It exists purely so runs on synthetic or benchmark corpora can be
    scored; the labeling pipeline itself never reads it.
    """

    labels: LabelSpace
    unlabeled: list[Document]
    seed: list[LabeledExample]
    test: list[LabeledExample] = field(default_factory=list)
    unlabeled_gold: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.unlabeled:
            raise ValueError("unlabeled pool must be non-empty")
        if not self.seed:
            raise ValueError("seed set must be non-empty")
        seen: set[str] = set()
        for doc in self.all_documents():
            if doc.id in seen:
                raise DuplicateId(doc.id)
            seen.add(doc.id)
        for ex in list(self.seed) + list(self.test):
            if not 0 <= ex.gold < self.labels.num_classes:
                raise ValueError(f"gold label {ex.gold} outside label space")

    def all_documents(self):
        for doc in self.unlabeled:
            yield doc
        for ex in self.seed:
            yield ex.doc
        for ex in self.test:
            yield ex.doc


def _record_from_csv_row(row: dict) -> dict:
    rec = {"id": row.get("id"), "text": row.get("text")}
    if row.get("label"):
        rec["label"] = row["label"]
    if row.get("split"):
        rec["split"] = row["split"]
    return rec


def _iter_records(path: str, fmt: str):
    """Yield (line_number, record dict) pairs from a JSONL or CSV file."""
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedRecord(line_no, str(exc)) from None
                if not isinstance(rec, dict):
                    raise MalformedRecord(line_no, "record is not an object")
                yield line_no, rec
    elif fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for line_no, row in enumerate(reader, start=2):
                yield line_no, _record_from_csv_row(row)
    else:
        raise ValueError(f"unsupported format: {fmt!r}")


def load_dataset(path: str, fmt: str, labels: LabelSpace) -> Dataset:
    """Ingest a JSONL or CSV file into splits.

    Raises MalformedRecord on missing/invalid fields, UnknownLabel when a
    label value does not name a class, DuplicateId on repeated document ids.
    """
    unlabeled: list[Document] = []
    seed: list[LabeledExample] = []
    test: list[LabeledExample] = []
    unlabeled_gold: dict[str, int] = {}
    seen_ids: set[str] = set()

    for line_no, rec in _iter_records(path, fmt):
        doc_id = rec.get("id")
        text = rec.get("text")
        if not isinstance(doc_id, str) or not doc_id:
            raise MalformedRecord(line_no, "missing or empty 'id'")
        if not isinstance(text, str):
            raise MalformedRecord(line_no, "missing 'text'")
        split = rec.get("split", "unlabeled")
        if split not in SPLITS:
            raise MalformedRecord(line_no, f"unknown split {split!r}")
        if doc_id in seen_ids:
            raise DuplicateId(doc_id)
        seen_ids.add(doc_id)

        gold = None
        if "label" in rec and rec["label"] is not None:
            label = rec["label"]
            if not isinstance(label, str):
                raise MalformedRecord(line_no, "'label' must be a string")
            gold = labels.index_of(label)

        doc = Document(id=doc_id, text=text)
        if split == "unlabeled":
            unlabeled.append(doc)
            if gold is not None:
                unlabeled_gold[doc_id] = gold
        else:
            if gold is None:
                raise MalformedRecord(line_no, f"'{split}' record has no label")
            ex = LabeledExample(doc=doc, gold=gold)
            (seed if split == "seed" else test).append(ex)

    return Dataset(
        labels=labels,
        unlabeled=unlabeled,
        seed=seed,
        test=test,
        unlabeled_gold=unlabeled_gold,
    )


def _records_of(dataset: Dataset):
    for doc in dataset.unlabeled:
        rec = {"id": doc.id, "text": doc.text, "split": "unlabeled"}
        if doc.id in dataset.unlabeled_gold:
            rec["label"] = dataset.labels.name_of(dataset.unlabeled_gold[doc.id])
        yield rec
    for split, examples in (("seed", dataset.seed), ("test", dataset.test)):
        for ex in examples:
            yield {
                "id": ex.doc.id,
                "text": ex.doc.text,
                "label": dataset.labels.name_of(ex.gold),
                "split": split,
            }


def save_dataset(dataset: Dataset, path: str, fmt: str = "jsonl") -> None:
    """Write a dataset back out in the ingestion schema (round-trip safe)."""
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for rec in _records_of(dataset):
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["id", "text", "label", "split"])
            writer.writeheader()
            for rec in _records_of(dataset):
                writer.writerow({k: rec.get(k, "") for k in writer.fieldnames})
    else:
        raise ValueError(f"unsupported format: {fmt!r}")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_seed_sample(
    examples: list[LabeledExample],
    fraction: float,
    rng_seed: int,
    stratify: bool = False,
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Split labeled examples into a seed sample and the remainder.

    Sample size is round-half-up of fraction * len(examples); the permutation
    is fixed by rng_seed. With stratify=True the per-class counts follow the
    class proportions (largest-remainder allocation).
    """
    import numpy as np

    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n_total = len(examples)
    n_seed = round_half_up(fraction * n_total)
    if n_seed < 1:
        raise EmptySelection(f"fraction {fraction} of {n_total} examples rounds to 0")
    rng = np.random.default_rng(rng_seed)

    if not stratify:
        order = rng.permutation(n_total)
        picked = set(order[:n_seed].tolist())
    else:
        by_class: dict[int, list[int]] = {}
        for i, ex in enumerate(examples):
            by_class.setdefault(ex.gold, []).append(i)
        classes = sorted(by_class)
        quotas = {c: fraction * len(by_class[c]) for c in classes}
        counts = {c: int(math.floor(quotas[c])) for c in classes}
        short = n_seed - sum(counts.values())
        # hand leftover slots to the largest fractional remainders
        by_remainder = sorted(classes, key=lambda c: (counts[c] - quotas[c], c))
        for c in by_remainder[:max(short, 0)]:
            counts[c] += 1
        picked = set()
        for c in classes:
            idx = np.array(by_class[c])
            take = min(counts[c], len(idx))
            picked.update(idx[rng.permutation(len(idx))[:take]].tolist())
        # rounding drift: top up or trim from a global shuffle
        if len(picked) < n_seed:
            for i in rng.permutation(n_total).tolist():
                if len(picked) >= n_seed:
                    break
                picked.add(i)

    seed = [examples[i] for i in range(n_total) if i in picked]
    remainder = [examples[i] for i in range(n_total) if i not in picked]
    return seed, remainder
