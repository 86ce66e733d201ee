"""End-to-end run orchestration: explore, exploit, aggregate, train, score.

Produces the full artifact set for one configured run: LF pool JSON, label
matrix CSV, probabilistic labels JSONL, evaluation report, results-ledger row
and a run manifest with per-stage timings.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

from . import metrics as metrics_mod
from .candidates import build_featurizers, synthesize_candidates
from .config import PipelineConfig, RunManifest, file_digest
from .corpus import Dataset, LabeledExample
from .downstream import (
    DownstreamConfig,
    evaluate_e2e,
    export_predictions_jsonl,
    train_downstream,
)
from .errors import LabelForgeError, ProviderUnreachable, MalformedProviderReply
from .exploitation import run_exploitation_loop
from .features import TfidfFeaturizer, Tokenizer, fit_tfidf
from .label_model import (
    DawidSkene,
    MajorityVote,
    WeightedMajorityVote,
    aggregate,
    export_labels_jsonl,
)
from .lf_core import Category, LabelFunction, build_label_matrix
from .surface import (
    GenerationRequest,
    OfflineSeededProvider,
    RemoteLlmProvider,
    generate_surface_lfs,
)


class StageError(LabelForgeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class _Timings:
    seconds: dict

    def stage(self, name: str):
        timings = self.seconds

        class _Ctx:
            def __enter__(self):
                self.start = time.perf_counter()
                return self

            def __exit__(self, exc_type, exc, tb):
                timings[name] = timings.get(name, 0.0) + time.perf_counter() - self.start
                if exc is not None and not isinstance(exc, StageError):
                    raise StageError(name, exc) from exc
                return False

        return _Ctx()


def build_provider(config: PipelineConfig, dataset: Dataset):
    choice = config.provider
    if choice["kind"] == "offline_seeded":
        return OfflineSeededProvider(
            rng_seed=choice.get("rng_seed", config.base_seed),
            top_t=choice.get("top_t", 5),
        )
    return RemoteLlmProvider(
        endpoint=choice.get("endpoint"),
        model=choice.get("model"),
        timeout=choice.get("timeout", 60.0),
        retries=choice.get("retries", 3),
        labels=dataset.labels,
    )


def build_generators(config: PipelineConfig, dataset: Dataset, featurizers: dict):
    """Per-category generation closures for the exploitation loop."""
    provider = build_provider(config, dataset)
    request = GenerationRequest(
        task_description=config.task_description,
        class_names=dataset.labels.class_names,
        examples=tuple((ex.doc.text, dataset.labels.name_of(ex.gold)) for ex in dataset.seed),
        count=config.candidates_per_round,
    )
    skip_sink: list[dict] = []

    def surface_gen(round_index: int, hint):
        try:
            rules = generate_surface_lfs(provider, request, round_index=round_index)
        except (ProviderUnreachable, MalformedProviderReply) as exc:
            skip_sink.append({"category": "surface", "round": round_index, "reason": str(exc)})
            return []
        return [
            LabelFunction(
                id=f"surface-r{round_index:02d}-c{k:02d}",
                category=Category.SURFACE,
                rule=rule,
                meta={"round": round_index},
            )
            for k, rule in enumerate(rules)
        ]

    def classifier_gen(category: Category):
        def gen(round_index: int, hint):
            lfs, skips = synthesize_candidates(
                category,
                dataset,
                config.candidates_per_round,
                config,
                featurizers=featurizers[category],
                base_seed=config.base_seed + 1000 * round_index,
            )
            for skip in skips:
                skip.update({"category": category.value, "round": round_index})
            skip_sink.extend(skips)
            return lfs

        return gen

    generators = {
        Category.SURFACE: surface_gen,
        Category.STRUCTURAL: classifier_gen(Category.STRUCTURAL),
        Category.SEMANTIC: classifier_gen(Category.SEMANTIC),
    }
    return generators, skip_sink


def label_model_kind(config: PipelineConfig, lfs: list[LabelFunction]):
    choice = config.label_model
    kind = choice.get("kind", "majority_vote")
    if kind == "majority_vote":
        return MajorityVote()
    if kind == "weighted_majority_vote":
        weights = choice.get("weights")
        if weights is None:
            weights = [lf.est_accuracy or 0.0 for lf in lfs]
        return WeightedMajorityVote(weights=tuple(weights))
    if kind == "dawid_skene":
        return DawidSkene(
            max_iter=choice.get("max_iter", 100), tol=choice.get("tol", 1e-6)
        )
    raise ValueError(f"unknown label model kind: {kind!r}")


def downstream_featurizer(config: PipelineConfig, dataset: Dataset, structural: list):
    target = tuple(config.downstream["ngram_range"])
    for featurizer in structural:
        if tuple(featurizer.model.ngram_range) == target:
            return featurizer
    tokenizer = Tokenizer(min_token_len=config.tfidf["min_token_len"])
    model = fit_tfidf(
        dataset.unlabeled, tokenizer=tokenizer, ngram_range=target,
        min_df=config.tfidf["min_df"],
    )
    return TfidfFeaturizer(model)


def run_pipeline(
    config: PipelineConfig,
    dataset: Dataset,
    out_dir: str,
    dataset_name: str = "dataset",
    dataset_path: str | None = None,
) -> dict:
    """Execute every stage and write artifacts; returns the summary dict."""
    os.makedirs(out_dir, exist_ok=True)
    timings = _Timings(seconds={})
    manifest = RunManifest(config_hash=config.config_hash())
    if dataset_path:
        manifest.input_digests["dataset"] = file_digest(dataset_path)

    with timings.stage("featurize"):
        featurizers = {
            Category.STRUCTURAL: build_featurizers(Category.STRUCTURAL, dataset, config),
            Category.SEMANTIC: build_featurizers(Category.SEMANTIC, dataset, config),
        }
        end_featurizer = downstream_featurizer(
            config, dataset, featurizers[Category.STRUCTURAL]
        )

    with timings.stage("explore_exploit"):
        generators, skip_sink = build_generators(config, dataset, featurizers)
        pool, reports = run_exploitation_loop(dataset, config, generators)
        pool.skip_reports.extend(skip_sink)

    with timings.stage("matrix"):
        lfs = pool.all_lfs()
        matrix = build_label_matrix(lfs, dataset.unlabeled)

    with timings.stage("aggregate"):
        kind = label_model_kind(config, lfs)
        probs = aggregate(matrix, kind, dataset.labels)

    with timings.stage("metrics"):
        labeling_report = None
        gold_ids = set(dataset.unlabeled_gold)
        if gold_ids and gold_ids == set(matrix.row_ids):
            gold = [
                LabeledExample(doc=doc, gold=dataset.unlabeled_gold[doc.id])
                for doc in dataset.unlabeled
            ]
            labeling_report = metrics_mod.evaluate_labeling(matrix, probs, gold)

    with timings.stage("downstream"):
        ds_cfg = DownstreamConfig(
            hidden=config.downstream["hidden"],
            epochs=config.downstream["epochs"],
            batch_size=config.downstream["batch_size"],
            lr=config.downstream["lr"],
            mode=config.downstream["mode"],
            rng_seed=config.base_seed,
        )
        clf = train_downstream(probs, dataset.unlabeled, end_featurizer, ds_cfg)
        e2e_report = evaluate_e2e(clf, dataset.test) if dataset.test else None

    with timings.stage("write"):
        paths = {
            "lf_pool": os.path.join(out_dir, "lf_pool.json"),
            "filter_reports": os.path.join(out_dir, "filter_reports.json"),
            "label_matrix": os.path.join(out_dir, "label_matrix.csv"),
            "labels": os.path.join(out_dir, "labels.jsonl"),
            "model": os.path.join(out_dir, "model.json"),
            "report": os.path.join(out_dir, "report.json"),
            "manifest": os.path.join(out_dir, "manifest.json"),
            "ledger": os.path.join(out_dir, "ledger.csv"),
        }
        clf.checkpoint(paths["model"], config_hash=config.config_hash())
        if dataset.test:
            paths["predictions"] = os.path.join(out_dir, "predictions.jsonl")
            export_predictions_jsonl(
                paths["predictions"], clf, [ex.doc for ex in dataset.test], dataset.labels
            )
        with open(paths["lf_pool"], "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "rounds": pool.round,
                    "counts": pool.counts(),
                    "skip_reports": pool.skip_reports,
                    "lfs": [lf.describe() for lf in lfs],
                },
                fh, indent=2, sort_keys=True,
            )
        with open(paths["filter_reports"], "w", encoding="utf-8") as fh:
            json.dump([r.to_json() for r in reports], fh, indent=2, sort_keys=True)
        matrix.to_csv(paths["label_matrix"])
        export_labels_jsonl(paths["labels"], probs, matrix.row_ids, dataset.labels)

        summary = {
            "dataset": dataset_name,
            "config_hash": config.config_hash(),
            "pool_counts": pool.counts(),
            "rounds": pool.round,
            "coverage": labeling_report.coverage if labeling_report else None,
            "weighted_f1": labeling_report.weighted_f1 if labeling_report else None,
            "label_quality": labeling_report.label_quality if labeling_report else None,
            "e2e_f1": e2e_report.weighted_f1 if e2e_report else None,
            "labeling_report": labeling_report.to_json() if labeling_report else None,
            "e2e_report": e2e_report.to_json() if e2e_report else None,
        }
        metrics_mod.write_report_json(paths["report"], summary)
        metrics_mod.append_ledger_row(
            paths["ledger"],
            {
                "dataset": dataset_name,
                "coverage": summary["coverage"],
                "weighted_f1": summary["weighted_f1"],
                "label_quality": summary["label_quality"],
                "e2e_f1": summary["e2e_f1"],
                "config_hash": summary["config_hash"],
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            },
        )
        manifest.stage_seconds = dict(timings.seconds)
        manifest.artifacts = paths
        manifest.write_atomic(paths["manifest"])

    summary["stage_seconds"] = timings.seconds
    summary["artifacts"] = paths
    return summary
