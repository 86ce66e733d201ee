"""Command-line entry point: run, sweep, eval, gen-synth."""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
import time

from .config import PipelineConfig
from .corpus import LabeledExample, LabelSpace, load_dataset, save_dataset
from .errors import IdAlignment, LabelForgeError
from .label_model import load_labels_jsonl
from .metrics import label_quality, weighted_f1, write_report_json
from .pipeline import StageError, run_pipeline
from .synth import make_noisy_corpus, make_separable_corpus

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_ALIGNMENT = 3


def _write_error(out_dir: str, stage: str, error: Exception) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as fh:
            json.dump({"stage": stage, "error": str(error)}, fh, indent=2)
            fh.write("\n")
    except OSError:
        pass


def _load_inputs(args) -> tuple[PipelineConfig, object]:
    config = PipelineConfig.load(args.config)
    if args.seed_override is not None:
        config.base_seed = args.seed_override
    if not os.path.exists(args.data):
        raise FileNotFoundError(f"dataset file not found: {args.data}")
    if config.class_names:
        labels = LabelSpace(tuple(config.class_names))
    else:
        labels = _infer_labels(args.data, args.data_format)
    dataset = load_dataset(args.data, args.data_format, labels)
    return config, dataset


def _infer_labels(path: str, fmt: str) -> LabelSpace:
    names: set[str] = set()
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    if rec.get("label"):
                        names.add(rec["label"])
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                if row.get("label"):
                    names.add(row["label"])
    return LabelSpace(tuple(sorted(names)))


def cmd_run(args) -> int:
    try:
        config, dataset = _load_inputs(args)
    except (OSError, LabelForgeError, ValueError) as exc:
        _write_error(args.out, "ingest", exc)
        return EXIT_INPUT
    try:
        summary = run_pipeline(
            config,
            dataset,
            args.out,
            dataset_name=args.dataset_name or os.path.basename(args.data),
            dataset_path=args.data,
        )
    except StageError as exc:
        _write_error(args.out, exc.stage, exc.cause)
        return EXIT_FAILURE
    print(json.dumps({k: summary[k] for k in
                      ("dataset", "coverage", "label_quality", "e2e_f1", "config_hash")}))
    return EXIT_OK


def _parse_sweep_value(param: str, raw: str):
    if param in ("alpha", "beta"):
        return float(raw)
    if param == "k":
        return int(raw)
    if param == "abstain":
        if raw.lower() in ("on", "true", "1"):
            return True
        if raw.lower() in ("off", "false", "0"):
            return False
        raise ValueError(f"abstain value must be on/off, got {raw!r}")
    raise ValueError(f"unknown sweep parameter {param!r}")


def _apply_sweep_value(config: PipelineConfig, param: str, value) -> PipelineConfig:
    cfg = copy.deepcopy(config)
    if param == "alpha":
        cfg.alpha = value
    elif param == "beta":
        cfg.beta = value
    elif param == "k":
        cfg.k_per_category = {c: value for c in cfg.k_per_category}
    elif param == "abstain":
        cfg.abstain_enabled = value
    return cfg


def cmd_sweep(args) -> int:
    raw_values = [v for v in args.values.split(",") if v != ""]
    if not raw_values:
        _write_error(args.out, "sweep", ValueError("no sweep values given"))
        return EXIT_INPUT
    try:
        values = [_parse_sweep_value(args.param, v) for v in raw_values]
        config, dataset = _load_inputs(args)
    except (OSError, LabelForgeError, ValueError) as exc:
        _write_error(args.out, "sweep", exc)
        return EXIT_INPUT

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for raw, value in zip(raw_values, values):
        run_dir = os.path.join(args.out, f"{args.param}={raw}")
        cfg = _apply_sweep_value(config, args.param, value)
        start = time.perf_counter()
        row = {"param": args.param, "value": raw, "status": "ok"}
        try:
            summary = run_pipeline(
                cfg,
                dataset,
                run_dir,
                dataset_name=args.dataset_name or os.path.basename(args.data),
                dataset_path=args.data,
            )
            row.update(
                coverage=summary["coverage"],
                label_quality=summary["label_quality"],
                e2e_f1=summary["e2e_f1"],
            )
        except StageError as exc:
            _write_error(run_dir, exc.stage, exc.cause)
            row.update(coverage="", label_quality="", e2e_f1="", status="error")
        row["wall_time_s"] = round(time.perf_counter() - start, 3)
        rows.append(row)

    sweep_csv = os.path.join(args.out, "sweep.csv")
    fields = ["param", "value", "coverage", "label_quality", "e2e_f1", "wall_time_s", "status"]
    with open(sweep_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"sweep complete: {sweep_csv}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        if not os.path.exists(args.labels) or not os.path.exists(args.data):
            raise FileNotFoundError("labels or dataset file missing")
        labels_space = _infer_labels(args.data, args.data_format)
        dataset = load_dataset(args.data, args.data_format, labels_space)
        probs, doc_ids = load_labels_jsonl(args.labels, labels_space)
    except (OSError, LabelForgeError, ValueError) as exc:
        _write_error(os.path.dirname(args.out) or ".", "eval", exc)
        return EXIT_INPUT

    gold_map = dict(dataset.unlabeled_gold)
    for ex in list(dataset.seed) + list(dataset.test):
        gold_map.setdefault(ex.doc.id, ex.gold)
    if set(doc_ids) - set(gold_map):
        _write_error(os.path.dirname(args.out) or ".", "eval", IdAlignment("labels reference unknown doc ids"))
        return EXIT_ALIGNMENT

    covered = [p.covered for p in probs]
    coverage_val = sum(covered) / len(covered) if covered else 0.0
    pred, truth = [], []
    for p, doc_id in zip(probs, doc_ids):
        if p.covered:
            pred.append(int(p.dist.argmax()))
            truth.append(gold_map[doc_id])
    if pred:
        per_class, weighted = weighted_f1(pred, truth, labels_space.num_classes)
    else:
        per_class, weighted = [0.0] * labels_space.num_classes, 0.0
    report = {
        "coverage": coverage_val,
        "per_class_f1": per_class,
        "weighted_f1": weighted,
        "label_quality": label_quality(coverage_val, weighted),
        "n_evaluated": len(pred),
    }
    write_report_json(args.out, report)
    print(json.dumps(report))
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    made = {}
    if args.kind in ("separable", "both"):
        ds = make_separable_corpus(args.seed)
        path = os.path.join(args.out, "separable.jsonl")
        save_dataset(ds, path)
        made["separable"] = path
    if args.kind in ("noisy", "both"):
        ds = make_noisy_corpus(args.seed)
        path = os.path.join(args.out, "noisy.jsonl")
        save_dataset(ds, path)
        made["noisy"] = path
    print(json.dumps(made))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labelforge")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the full pipeline on one dataset")
    run.add_argument("--config", required=True)
    run.add_argument("--data", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--data-format", default="jsonl", choices=["jsonl", "csv"])
    run.add_argument("--seed-override", type=int, default=None)
    run.add_argument("--dataset-name", default="")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="re-run the pipeline across one parameter")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--data", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--param", required=True, choices=["alpha", "beta", "k", "abstain"])
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--data-format", default="jsonl", choices=["jsonl", "csv"])
    sweep.add_argument("--seed-override", type=int, default=None)
    sweep.add_argument("--dataset-name", default="")
    sweep.set_defaults(func=cmd_sweep)

    evl = sub.add_parser("eval", help="score an exported labels file against gold")
    evl.add_argument("--labels", required=True)
    evl.add_argument("--data", required=True)
    evl.add_argument("--out", required=True)
    evl.add_argument("--data-format", default="jsonl", choices=["jsonl", "csv"])
    evl.set_defaults(func=cmd_eval)

    synth = sub.add_parser("gen-synth", help="emit the bundled synthetic corpora")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--kind", default="both", choices=["separable", "noisy", "both"])
    synth.set_defaults(func=cmd_gen_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
