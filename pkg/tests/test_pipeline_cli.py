import csv
import json
import os

import pytest

from labelforge.cli import main
from labelforge.config import PipelineConfig
from labelforge.corpus import load_dataset, save_dataset
from labelforge.errors import ConfigError
from labelforge.synth import make_separable_corpus


def small_config(**kw):
    base = dict(
        k_per_category={"surface": 3, "structural": 3, "semantic": 3},
        candidates_per_round=3,
        max_rounds=3,
        tfidf={"ngram_ranges": [[1, 1]], "min_df": 1, "min_token_len": 2},
        candidate_training={
            "epochs": 120, "lr": 0.5, "l2": 1e-3, "regularizations": [1e-3],
            "subsample_fractions": [0.8], "semantic_head_widths": [0],
            "mlp_epochs": 50, "mlp_lr": 0.1,
        },
        downstream={"hidden": 20, "epochs": 8, "batch_size": 32, "lr": 0.01,
                    "mode": "soft", "ngram_range": [1, 1]},
    )
    base.update(kw)
    return PipelineConfig(**base)


@pytest.fixture(scope="module")
def run_env(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data_path = str(root / "separable.jsonl")
    save_dataset(make_separable_corpus(3, n_unlabeled=300, n_seed=30, n_test=80), data_path)
    config_path = str(root / "config.json")
    small_config().save(config_path)
    return {"root": str(root), "data": data_path, "config": config_path}


def test_config_round_trip_and_hash(tmp_path):
    cfg = small_config(alpha=0.8, beta=0.25)
    path = str(tmp_path / "c.json")
    cfg.save(path)
    again = PipelineConfig.load(path)
    assert again.to_json() == cfg.to_json()
    assert again.config_hash() == cfg.config_hash()
    again.alpha = 0.5
    assert again.config_hash() != cfg.config_hash()


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        PipelineConfig.from_json({"alpha": 0.5, "bogus_knob": 1})
    with pytest.raises(ConfigError):
        PipelineConfig(alpha=1.5)


def test_cmd_run_smoke_artifacts(run_env):
    out = os.path.join(run_env["root"], "run1")
    code = main(["run", "--config", run_env["config"], "--data", run_env["data"], "--out", out])
    assert code == 0
    for name in ("lf_pool.json", "label_matrix.csv", "labels.jsonl", "report.json",
                 "manifest.json", "ledger.csv", "filter_reports.json"):
        assert os.path.exists(os.path.join(out, name)), name
    report = json.load(open(os.path.join(out, "report.json")))
    assert report["coverage"] is not None
    assert report["e2e_f1"] is not None
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["config_hash"]
    assert "dataset" in manifest["input_digests"]
    assert manifest["stage_seconds"]


def test_cmd_run_missing_dataset(run_env):
    out = os.path.join(run_env["root"], "missing")
    code = main(["run", "--config", run_env["config"], "--data", "/nope/none.jsonl", "--out", out])
    assert code == 2
    err = json.load(open(os.path.join(out, "error.json")))
    assert err["stage"] == "ingest"


def test_cmd_run_determinism(run_env):
    out_a = os.path.join(run_env["root"], "det_a")
    out_b = os.path.join(run_env["root"], "det_b")
    assert main(["run", "--config", run_env["config"], "--data", run_env["data"], "--out", out_a]) == 0
    assert main(["run", "--config", run_env["config"], "--data", run_env["data"], "--out", out_b]) == 0
    bytes_a = open(os.path.join(out_a, "labels.jsonl"), "rb").read()
    bytes_b = open(os.path.join(out_b, "labels.jsonl"), "rb").read()
    assert bytes_a == bytes_b
    row_a = list(csv.DictReader(open(os.path.join(out_a, "ledger.csv"))))[0]
    row_b = list(csv.DictReader(open(os.path.join(out_b, "ledger.csv"))))[0]
    for key in ("dataset", "coverage", "weighted_f1", "label_quality", "e2e_f1", "config_hash"):
        assert row_a[key] == row_b[key]


def test_cmd_eval_matches_run_report(run_env):
    out = os.path.join(run_env["root"], "run_eval")
    assert main(["run", "--config", run_env["config"], "--data", run_env["data"], "--out", out]) == 0
    report = json.load(open(os.path.join(out, "report.json")))
    eval_out = os.path.join(run_env["root"], "eval.json")
    code = main(["eval", "--labels", os.path.join(out, "labels.jsonl"),
                 "--data", run_env["data"], "--out", eval_out])
    assert code == 0
    eval_report = json.load(open(eval_out))
    assert eval_report["coverage"] == pytest.approx(report["coverage"])
    assert eval_report["weighted_f1"] == pytest.approx(report["weighted_f1"])
    assert eval_report["label_quality"] == pytest.approx(report["label_quality"])


def test_cmd_eval_misaligned_ids(run_env, tmp_path):
    labels_path = str(tmp_path / "labels.jsonl")
    with open(labels_path, "w") as fh:
        fh.write(json.dumps({"doc_id": "unknown-id", "dist": [1.0, 0.0],
                             "covered": True, "hard": "pos"}) + "\n")
    code = main(["eval", "--labels", labels_path, "--data", run_env["data"],
                 "--out", str(tmp_path / "out.json")])
    assert code == 3


def test_cmd_sweep_fans_out(run_env):
    out = os.path.join(run_env["root"], "sweep")
    code = main(["sweep", "--config", run_env["config"], "--data", run_env["data"],
                 "--out", out, "--param", "alpha", "--values", "0.0,0.9"])
    assert code == 0
    rows = list(csv.DictReader(open(os.path.join(out, "sweep.csv"))))
    assert [r["value"] for r in rows] == ["0.0", "0.9"]
    assert all(r["status"] == "ok" for r in rows)
    assert os.path.isdir(os.path.join(out, "alpha=0.0"))
    assert os.path.isdir(os.path.join(out, "alpha=0.9"))


def test_cmd_sweep_empty_values(run_env):
    out = os.path.join(run_env["root"], "sweep_empty")
    code = main(["sweep", "--config", run_env["config"], "--data", run_env["data"],
                 "--out", out, "--param", "alpha", "--values", ""])
    assert code == 2


def test_cmd_sweep_abstain_values(run_env):
    out = os.path.join(run_env["root"], "sweep_abstain")
    code = main(["sweep", "--config", run_env["config"], "--data", run_env["data"],
                 "--out", out, "--param", "abstain", "--values", "on,off"])
    assert code == 0
    rows = list(csv.DictReader(open(os.path.join(out, "sweep.csv"))))
    assert len(rows) == 2


def test_gen_synth_command(tmp_path):
    out = str(tmp_path / "synth")
    code = main(["gen-synth", "--out", out, "--seed", "5", "--kind", "both"])
    assert code == 0
    from labelforge.corpus import LabelSpace

    labels = LabelSpace(("pos", "neg"))
    sep = load_dataset(os.path.join(out, "separable.jsonl"), "jsonl", labels)
    noisy = load_dataset(os.path.join(out, "noisy.jsonl"), "jsonl", labels)
    assert len(sep.unlabeled) == 2000 and len(sep.seed) == 40 and len(sep.test) == 400
    assert len(noisy.unlabeled) == 2000
    assert len(sep.unlabeled_gold) == 2000


def test_seed_override_changes_results(run_env):
    out_a = os.path.join(run_env["root"], "seed_a")
    out_b = os.path.join(run_env["root"], "seed_b")
    assert main(["run", "--config", run_env["config"], "--data", run_env["data"],
                 "--out", out_a, "--seed-override", "1"]) == 0
    assert main(["run", "--config", run_env["config"], "--data", run_env["data"],
                 "--out", out_b, "--seed-override", "2"]) == 0
    pool_a = json.load(open(os.path.join(out_a, "lf_pool.json")))
    pool_b = json.load(open(os.path.join(out_b, "lf_pool.json")))
    ids_a = [lf["id"] for lf in pool_a["lfs"]]
    ids_b = [lf["id"] for lf in pool_b["lfs"]]
    assert ids_a != ids_b


def test_label_model_kinds_through_pipeline(run_env, tmp_path):
    from labelforge.pipeline import run_pipeline

    ds = make_separable_corpus(9, n_unlabeled=200, n_seed=24, n_test=50)
    for kind in ({"kind": "weighted_majority_vote"}, {"kind": "dawid_skene", "max_iter": 30}):
        cfg = small_config(label_model=kind)
        summary = run_pipeline(cfg, ds, str(tmp_path / kind["kind"]))
        assert summary["label_quality"] is not None
        assert summary["coverage"] > 0.9


def test_run_manifest_atomic_and_timed(run_env):
    out = os.path.join(run_env["root"], "run1")
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert not os.path.exists(os.path.join(out, "manifest.json.tmp"))
    assert set(manifest["stage_seconds"]) >= {
        "featurize", "explore_exploit", "matrix", "aggregate", "metrics", "downstream",
    }
