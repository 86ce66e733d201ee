"""Pipeline configuration: all tunables, JSON round-trip, stable hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError

SCHEMA_VERSION = 1


def _default_k() -> dict:
    return {"surface": 20, "structural": 20, "semantic": 20}


def _default_tau() -> dict:
    return {"surface": 0.9, "structural": 0.98, "semantic": 0.98}


def _default_provider() -> dict:
    return {"kind": "offline_seeded", "rng_seed": 0, "top_t": 5}


def _default_embedding() -> dict:
    return {"kind": "hashing", "dim": 256}


def _default_tfidf() -> dict:
    return {"ngram_ranges": [[1, 1], [1, 2]], "min_df": 1, "min_token_len": 2}


def _default_candidate_training() -> dict:
    return {
        "epochs": 300,
        "lr": 0.5,
        "l2": 1e-3,
        "regularizations": [1e-3, 3e-3, 1e-2],
        "subsample_fractions": [0.8],
        "semantic_head_widths": [0],
        "mlp_epochs": 200,
        "mlp_lr": 0.1,
    }


def _default_downstream() -> dict:
    return {
        "hidden": 100,
        "epochs": 50,
        "batch_size": 32,
        "lr": 0.01,
        "mode": "soft",
        "ngram_range": [1, 1],
    }


def _default_label_model() -> dict:
    return {"kind": "majority_vote"}


@dataclass
class PipelineConfig:
    """Every tunable of a run; serializes to a stable hash for reports."""

    schema_version: int = SCHEMA_VERSION
    alpha: float = 0.9
    beta: float = 0.1
    k_per_category: dict = field(default_factory=_default_k)
    candidates_per_round: int = 8
    max_rounds: int = 10
    base_seed: int = 0
    grid_step: float = 0.01
    tau_dup: dict = field(default_factory=_default_tau)
    abstain_enabled: bool = True
    dedup_sample_size: int = 500
    label_model: dict = field(default_factory=_default_label_model)
    provider: dict = field(default_factory=_default_provider)
    embedding: dict = field(default_factory=_default_embedding)
    tfidf: dict = field(default_factory=_default_tfidf)
    candidate_training: dict = field(default_factory=_default_candidate_training)
    downstream: dict = field(default_factory=_default_downstream)
    task_description: str = "classify each document into one of the given classes"
    class_names: list = field(default_factory=list)  # empty: infer from data file

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ConfigError("alpha must be in [0, 1]")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if any(int(v) < 1 for v in self.k_per_category.values()):
            raise ConfigError("k_per_category values must be >= 1")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunManifest:
    """Run-level provenance: hashes, timings, artifact paths."""

    config_hash: str
    input_digests: dict = field(default_factory=dict)
    stage_seconds: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    status: str = "ok"

    def write_atomic(self, path: str) -> None:
        payload = dataclasses.asdict(self)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()[:16]
