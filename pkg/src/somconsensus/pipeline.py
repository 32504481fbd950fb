"""End-to-end runs: embed, ensemble, consensus, baselines, stability statistics."""

from __future__ import annotations

import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .consensus import ConsensusResult, co_association, kmeans, select_partition
from .dataset import SampleMatrix, SyntheticSpec, generate_synthetic, load_csv
from .ensemble import PartitionSet, derive_seed, run_ensemble
from .errors import ConfigInvalid, ConsensusError, StageError
from .lle import Embedding, lle
from .metrics import ValidityReport, validity_report
from .som import SomConfig, partition_from_som, train_som

log = logging.getLogger(__name__)

METRIC_SPACES = ("features", "embedding")

# seed streams, so that ensemble runs, baselines and reruns never share seeds
_ENSEMBLE, _BASELINE, _RERUN = 0, 1, 2


@dataclass
class LLESettings:
    k_neighbors: int = 30
    dim: int = 30
    reg: float = 1e-3


@dataclass
class SomSettings:
    grid_rows: int = 4
    grid_cols: int = 4
    lr_init: float = 0.5
    lr_threshold: float = 0.01
    radius_init: float = 2.0
    iter_max: int = 10000

    def config(self, seed: int = 0) -> SomConfig:
        return SomConfig(seed=seed, **asdict(self))


@dataclass
class EnsembleSettings:
    n_p: int = 1000
    ics_threshold: float = 0.099


@dataclass
class ConsensusSettings:
    k_min: int = 2
    k_max: int = 20
    metric_space: str = "features"


@dataclass
class PipelineConfig:
    input: str | None = None
    synthetic: SyntheticSpec | None = None
    standardize: bool = True
    lle: LLESettings = field(default_factory=LLESettings)
    som: SomSettings = field(default_factory=SomSettings)
    ensemble: EnsembleSettings = field(default_factory=EnsembleSettings)
    consensus: ConsensusSettings = field(default_factory=ConsensusSettings)
    master_seed: int | None = None
    n_stability_reruns: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        nested = {"lle": LLESettings, "som": SomSettings, "ensemble": EnsembleSettings,
                  "consensus": ConsensusSettings, "synthetic": SyntheticSpec}
        for key, kind in nested.items():
            value = raw.get(key)
            if value is None or isinstance(value, kind):
                continue
            if not isinstance(value, dict):
                raise ConfigInvalid(f"'{key}' must be an object")
            try:
                raw[key] = kind(**value)
            except TypeError as exc:
                raise ConfigInvalid(f"bad '{key}' section: {exc}") from None
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigInvalid("config file must hold a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        """Check every constraint that does not need the data; raise ConfigInvalid."""
        if (self.input is None) == (self.synthetic is None):
            raise ConfigInvalid("give exactly one of 'input' and 'synthetic'")
        if self.master_seed is None:
            raise ConfigInvalid("master_seed is required")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigInvalid("master_seed must be a non-negative integer")
        c = self.consensus
        if c.k_min < 2:
            raise ConfigInvalid("consensus.k_min must be >= 2")
        if c.k_min > c.k_max:
            raise ConfigInvalid(f"consensus.k_min ({c.k_min}) > consensus.k_max ({c.k_max})")
        if c.metric_space not in METRIC_SPACES:
            raise ConfigInvalid(f"consensus.metric_space must be one of {METRIC_SPACES}")
        if self.lle.k_neighbors < 1 or self.lle.dim < 1 or self.lle.reg < 0:
            raise ConfigInvalid("lle needs k_neighbors >= 1, dim >= 1, reg >= 0")
        if self.ensemble.n_p < 1:
            raise ConfigInvalid("ensemble.n_p must be >= 1")
        if not 0 < self.ensemble.ics_threshold <= 1:
            raise ConfigInvalid("ensemble.ics_threshold must be in (0, 1]")
        if self.n_stability_reruns < 0 or self.n_stability_reruns == 1:
            raise ConfigInvalid("n_stability_reruns must be 0 or >= 2")
        try:
            self.som.config()
            if self.synthetic is not None:
                self.synthetic.validate()
        except ConsensusError as exc:
            raise ConfigInvalid(str(exc)) from None


@dataclass
class Prepared:
    """Seed-independent inputs shared by every rerun."""

    data: SampleMatrix
    features: SampleMatrix  # standardized when the config asks for it
    embedding: Embedding
    truth: list[int] | None = None

    def metric_space(self, cfg: PipelineConfig) -> SampleMatrix:
        return self.features if cfg.consensus.metric_space == "features" else self.embedding


@dataclass
class RunReport:
    config: dict
    dataset: dict
    ensemble: dict
    consensus: dict
    metrics: dict
    baselines: dict
    stability: dict | None
    timings: dict = field(default_factory=dict)
    # in-memory results for file dumps; never serialized
    coassoc: Any = field(default=None, repr=False)
    result: ConsensusResult | None = field(default=None, repr=False)
    prepared: Prepared | None = field(default=None, repr=False)

    def to_dict(self, include_timings: bool = False) -> dict:
        keys = ["config", "dataset", "ensemble", "consensus", "metrics", "baselines", "stability"]
        if include_timings:
            keys.append("timings")
        return {k: getattr(self, k) for k in keys}

    def to_json(self, include_timings: bool = False) -> str:
        """Canonical JSON; without timings it is byte-identical across reruns."""
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=2,
                          allow_nan=False) + "\n"


class _Timer:
    def __init__(self):
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except ConsensusError as exc:
            raise StageError(name, exc) from exc
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - start


def prepare(cfg: PipelineConfig, timer: _Timer | None = None) -> Prepared:
    timer = timer or _Timer()
    truth = None
    with timer.stage("load"):
        if cfg.input is not None:
            data = load_csv(cfg.input)
        else:
            data, truth = generate_synthetic(cfg.synthetic)
    with timer.stage("standardize"):
        features = data.standardized() if cfg.standardize else data
    with timer.stage("lle"):
        emb = lle(features, cfg.lle.k_neighbors, cfg.lle.dim, cfg.lle.reg)
    return Prepared(data, features, emb, truth)


def _k_range(cfg: PipelineConfig, n: int) -> tuple[int, int]:
    k_max = min(cfg.consensus.k_max, n - 1)
    if cfg.consensus.k_min > k_max:
        raise ConfigInvalid(f"k range [{cfg.consensus.k_min}, {cfg.consensus.k_max}] "
                            f"is empty for {n} samples")
    return cfg.consensus.k_min, k_max


def _consensus_run(prep: Prepared, cfg: PipelineConfig, seed: int, timer: _Timer,
                   n_jobs: int | None) -> tuple[PartitionSet, Any, ConsensusResult]:
    with timer.stage("ensemble"):
        ps = run_ensemble(prep.embedding, prep.data.subject_ids, cfg.ensemble.n_p,
                          cfg.ensemble.ics_threshold, cfg.som.config(),
                          derive_seed(seed, 0, _ENSEMBLE), n_jobs)
    with timer.stage("consensus"):
        W = co_association(ps)
        k_min, k_max = _k_range(cfg, prep.data.rows)
        result = select_partition(W, prep.metric_space(cfg), k_min, k_max, seed,
                                  prep.data.subject_ids)
    return ps, W, result


def _single_som_report(prep: Prepared, cfg: PipelineConfig, seed: int) -> ValidityReport:
    model = train_som(prep.embedding, cfg.som.config(derive_seed(seed, 0, _BASELINE)))
    p = partition_from_som(model, prep.embedding)
    return validity_report(prep.metric_space(cfg), p, prep.data.subject_ids)


def _std(values: list[float]) -> float | None:
    if any(not math.isfinite(v) for v in values):
        return None
    return float(np.std(values, ddof=1))


def stability_from_prepared(prep: Prepared, cfg: PipelineConfig, n_reruns: int,
                            n_jobs: int | None = None, timer: _Timer | None = None) -> dict:
    if n_reruns < 2:
        raise ConfigInvalid("a stability study needs at least 2 reruns")
    timer = timer or _Timer()
    runs = []
    for r in range(n_reruns):
        seed = derive_seed(cfg.master_seed, r, _RERUN)
        _, _, result = _consensus_run(prep, cfg, seed, timer, n_jobs)
        with timer.stage("stability_baseline"):
            som = _single_som_report(prep, cfg, seed)
        runs.append({"seed": seed,
                     "consensus": result.report_for(result.selected_k),
                     "single_som": som})
        log.info("rerun %d/%d: k=%d", r + 1, n_reruns, result.selected_k)

    block: dict = {"n_reruns": n_reruns}
    for method in ("consensus", "single_som"):
        block[method] = {f"std_{m}": _std([getattr(run[method], m) for run in runs])
                         for m in ("sc", "ch", "db")}
    block["runs"] = [{"seed": run["seed"], "consensus": run["consensus"].to_dict(),
                      "single_som": run["single_som"].to_dict()} for run in runs]
    return block


def stability_study(cfg: PipelineConfig, n_jobs: int | None = None) -> dict:
    """Rerun the consensus pipeline and a single map with derived seeds.

    Returns the sample standard deviation of SC/CH/DB per method, plus the
    per-rerun reports.
    """
    cfg.validate()
    n = cfg.n_stability_reruns
    return stability_from_prepared(prepare(cfg), cfg, n, n_jobs)


def run_pipeline(cfg: PipelineConfig, n_jobs: int | None = None) -> RunReport:
    """Load or generate data, embed, ensemble, consensus, baselines, optional stability."""
    cfg.validate()
    start = time.perf_counter()
    timer = _Timer()
    prep = prepare(cfg, timer)
    ps, W, result = _consensus_run(prep, cfg, cfg.master_seed, timer, n_jobs)

    data = prep.data
    with timer.stage("baselines"):
        space = prep.metric_space(cfg)
        km = kmeans(prep.embedding, result.selected_k, derive_seed(cfg.master_seed, 1, _BASELINE))
        baselines = {
            "kmeans": {"k": result.selected_k,
                       **validity_report(space, km, data.subject_ids).to_dict()},
            "single_som": _single_som_report(prep, cfg, cfg.master_seed).to_dict(),
        }

    stability = None
    if cfg.n_stability_reruns >= 2:
        stability = stability_from_prepared(prep, cfg, cfg.n_stability_reruns, n_jobs, timer)

    timings = dict(timer.stages)
    timings["total"] = time.perf_counter() - start

    dataset = {"source": cfg.input or "synthetic", "n_samples": data.rows,
               "n_features": data.cols, "n_subjects": len(data.subjects()),
               "embedding_dim": prep.embedding.dim}
    if prep.truth is not None:
        dataset["true_subject_labels"] = dict(zip(data.subjects(), prep.truth))
    ensemble = {"n_runs": ps.n_runs, "n_retained": len(ps),
                "ics_threshold": ps.threshold,
                "mean_ics": float(np.mean(ps.ics_values))}
    return RunReport(
        config=cfg.to_dict(),
        dataset=dataset,
        ensemble=ensemble,
        consensus=result.to_dict(data.sample_ids, data.subject_ids),
        metrics={"space": cfg.consensus.metric_space,
                 **result.report_for(result.selected_k).to_dict()},
        baselines=baselines,
        stability=stability,
        timings=timings,
        coassoc=W,
        result=result,
        prepared=prep,
    )


_VALIDITY = {
    "type": "object",
    "required": ["sc", "ch", "db", "ics", "n_clusters"],
    "properties": {
        "sc": {"type": "number", "minimum": -1, "maximum": 1},
        "ch": {"type": ["number", "null"], "minimum": 0},
        "db": {"type": ["number", "null"], "minimum": 0},
        "ics": {"type": "number", "minimum": 0, "maximum": 1},
        "n_clusters": {"type": "integer", "minimum": 1},
    },
}
_STD_BLOCK = {
    "type": "object",
    "required": ["std_sc", "std_ch", "std_db"],
    "additionalProperties": False,
    "properties": {k: {"type": ["number", "null"], "minimum": 0}
                   for k in ("std_sc", "std_ch", "std_db")},
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "run report",
    "type": "object",
    "required": ["config", "dataset", "ensemble", "consensus", "metrics", "baselines",
                 "stability"],
    "properties": {
        "config": {"type": "object"},
        "dataset": {
            "type": "object",
            "required": ["source", "n_samples", "n_features", "n_subjects", "embedding_dim"],
        },
        "ensemble": {
            "type": "object",
            "required": ["n_runs", "n_retained", "ics_threshold", "mean_ics"],
            "properties": {"n_retained": {"type": "integer", "minimum": 1}},
        },
        "consensus": {
            "type": "object",
            "required": ["selected_k", "per_k", "skipped_k", "sample_assignments",
                         "sample_subjects", "subject_assignments"],
            "properties": {
                "selected_k": {"type": "integer", "minimum": 2},
                "per_k": {"type": "array", "items": {
                    "allOf": [_VALIDITY, {"required": ["k"]}]}},
                "sample_assignments": {"type": "object",
                                       "additionalProperties": {"type": "integer"}},
                "subject_assignments": {"type": "object",
                                        "additionalProperties": {"type": "integer"}},
            },
        },
        "metrics": {"allOf": [_VALIDITY, {"required": ["space"]}]},
        "baselines": {
            "type": "object",
            "required": ["kmeans", "single_som"],
            "properties": {"kmeans": _VALIDITY, "single_som": _VALIDITY},
        },
        "stability": {
            "oneOf": [
                {"type": "null"},
                {"type": "object",
                 "required": ["n_reruns", "consensus", "single_som", "runs"],
                 "properties": {"consensus": _STD_BLOCK, "single_som": _STD_BLOCK}},
            ]
        },
        "timings": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}
