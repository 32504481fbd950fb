"""Ensembles of independently seeded maps, filtered by intra-subject consistency."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyEnsemble, ValidationError
from .metrics import ics
from .partition import Partition
from .som import SomConfig, partition_from_som, train_soms

DEFAULT_N_PARTITIONS = 1000
DEFAULT_ICS_THRESHOLD = 0.099


@dataclass(frozen=True)
class PartitionSet:
    partitions: tuple[Partition, ...]
    ics_values: tuple[float, ...]
    seeds: tuple[int, ...]
    threshold: float
    n_runs: int

    def __post_init__(self):
        if not (len(self.partitions) == len(self.ics_values) == len(self.seeds)):
            raise ValidationError("partitions, ics_values and seeds must align")
        sizes = {p.n_samples for p in self.partitions}
        if len(sizes) > 1:
            raise ValidationError(f"partitions disagree on n_samples: {sorted(sizes)}")

    def __len__(self):
        return len(self.partitions)

    @property
    def n_samples(self) -> int:
        return self.partitions[0].n_samples if self.partitions else 0

    def label_matrix(self) -> np.ndarray:
        """``(n_samples, m)`` matrix, one column per retained partition."""
        return np.stack([p.labels for p in self.partitions], axis=1)


def derive_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """Seed of run ``index``: a pure hash of ``(master_seed, stream, index)``."""
    ss = np.random.SeedSequence([int(master_seed), int(stream), int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def resolve_workers(n_jobs: int | None = None) -> int:
    """Worker count: explicit ``n_jobs``, else ``CONSENSUS_THREADS`` (0 = all cores)."""
    if n_jobs is None:
        raw = os.environ.get("CONSENSUS_THREADS", "0")
        try:
            n_jobs = int(raw)
        except ValueError:
            raise ValidationError(f"CONSENSUS_THREADS must be an integer, got {raw!r}") from None
    if n_jobs < 0:
        raise ValidationError("worker count must be >= 0")
    return n_jobs or (os.cpu_count() or 1)


def _train_chunk(args) -> list[Partition]:
    values, cfgs = args
    return [partition_from_som(m, values) for m in train_soms(values, cfgs)]


def filter_partitions(
    candidates: Iterable[tuple[int, Partition]],
    subjects: Sequence[str],
    ics_threshold: float,
    n_runs: int | None = None,
) -> PartitionSet:
    """Keep the ``(seed, partition)`` pairs whose ICS is strictly below the threshold."""
    kept, scores, seeds = [], [], []
    total = 0
    for seed, p in candidates:
        total += 1
        score = ics(p, subjects)
        if score < ics_threshold:
            kept.append(p)
            scores.append(score)
            seeds.append(int(seed))
    return PartitionSet(tuple(kept), tuple(scores), tuple(seeds), ics_threshold,
                        total if n_runs is None else n_runs)


def run_ensemble(
    D,
    subjects: Sequence[str],
    n_p: int = DEFAULT_N_PARTITIONS,
    ics_threshold: float = DEFAULT_ICS_THRESHOLD,
    base_cfg: SomConfig | None = None,
    master_seed: int = 0,
    n_jobs: int | None = None,
    batch_size: int = 50,
) -> PartitionSet:
    """Train ``n_p`` maps and keep the partitions passing the ICS filter.

    Run ``i`` uses ``derive_seed(master_seed, i)``; everything else in
    ``base_cfg`` is shared. Results do not depend on ``n_jobs``.
    """
    if n_p < 1:
        raise ValidationError("n_p must be >= 1")
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    if not 0 < ics_threshold <= 1:
        raise ValidationError("ics_threshold must be in (0, 1]")
    base_cfg = base_cfg or SomConfig()
    values = np.asarray(getattr(D, "values", D), dtype=np.float64)
    if len(subjects) != values.shape[0]:
        raise ValidationError(f"{values.shape[0]} rows but {len(subjects)} subject ids")

    seeds = [derive_seed(master_seed, i) for i in range(n_p)]
    cfgs = [base_cfg.with_seed(s) for s in seeds]
    workers = min(resolve_workers(n_jobs), n_p)
    # members train in lock-step batches; a member's result does not depend on
    # which batch or process it lands in
    chunks = [(values, cfgs[i:i + batch_size]) for i in range(0, n_p, batch_size)]
    if workers == 1:
        results = [_train_chunk(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_chunk, chunks))
    partitions = [p for chunk in results for p in chunk]

    ps = filter_partitions(zip(seeds, partitions), subjects, ics_threshold, n_runs=n_p)
    if len(ps) == 0:
        raise EmptyEnsemble(
            f"none of the {n_p} partitions has ICS < {ics_threshold}; consider a looser threshold"
        )
    return ps


def write_partition_set_csv(ps: PartitionSet, sample_ids: Sequence[str], path: str | Path) -> None:
    """Wide CSV: ``sample_id,run_0,...``, columns in retained-run order."""
    header = ["sample_id"] + [f"run_{j}" for j in range(len(ps))]
    lines = [",".join(header)]
    for sid, row in zip(sample_ids, ps.label_matrix()):
        lines.append(",".join([sid] + [str(int(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
