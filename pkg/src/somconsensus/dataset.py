"""Feature-matrix ingestion, CSV round-tripping and synthetic cohorts."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DuplicateSampleId,
    EmptyFile,
    InvalidSpec,
    LengthMismatch,
    MissingHeader,
    NonNumericCell,
    RaggedRow,
    ValidationError,
)

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class SampleMatrix:
    """Samples in rows, features in columns, each row tagged with a subject.

    ``values`` is copied and made read-only on construction.
    """

    values: np.ndarray
    sample_ids: tuple[str, ...]
    subject_ids: tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ValidationError(f"values must be 2-D, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))

        n = values.shape[0]
        if len(self.sample_ids) != n or len(self.subject_ids) != n:
            raise LengthMismatch(
                f"{n} rows but {len(self.sample_ids)} sample ids and "
                f"{len(self.subject_ids)} subject ids"
            )
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise NonNumericCell(int(r), int(c), repr(values[r, c]))
        seen: set[str] = set()
        for sid in self.sample_ids:
            if sid in seen:
                raise DuplicateSampleId(f"sample id {sid!r} appears more than once")
            seen.add(sid)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def subjects(self) -> list[str]:
        """Distinct subject ids in order of first appearance."""
        return list(dict.fromkeys(self.subject_ids))

    def standardized(self) -> "SampleMatrix":
        """Per-feature z-score. Constant columns become all zeros."""
        mean = self.values.mean(axis=0)
        std = self.values.std(axis=0)
        std[std == 0] = 1.0
        return SampleMatrix((self.values - mean) / std, self.sample_ids, self.subject_ids)

    def with_values(self, values: np.ndarray) -> "SampleMatrix":
        return SampleMatrix(values, self.sample_ids, self.subject_ids)


@dataclass(frozen=True)
class SyntheticSpec:
    n_subjects: int = 57
    samples_per_subject: int = 3
    n_features: int = 40
    n_true_clusters: int = 4
    cluster_separation: float = 10.0
    seed: int = 0
    subject_spread: float = 0.25

    def validate(self) -> None:
        for name in ("n_subjects", "samples_per_subject", "n_features", "n_true_clusters"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidSpec(f"{name} must be a positive integer, got {value!r}")
        if self.n_true_clusters > self.n_subjects:
            raise InvalidSpec("n_true_clusters cannot exceed n_subjects")
        if not (math.isfinite(self.cluster_separation) and self.cluster_separation >= 0):
            raise InvalidSpec("cluster_separation must be finite and >= 0")
        if not (math.isfinite(self.subject_spread) and self.subject_spread >= 0):
            raise InvalidSpec("subject_spread must be finite and >= 0")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InvalidSpec("seed must be a non-negative integer")


def _check_id(value: str, row: int, col: int) -> str:
    if not _ID_RE.match(value):
        raise ValidationError(f"id {value!r} at row {row}, column {col} must match [A-Za-z0-9_-]+")
    return value


def load_csv(path: str | Path) -> SampleMatrix:
    """Read a ``sample_id,subject_id,f0,...`` CSV into a :class:`SampleMatrix`.

    Rows and columns in errors are 1-based file coordinates.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        # keep 1-based file line numbers; blank lines are skipped
        records = [(r, row) for r, row in enumerate(csv.reader(fh), start=1)
                   if any(cell.strip() for cell in row)]
    if not records:
        raise EmptyFile(f"{path} is empty")

    header = records[0][1]
    if len(header) < 3 or header[0] != "sample_id" or header[1] != "subject_id":
        raise MissingHeader(f"{path}: first line must start with 'sample_id,subject_id,f0'")
    expected = [f"f{j}" for j in range(len(header) - 2)]
    if header[2:] != expected:
        raise MissingHeader(f"{path}: feature columns must be named f0..f{len(header) - 3}")
    if len(records) == 1:
        raise EmptyFile(f"{path} has a header but no data rows")

    width = len(header)
    sample_ids, subject_ids, rows = [], [], []
    for r, cells in records[1:]:
        if len(cells) != width:
            raise RaggedRow(f"{path}: row {r} has {len(cells)} cells, header has {width}")
        sample_ids.append(_check_id(cells[0].strip(), r, 1))
        subject_ids.append(_check_id(cells[1].strip(), r, 2))
        row = []
        for c, cell in enumerate(cells[2:], start=3):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(r, c, cell) from None
            if not math.isfinite(v):
                raise NonNumericCell(r, c, cell)
            row.append(v)
        rows.append(row)

    seen: set[str] = set()
    for sid in sample_ids:
        if sid in seen:
            raise DuplicateSampleId(f"{path}: sample id {sid!r} appears more than once")
        seen.add(sid)
    return SampleMatrix(np.array(rows, dtype=np.float64), sample_ids, subject_ids)


def write_csv(m: SampleMatrix, path: str | Path, prefix: str = "f") -> None:
    """Write ``m`` so that :func:`load_csv` reads back the exact same floats."""
    header = ["sample_id", "subject_id"] + [f"{prefix}{j}" for j in range(m.cols)]
    out = [",".join(header)]
    for sid, subj, row in zip(m.sample_ids, m.subject_ids, m.values):
        # repr() is the shortest string that round-trips a float64
        out.append(",".join([sid, subj] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def _centroids(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    k, f, sep = spec.n_true_clusters, spec.n_features, spec.cluster_separation
    if k <= f:
        # scaled simplex corners: every pair exactly `sep` apart, then rotated
        base = np.zeros((k, f))
        base[np.arange(k), np.arange(k)] = sep / math.sqrt(2.0)
        q, _ = np.linalg.qr(rng.standard_normal((f, f)))
        return base @ q
    # more clusters than dimensions: random directions, rescaled so the
    # closest pair sits `sep` apart
    c = rng.standard_normal((k, f))
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    closest = d[np.triu_indices(k, 1)].min()
    return c * (sep / closest if closest > 0 else 0.0)


def generate_synthetic(spec: SyntheticSpec) -> tuple[SampleMatrix, list[int]]:
    """Seeded cohort of subjects, each contributing replicate samples.

    Returns the matrix and the true cluster of every subject (in subject order).

    Scale is set by the total within-cluster scatter: subject means deviate from
    their centroid by an isotropic Gaussian whose root-mean-square distance to
    the centroid is 1, so centroids sit ``cluster_separation`` such units apart
    whatever ``n_features`` is. Replicates scatter around their subject mean
    ``subject_spread`` times as widely. Subjects are dealt to clusters
    round-robin before shuffling, so cluster sizes differ by at most one.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    centroids = _centroids(spec, rng)
    per_feature = 1.0 / math.sqrt(spec.n_features)

    labels = np.arange(spec.n_subjects) % spec.n_true_clusters
    rng.shuffle(labels)

    subject_means = centroids[labels] + per_feature * rng.standard_normal(
        (spec.n_subjects, spec.n_features))
    reps = spec.samples_per_subject
    noise = (spec.subject_spread * per_feature) * rng.standard_normal(
        (spec.n_subjects, reps, spec.n_features))
    values = (subject_means[:, None, :] + noise).reshape(-1, spec.n_features)

    width = len(str(spec.n_subjects - 1))
    subject_ids, sample_ids = [], []
    for s in range(spec.n_subjects):
        subj = f"subj{s:0{width}d}"
        for r in range(reps):
            subject_ids.append(subj)
            sample_ids.append(f"{subj}_r{r}")
    return SampleMatrix(values, sample_ids, subject_ids), [int(v) for v in labels]


def subject_index(subjects: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Map per-row subject ids to ``(ordered unique ids, int code per row)``."""
    order: dict[str, int] = {}
    codes = np.empty(len(subjects), dtype=np.int64)
    for i, s in enumerate(subjects):
        codes[i] = order.setdefault(s, len(order))
    return list(order), codes
