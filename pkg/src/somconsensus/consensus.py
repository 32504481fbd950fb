"""Co-association consensus: evidence accumulation, spectral partitioning, k selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    AllCandidatesDegenerate,
    EigenFailure,
    EmptyPartitionSet,
    IsolatedNode,
    KTooLarge,
    ValidationError,
)
from .metrics import ValidityReport, subject_majority, validity_report
from .partition import Partition, check_lengths

DEFAULT_K_MIN = 2
DEFAULT_K_MAX = 20


@dataclass(frozen=True, eq=False)
class CoAssociationMatrix:
    counts: np.ndarray  # (n, n) int64
    m: int

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    def write_csv(self, path: str | Path) -> None:
        np.savetxt(path, self.counts, fmt="%d", delimiter=",")


def co_association(ps) -> CoAssociationMatrix:
    """Count, for every sample pair, how many partitions put the pair together.

    Accepts a PartitionSet or any sequence of Partitions / label arrays.
    """
    partitions = list(getattr(ps, "partitions", ps))
    if not partitions:
        raise EmptyPartitionSet("co-association needs at least one partition")
    labels = [p.labels if isinstance(p, Partition) else np.asarray(p) for p in partitions]
    n = len(labels[0])
    counts = np.zeros((n, n), dtype=np.int64)
    for lab in labels:
        if len(lab) != n:
            raise ValidationError("partitions disagree on the number of samples")
        counts += lab[:, None] == lab[None, :]
    counts.setflags(write=False)
    return CoAssociationMatrix(counts, len(labels))


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    history: list[float] = field(default_factory=list)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(-1)


def _plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    closest = ((x - x[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        closest = np.minimum(closest, ((x - x[idx]) ** 2).sum(1))
    return x[chosen].copy()


def lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int = 300) -> KMeansResult:
    """Lloyd iterations from the given centroids.

    ``history`` holds the within-cluster SS after every assignment step.
    An empty cluster is moved onto the sample farthest from its centroid.
    """
    k = len(centroids)
    c = centroids.astype(np.float64, copy=True)
    history: list[float] = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(x, c)
        new = d.argmin(axis=1)
        history.append(float(d[np.arange(len(x)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = x[labels == j]
            if len(members):
                c[j] = members.mean(axis=0)
        for j in range(k):
            if not np.any(labels == j):
                far = int(np.argmax(_sq_dists(x, c)[np.arange(len(x)), labels]))
                c[j] = x[far]
                labels = labels.copy()
                labels[far] = j
    d = _sq_dists(x, c)
    labels = d.argmin(axis=1)
    return KMeansResult(labels, c, float(d[np.arange(len(x)), labels].sum()), history)


def kmeans_fit(X, k: int, seed: int = 0, n_restarts: int = 10, max_iter: int = 300) -> KMeansResult:
    """Best of ``n_restarts`` k-means++ seeded Lloyd runs, by within-cluster SS."""
    x = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if not 1 <= k <= len(x):
        raise KTooLarge(f"k={k} must satisfy 1 <= k <= n={len(x)}")
    if n_restarts < 1:
        raise ValidationError("n_restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_restarts):
        res = lloyd(x, _plus_plus(x, k, rng), max_iter)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def kmeans(X, k: int, seed: int = 0, n_restarts: int = 10) -> Partition:
    return Partition(kmeans_fit(X, k, seed, n_restarts).labels)


def _affinity(W) -> np.ndarray:
    a = np.asarray(getattr(W, "counts", W), dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"affinity must be square, got shape {a.shape}")
    return a


def normalized_laplacian(W) -> np.ndarray:
    """``I - D^-1/2 A D^-1/2`` with the diagonal of ``A`` kept as self-loops."""
    a = _affinity(W)
    deg = a.sum(axis=1)
    if np.any(deg <= 0):
        raise IsolatedNode(f"samples {np.flatnonzero(deg <= 0).tolist()} have zero degree")
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(len(a)) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    return (lap + lap.T) / 2


def spectral_partition(W, k: int, seed: int = 0) -> Partition:
    """Spectral clustering of an affinity matrix into ``k`` groups.

    Bottom-k eigenvectors of the symmetric normalized Laplacian, rows scaled to
    unit length, then k-means.
    """
    n = _affinity(W).shape[0]
    if not 2 <= k < n:
        raise KTooLarge(f"k={k} must satisfy 2 <= k < n={n}")
    lap = normalized_laplacian(W)
    try:
        _, vecs = scipy.linalg.eigh(lap, subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return kmeans(vecs / norms, k, seed)


def map_to_subjects(p, subjects: Sequence[str]) -> dict[str, int]:
    """Modal cluster of each subject's samples; ties go to the smallest label."""
    labels = p.labels if isinstance(p, Partition) else np.asarray(p, dtype=np.int64)
    check_lengths(len(labels), subjects)
    order, majority = subject_majority(labels, subjects)
    return {s: int(lab) for s, lab in zip(order, majority)}


@dataclass(frozen=True, eq=False)
class ConsensusResult:
    sample_partition: Partition
    subject_labels: dict[str, int]
    per_k_reports: list[tuple[int, ValidityReport]]
    selected_k: int
    skipped_k: list[int] = field(default_factory=list)

    def report_for(self, k: int) -> ValidityReport:
        return dict(self.per_k_reports)[k]

    def to_dict(self, sample_ids: Sequence[str], subject_ids: Sequence[str]) -> dict:
        return {
            "selected_k": self.selected_k,
            "per_k": [{"k": k, **r.to_dict()} for k, r in self.per_k_reports],
            "skipped_k": list(self.skipped_k),
            "sample_assignments": {
                sid: int(lab) for sid, lab in zip(sample_ids, self.sample_partition.labels)
            },
            "sample_subjects": dict(zip(sample_ids, subject_ids)),
            "subject_assignments": dict(self.subject_labels),
        }


def select_partition(
    W,
    X_for_sc,
    k_min: int = DEFAULT_K_MIN,
    k_max: int = DEFAULT_K_MAX,
    seed: int = 0,
    subjects: Sequence[str] | None = None,
) -> ConsensusResult:
    """Spectral partition for every k in ``[k_min, k_max]``; keep the best silhouette.

    The silhouette is measured on ``X_for_sc``. Ties go to the smallest k.
    Candidates whose partition collapses below two clusters are skipped.
    """
    n = _affinity(W).shape[0]
    if not 2 <= k_min <= k_max < n:
        raise ValidationError(f"need 2 <= k_min <= k_max < n, got {k_min}, {k_max}, n={n}")
    if subjects is None:
        subjects = getattr(X_for_sc, "subject_ids", None)
    if subjects is None:
        subjects = [str(i) for i in range(n)]

    reports: list[tuple[int, ValidityReport]] = []
    partitions: dict[int, Partition] = {}
    skipped: list[int] = []
    for k in range(k_min, k_max + 1):
        p = spectral_partition(W, k, seed)
        if p.n_clusters < 2:
            skipped.append(k)
            continue
        try:
            report = validity_report(X_for_sc, p, subjects)
        except ValidationError:
            skipped.append(k)
            continue
        reports.append((k, report))
        partitions[k] = p
    if not reports:
        raise AllCandidatesDegenerate(f"no usable partition for k in [{k_min}, {k_max}]")

    best_k, best = reports[0]
    for k, r in reports[1:]:
        if r.sc > best.sc:
            best_k, best = k, r
    chosen = partitions[best_k]
    return ConsensusResult(chosen, map_to_subjects(chosen, subjects), reports, best_k, skipped)
