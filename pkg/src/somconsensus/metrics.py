"""Internal cluster-validity indices and the intra-subject consistency score.

All distances are Euclidean. Degenerate denominators in CH and DB yield
``math.inf`` instead of raising, so model-selection loops can skip them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import subject_index
from .errors import SingleCluster, TooFewSamples, ValidationError
from .partition import Partition, canonical_labels, check_lengths


def _data(X) -> np.ndarray:
    values = getattr(X, "values", X)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _labels(p, n: int) -> np.ndarray:
    labels = p.labels if isinstance(p, Partition) else canonical_labels(p)
    check_lengths(n, labels, "labels")
    return labels


def _prepare(X, p, min_clusters: int = 2):
    x = _data(X)
    labels = _labels(p, len(x))
    k = int(labels.max()) + 1 if len(labels) else 0
    if k < min_clusters:
        raise SingleCluster(f"need at least {min_clusters} clusters, got {k}")
    return x, labels, k


def silhouette(X, p) -> float:
    """Mean silhouette over samples; members of singleton clusters score 0."""
    x, labels, k = _prepare(X, p)
    n = len(x)
    if n < 3:
        raise TooFewSamples(f"silhouette needs at least 3 samples, got {n}")
    dist = cdist(x, x)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sizes = onehot.sum(axis=0)
    sums = dist @ onehot  # sums[i, c] = total distance from i to cluster c

    own = sizes[labels]
    a = sums[np.arange(n), labels] / np.maximum(own - 1, 1)
    means = sums / sizes
    means[np.arange(n), labels] = np.inf
    b = means.min(axis=1)

    denom = np.maximum(a, b)
    s = np.zeros(n)
    ok = (own > 1) & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(s.mean())


def calinski_harabasz(X, p) -> float:
    """Between/within dispersion ratio; ``inf`` when the within-cluster SS is zero."""
    x, labels, k = _prepare(X, p)
    n = len(x)
    if k >= n:
        raise TooFewSamples(f"calinski_harabasz needs fewer clusters than samples ({k} >= {n})")
    overall = x.mean(axis=0)
    between = within = 0.0
    for c in range(k):
        members = x[labels == c]
        centroid = members.mean(axis=0)
        between += len(members) * float(((centroid - overall) ** 2).sum())
        within += float(((members - centroid) ** 2).sum())
    if within == 0.0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def davies_bouldin(X, p) -> float:
    """Mean over clusters of the worst (S_i + S_j) / M_ij; ``inf`` on coincident centroids."""
    x, labels, k = _prepare(X, p)
    centroids = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
    scatter = np.array([
        np.sqrt(((x[labels == c] - centroids[c]) ** 2).sum(axis=1)).mean() for c in range(k)
    ])
    sep = cdist(centroids, centroids)
    worst = np.empty(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if j == i:
                continue
            if sep[i, j] == 0.0:
                return math.inf
            ratios.append((scatter[i] + scatter[j]) / sep[i, j])
        worst[i] = max(ratios)
    return float(worst.mean())


def subject_majority(labels: Sequence[int], subjects: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Modal label per subject, ties going to the smallest label."""
    labels = np.asarray(labels, dtype=np.int64)
    check_lengths(len(labels), subjects)
    order, codes = subject_index(subjects)
    majority = np.empty(len(order), dtype=np.int64)
    for s in range(len(order)):
        vals, counts = np.unique(labels[codes == s], return_counts=True)
        # np.unique sorts, so argmax lands on the smallest of the tied labels
        majority[s] = vals[np.argmax(counts)]
    return order, majority


def ics(p, subjects: Sequence[str]) -> float:
    """Fraction of samples whose label differs from their subject's majority label."""
    labels = p.labels if isinstance(p, Partition) else np.asarray(p, dtype=np.int64)
    check_lengths(len(labels), subjects)
    if len(labels) == 0:
        return 0.0
    _, codes = subject_index(subjects)
    _, majority = subject_majority(labels, subjects)
    return float(np.count_nonzero(labels != majority[codes]) / len(labels))


@dataclass(frozen=True)
class ValidityReport:
    sc: float
    ch: float
    db: float
    ics: float
    n_clusters: int

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValidationError("n_clusters must be >= 1")

    def to_dict(self) -> dict:
        # JSON has no infinity; degenerate CH/DB serialize as null
        return {k: (None if isinstance(v, float) and math.isinf(v) else v)
                for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def validity_report(X, p, subjects: Sequence[str]) -> ValidityReport:
    if not isinstance(p, Partition):
        p = Partition(p)
    return ValidityReport(
        sc=silhouette(X, p),
        ch=calinski_harabasz(X, p),
        db=davies_bouldin(X, p),
        ics=ics(p, subjects),
        n_clusters=p.n_clusters,
    )
