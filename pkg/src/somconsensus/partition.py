from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch


def canonical_labels(labels: Sequence) -> np.ndarray:
    """Relabel by first occurrence: the first label seen becomes 0, the next new one 1, ..."""
    mapping: dict = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(np.asarray(labels).tolist()):
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


@dataclass(frozen=True, eq=False)
class Partition:
    """Hard cluster assignment of ``n_samples`` samples, labels ``0..K-1``.

    Labels are canonicalized on construction, so two partitions that differ only
    by label names compare equal.
    """

    labels: np.ndarray

    def __post_init__(self):
        labels = canonical_labels(self.labels)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __len__(self):
        return len(self.labels)


def check_lengths(n: int, other: Sequence, what: str = "subjects") -> None:
    if len(other) != n:
        raise LengthMismatch(f"partition has {n} samples but {len(other)} {what}")
