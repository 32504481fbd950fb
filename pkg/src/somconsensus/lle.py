"""Locally linear embedding: neighbour graph, reconstruction weights, bottom eigenvectors."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .dataset import SampleMatrix, write_csv
from .errors import EigenFailure, KTooLarge, SingularLocalGram, ValidationError

DEFAULT_NEIGHBORS = 30
DEFAULT_DIM = 30
DEFAULT_REG = 1e-3


@dataclass(frozen=True)
class NeighborGraph:
    indices: np.ndarray  # (n, k), ascending distance

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    @property
    def n(self) -> int:
        return self.indices.shape[0]


@dataclass(frozen=True)
class ReconstructionWeights:
    W: sp.csr_matrix
    graph: NeighborGraph

    @property
    def n(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class Embedding(SampleMatrix):
    @property
    def dim(self) -> int:
        return self.cols


def knn_graph(X, k: int) -> NeighborGraph:
    """k nearest rows of every row (self excluded), nearest first, ties to the lower index."""
    x = np.asarray(getattr(X, "values", X), dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValidationError("knn_graph needs at least 2 rows")
    if not 1 <= k < n:
        raise KTooLarge(f"k={k} must satisfy 1 <= k < n={n}")
    d = cdist(x, x)
    np.fill_diagonal(d, np.inf)
    idx = np.argsort(d, axis=1, kind="stable")[:, :k]
    return NeighborGraph(idx)


def _local_weights(gram: np.ndarray, reg: float) -> np.ndarray:
    k = gram.shape[0]
    ones = np.ones(k)
    if reg > 0:
        tr = np.trace(gram)
        # all neighbours coincide with the point: fall back to uniform weights
        gram = gram + (reg * tr if tr > 0 else 1.0) * np.eye(k)
    elif np.linalg.matrix_rank(gram) < k:
        raise SingularLocalGram("local Gram matrix is singular and reg=0")
    w = scipy.linalg.solve(gram, ones, assume_a="pos")
    return w / w.sum()


def reconstruction_weights(X, g: NeighborGraph, reg: float = DEFAULT_REG) -> ReconstructionWeights:
    """Affine weights reconstructing every row from its neighbours.

    Each local Gram matrix is regularized by ``reg * trace`` whenever ``reg > 0``.
    """
    if reg < 0:
        raise ValidationError("reg must be >= 0")
    x = np.asarray(getattr(X, "values", X), dtype=np.float64)
    n, k = g.indices.shape
    if n != x.shape[0]:
        raise ValidationError(f"graph has {n} rows but X has {x.shape[0]}")
    data = np.empty((n, k))
    for i in range(n):
        diff = x[g.indices[i]] - x[i]
        data[i] = _local_weights(diff @ diff.T, reg)
    if not np.all(np.isfinite(data)):
        raise SingularLocalGram("non-finite reconstruction weights")
    W = sp.csr_matrix((data.ravel(), g.indices.ravel(), np.arange(0, n * k + 1, k)), shape=(n, n))
    return ReconstructionWeights(W, g)


def cost_matrix(W: ReconstructionWeights) -> np.ndarray:
    """Dense ``(I - W)^T (I - W)``."""
    iw = np.eye(W.n) - W.W.toarray()
    return iw.T @ iw


def canonical_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first component with magnitude above ``tol`` is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        nz = np.flatnonzero(np.abs(out[:, j]) > tol)
        if len(nz) and out[nz[0], j] < 0:
            out[:, j] = -out[:, j]
    return out


def embed(W: ReconstructionWeights, d: int = DEFAULT_DIM) -> np.ndarray:
    """Bottom ``d`` non-constant eigenvectors of the cost matrix, scaled by sqrt(n)."""
    n = W.n
    if not 1 <= d < n:
        raise ValidationError(f"d={d} must satisfy 1 <= d < n={n}")
    M = cost_matrix(W)
    # (I - W) 1 = 0, so the constant vector is an exact null vector of M and M
    # leaves its orthogonal complement invariant. Lifting the constant direction
    # above the spectrum makes the d smallest eigenvectors all mean-free, even
    # when the null space is degenerate (disconnected neighbourhoods).
    lift = np.trace(M) + 1.0
    shifted = M + (lift / n) * np.ones((n, n))
    try:
        _, vecs = scipy.linalg.eigh(shifted, subset_by_index=[0, d - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(vecs)):
        raise EigenFailure("non-finite eigenvectors")
    vecs = vecs - vecs.mean(axis=0)
    return canonical_signs(vecs) * np.sqrt(n)


def lle(X: SampleMatrix, k_neighbors: int = DEFAULT_NEIGHBORS, dim: int = DEFAULT_DIM,
        reg: float = DEFAULT_REG) -> Embedding:
    """Run the three LLE steps on ``X`` and carry its ids through."""
    if dim > X.cols:
        raise ValidationError(f"target dim {dim} exceeds the {X.cols} input features")
    g = knn_graph(X, k_neighbors)
    W = reconstruction_weights(X, g, reg)
    return Embedding(embed(W, dim), X.sample_ids, X.subject_ids)


def write_embedding_csv(e: Embedding, path: str | Path) -> None:
    write_csv(e, path, prefix="e")
