"""Online Kohonen map on a rectangular grid with a truncated Gaussian neighbourhood."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DimMismatch, EmptyInput, ValidationError
from .partition import Partition

FINAL_RADIUS = 0.5


@dataclass(frozen=True)
class SomConfig:
    grid_rows: int = 4
    grid_cols: int = 4
    lr_init: float = 0.5
    lr_threshold: float = 0.01
    radius_init: float = 2.0
    iter_max: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1 or self.grid_rows * self.grid_cols < 2:
            raise ValidationError("the grid needs at least 2 nodes")
        if not 0 < self.lr_init <= 1:
            raise ValidationError("lr_init must be in (0, 1]")
        if not self.lr_threshold > 0:
            raise ValidationError("lr_threshold must be > 0")
        if not self.radius_init > 0:
            raise ValidationError("radius_init must be > 0")
        if self.iter_max < 1:
            raise ValidationError("iter_max must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

    @property
    def n_nodes(self) -> int:
        return self.grid_rows * self.grid_cols

    def with_seed(self, seed: int) -> "SomConfig":
        return replace(self, seed=int(seed))

    def learning_rates(self, steps: int) -> np.ndarray:
        t = np.arange(steps) / self.iter_max
        return self.lr_init * (self.lr_threshold / self.lr_init) ** t

    def radii(self, steps: int) -> np.ndarray:
        t = np.arange(steps) / self.iter_max
        return self.radius_init * (FINAL_RADIUS / self.radius_init) ** t


@dataclass(frozen=True, eq=False)
class SomModel:
    config: SomConfig
    weights: np.ndarray
    node_coords: np.ndarray
    iterations_run: int

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def to_json(self) -> str:
        return json.dumps({
            "config": asdict(self.config),
            "weights": self.weights.tolist(),
            "node_coords": self.node_coords.tolist(),
            "iterations_run": self.iterations_run,
        })


def grid_coords(rows: int, cols: int) -> np.ndarray:
    """``(rows*cols, 2)`` integer positions, node index = r * cols + c."""
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.stack([r, c], axis=1)


def _init_member(x: np.ndarray, cfg: SomConfig, epochs: int):
    rng = np.random.default_rng(cfg.seed)
    lo, hi = x.min(axis=0), x.max(axis=0)
    w = lo + rng.random((cfg.n_nodes, x.shape[1])) * (hi - lo)
    order = [rng.permutation(len(x)) for _ in range(epochs)]
    order = np.concatenate(order) if order else np.empty(0, dtype=np.int64)
    return w, order


def train_soms(D, cfgs: Sequence[SomConfig]) -> list[SomModel]:
    """Train several maps that differ only in their seed, in lock-step.

    Member ``b`` is bit-identical to ``train_som(D, cfgs[b])``: every operation
    is element- or row-wise, so batching never changes a member's arithmetic.
    """
    x = np.asarray(getattr(D, "values", D), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise EmptyInput("cannot train a map on an empty embedding")
    if not cfgs:
        return []
    base = replace(cfgs[0], seed=0)
    if any(replace(c, seed=0) != base for c in cfgs):
        raise ValidationError("batched maps must share every setting except the seed")

    lrs = base.learning_rates(base.iter_max)
    # lr is strictly decreasing, so the threshold cuts the schedule at one step
    steps = int(np.count_nonzero(lrs > base.lr_threshold))
    epochs = -(-steps // len(x))
    members = [_init_member(x, c, epochs) for c in cfgs]
    w = np.stack([m[0] for m in members])
    order = np.stack([m[1] for m in members])

    coords = grid_coords(base.grid_rows, base.grid_cols)
    grid_sq = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1).astype(np.float64)
    radii = base.radii(base.iter_max)
    inv_two_var = 1.0 / (2.0 * radii ** 2)

    for t in range(steps):
        delta = x[order[:, t]][:, None, :] - w
        bmu = (delta * delta).sum(axis=-1).argmin(axis=1)
        # Gaussian weights inside the current radius, zero outside; once the
        # radius drops below one grid step only the winner moves
        d2 = grid_sq[bmu]
        h = np.where(d2 <= radii[t] ** 2, np.exp(-d2 * inv_two_var[t]), 0.0)
        w += (lrs[t] * h)[:, :, None] * delta

    models = []
    for b, cfg in enumerate(cfgs):
        wb = w[b].copy()
        wb.setflags(write=False)
        models.append(SomModel(cfg, wb, coords, steps))
    return models


def train_som(D, cfg: SomConfig) -> SomModel:
    """Train one map; fully determined by ``(D, cfg)``.

    Weights start uniform in the data's bounding box. One iteration is one
    sample presentation, samples being presented in a fresh seeded shuffle each
    epoch. Nodes within the current radius of the winner (grid distance) move
    with Gaussian weight. Training stops after ``iter_max`` presentations or
    once the learning rate is no longer above ``lr_threshold``.
    """
    return train_soms(D, [cfg])[0]


def best_matching_unit(model: SomModel, x) -> int:
    """Index of the node nearest to ``x``; ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.dim:
        raise DimMismatch(f"sample has {x.shape[0]} dims, map has {model.dim}")
    return int(np.argmin(((model.weights - x) ** 2).sum(axis=1)))


def bmu_indices(model: SomModel, D) -> np.ndarray:
    x = np.asarray(getattr(D, "values", D), dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimMismatch(f"data has shape {x.shape}, map has {model.dim} dims")
    d = ((x[:, None, :] - model.weights[None, :, :]) ** 2).sum(-1)
    return d.argmin(axis=1)


def partition_from_som(model: SomModel, D) -> Partition:
    """Cluster of each row = its best matching node (canonicalized)."""
    return Partition(bmu_indices(model, D))
