import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from somconsensus.errors import DimMismatch, EmptyInput, ValidationError
from somconsensus.som import (
    SomConfig,
    SomModel,
    best_matching_unit,
    grid_coords,
    partition_from_som,
    train_som,
    train_soms,
)


def _model(weights, rows=1, cols=None):
    weights = np.asarray(weights, dtype=float)
    cols = cols or len(weights) // rows
    cfg = SomConfig(grid_rows=rows, grid_cols=cols)
    return SomModel(cfg, weights, grid_coords(rows, cols), 0)


def test_single_update_from_zero():
    # one node at 0.0, sample 1.0, l = 0.5, h = 1: the node lands on 0.5
    m = _model([[0.0], [10.0]], rows=1, cols=2)
    x = np.array([1.0])
    bmu = best_matching_unit(m, x)
    assert bmu == 0
    assert m.weights[bmu] + 0.5 * 1.0 * (x - m.weights[bmu]) == pytest.approx([0.5])


def test_first_training_step_follows_update_rule():
    cfg = SomConfig(grid_rows=1, grid_cols=2, lr_init=0.5, lr_threshold=0.01, radius_init=1.0,
                    iter_max=1, seed=0)
    x = np.array([[0.0], [1.0]])
    # replay the seeded initialization: uniform weights in [0, 1], then one shuffle
    rng = np.random.default_rng(0)
    w0 = rng.random((2, 1))
    sample = x[rng.permutation(2)[0]]
    m = train_som(x, cfg)
    assert m.iterations_run == 1
    bmu = int(np.argmin(np.abs(w0[:, 0] - sample[0])))
    h = np.exp(-(np.arange(2) - bmu) ** 2 / 2.0)
    np.testing.assert_allclose(m.weights, w0 + 0.5 * h[:, None] * (sample - w0), atol=1e-15)


def test_two_far_clusters():
    rng = np.random.default_rng(4)
    a = rng.normal(0.0, 1.0, 50)
    b = rng.normal(100.0, 1.0, 50)
    data = np.concatenate([a, b])[:, None]
    m = train_som(data, SomConfig(grid_rows=1, grid_cols=2, iter_max=10000, seed=3))
    got = sorted(m.weights[:, 0])
    assert abs(got[0] - a.mean()) < 1.0
    assert abs(got[1] - b.mean()) < 1.0


def test_deterministic():
    data = np.random.default_rng(0).standard_normal((40, 3))
    cfg = SomConfig(iter_max=500, seed=9)
    assert train_som(data, cfg).weights.tobytes() == train_som(data, cfg).weights.tobytes()


def test_batch_matches_single_runs():
    data = np.random.default_rng(1).standard_normal((30, 4))
    cfgs = [SomConfig(iter_max=300, seed=s) for s in (5, 17, 99)]
    batched = train_soms(data, cfgs)
    for cfg, m in zip(cfgs, batched):
        assert m.weights.tobytes() == train_som(data, cfg).weights.tobytes()


def test_batch_rejects_mixed_configs():
    data = np.zeros((4, 1))
    with pytest.raises(ValidationError):
        train_soms(data, [SomConfig(iter_max=10), SomConfig(iter_max=20)])


def test_learning_rate_decays_to_threshold():
    cfg = SomConfig(lr_init=0.5, lr_threshold=0.01, iter_max=1000)
    lrs = cfg.learning_rates(1000)
    assert lrs[0] == 0.5
    assert np.all(np.diff(lrs) < 0)
    assert lrs[-1] > 0.01
    radii = cfg.radii(1000)
    assert radii[0] == cfg.radius_init and np.all(np.diff(radii) < 0) and radii[-1] > 0.5


def test_no_steps_when_threshold_not_below_initial_rate():
    data = np.random.default_rng(0).standard_normal((10, 2))
    m = train_som(data, SomConfig(lr_init=0.5, lr_threshold=0.5, iter_max=100))
    assert m.iterations_run == 0
    assert np.all(m.weights >= data.min(axis=0)) and np.all(m.weights <= data.max(axis=0))


def test_iterations_bounded_and_weights_finite():
    data = np.random.default_rng(0).standard_normal((25, 3))
    m = train_som(data, SomConfig(iter_max=123))
    assert m.iterations_run <= 123
    assert np.all(np.isfinite(m.weights))
    json.loads(m.to_json())


def test_invalid_configs():
    for kwargs in ({"grid_rows": 1, "grid_cols": 1}, {"lr_init": 0.0}, {"lr_init": 1.5},
                   {"lr_threshold": 0.0}, {"radius_init": 0.0}, {"iter_max": 0}):
        with pytest.raises(ValidationError):
            SomConfig(**kwargs)


def test_empty_input():
    with pytest.raises(EmptyInput):
        train_som(np.empty((0, 3)), SomConfig())


def test_bmu_exact_and_tie():
    w = np.arange(12, dtype=float).reshape(6, 2)
    m = _model(w, rows=2, cols=3)
    assert best_matching_unit(m, w[3]) == 3
    tie = _model([[0.0], [5.0], [5.0], [9.0], [3.0]])
    assert best_matching_unit(tie, [1.5]) == 0
    assert best_matching_unit(tie, [5.0]) == 1


def test_bmu_matches_linear_scan():
    rng = np.random.default_rng(2)
    m = _model(rng.standard_normal((16, 5)), rows=4, cols=4)
    for _ in range(50):
        x = rng.standard_normal(5)
        dists = [float(np.sum((x - w) ** 2)) for w in m.weights]
        assert best_matching_unit(m, x) == dists.index(min(dists))


def test_bmu_dim_mismatch():
    m = _model(np.zeros((4, 2)))
    with pytest.raises(DimMismatch):
        best_matching_unit(m, [1.0, 2.0, 3.0])
    with pytest.raises(DimMismatch):
        partition_from_som(m, np.zeros((3, 3)))


def test_partition_from_som(cohort):
    data, _ = cohort
    x = data.values[:, :3]
    m = train_som(x, SomConfig(iter_max=200))
    p = partition_from_som(m, x)
    assert p.n_samples == 171 and p.n_clusters <= 16
    same = partition_from_som(m, np.ones((7, 3)))
    assert same.n_clusters == 1


@settings(max_examples=100, deadline=None)
@given(
    w=st.floats(-100, 100),
    x=st.floats(-100, 100),
    lr=st.floats(0.0, 1.0, exclude_min=True),
    h=st.floats(0.0, 1.0, exclude_min=True),
)
def test_update_never_moves_away(w, x, lr, h):
    moved = w + lr * h * (x - w)
    assert abs(moved - x) <= abs(w - x) + 1e-12
