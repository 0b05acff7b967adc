import numpy as np
import pytest

from Experiments.cross_validation import (
    cross_validate_k,
    cross_validation_scores,
    fold_assignments,
    geometric_k_grid,
)
from Neighbors.knn_core import RegressionSample


@pytest.fixture
def noisy_ramp():
    rng = np.random.default_rng(4)
    points = rng.random(400)
    labels = (rng.random(400) < points).astype(int)
    return RegressionSample(points, labels)


class TestGrid:
    def test_geometric_grid(self):
        grid = geometric_k_grid(1000)
        assert grid[0] == 5
        assert grid[-1] == 500
        assert grid == sorted(set(grid))

    def test_small_n_collapses(self):
        assert geometric_k_grid(4) == [5]

    def test_folds_partition_the_sample(self):
        parts = fold_assignments(23, 5, np.random.default_rng(0))
        assert sorted(np.concatenate(parts).tolist()) == list(range(23))
        assert {len(part) for part in parts} == {4, 5}


class TestCrossValidation:
    def test_singleton_grid(self, noisy_ramp):
        assert cross_validate_k(noisy_ramp, [17]) == 17

    def test_constant_labels_pick_smallest_k(self):
        sample = RegressionSample(np.linspace(0.0, 1.0, 50), [1] * 50)
        assert cross_validate_k(sample, [9, 3, 5], folds=5) == 3

    def test_scores_table(self, noisy_ramp):
        scores = cross_validation_scores(noisy_ramp, [40, 5, 20], folds=4, seed=2)
        assert scores['k'].tolist() == [5, 20, 40]
        assert np.all((scores['mean_error'] >= 0.0) & (scores['mean_error'] <= 1.0))

    def test_same_seed_same_choice(self, noisy_ramp):
        grid = geometric_k_grid(noisy_ramp.n)
        assert cross_validate_k(noisy_ramp, grid, seed=8) == cross_validate_k(noisy_ramp, grid, seed=8)

    def test_large_k_dropped(self):
        sample = RegressionSample(np.linspace(0.0, 1.0, 10), [0, 1] * 5)
        scores = cross_validation_scores(sample, [2, 8, 9], folds=5)
        assert scores['k'].tolist() == [2, 8]
        with pytest.raises(ValueError):
            cross_validation_scores(sample, [9], folds=5)

    @pytest.mark.parametrize('folds, grid', [(1, [3]), (11, [3]), (5, []), (5, [0, 3])])
    def test_invalid(self, folds, grid):
        sample = RegressionSample(np.linspace(0.0, 1.0, 10), [0, 1] * 5)
        with pytest.raises(ValueError):
            cross_validation_scores(sample, grid, folds=folds)
