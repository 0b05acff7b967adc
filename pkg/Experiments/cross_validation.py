"""
Cross-Validation for k
Grid search over k scored by the robust classifier's 0-1 error on held-out noisy labels
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from Neighbors.knn_core import RegressionSample, as_regression_sample, fit_robust_classifier
from Neighbors.nn_index import EUCLIDEAN, Metric
from utils.seeding import STREAM_FOLDS, get_rng

logger = logging.getLogger(__name__)


def geometric_k_grid(n: int, points: int = 8, low: int = 5) -> List[int]:
    """Roughly geometric k values from low to n/2"""
    high = max(low, n // 2)
    grid = np.unique(np.round(np.geomspace(low, high, points)).astype(int))
    return [int(k) for k in grid]


def fold_assignments(n: int, folds: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Random partition of range(n) into folds of near-equal size"""
    return np.array_split(rng.permutation(n), folds)


def cross_validation_scores(sample: RegressionSample, k_grid: Sequence[int], folds: int = 5,
                            seed: int = 0, rng: Optional[np.random.Generator] = None,
                            metric: Metric = EUCLIDEAN, backend: str = 'auto') -> pd.DataFrame:
    """
    Mean validation error per k

    Every fold refits the robust classifier (rates re-estimated) on the other
    folds and scores it against the held-out noisy labels. Grid values larger
    than the smallest training split are dropped.

    Returns:
        DataFrame with columns ['k', 'mean_error'] sorted by k
    """
    sample = as_regression_sample(sample)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if folds > sample.n:
        raise ValueError(f"folds={folds} exceeds sample size {sample.n}")
    grid = sorted({int(k) for k in k_grid})
    if not grid or grid[0] < 1:
        raise ValueError(f"k_grid must hold positive integers, got {list(k_grid)}")

    generator = rng if rng is not None else get_rng(seed, STREAM_FOLDS)
    parts = fold_assignments(sample.n, folds, generator)
    smallest_train = sample.n - max(len(part) for part in parts)

    usable = [k for k in grid if k <= smallest_train]
    if len(usable) < len(grid):
        logger.warning(f"Dropping k values above the training split size {smallest_train}: "
                       f"{[k for k in grid if k > smallest_train]}")
    if not usable:
        raise ValueError(f"no k in the grid fits a training split of {smallest_train} points")

    errors = np.zeros(len(usable))
    for held_out in parts:
        train_mask = np.ones(sample.n, dtype=bool)
        train_mask[held_out] = False
        train = RegressionSample(sample.points[train_mask], sample.responses[train_mask])
        truth = sample.responses[held_out]

        for position, k in enumerate(usable):
            model = fit_robust_classifier(train, k, metric=metric, backend=backend)
            predicted = model.classify_many(sample.points[held_out])
            errors[position] += np.mean(predicted != truth)

    return pd.DataFrame({'k': usable, 'mean_error': errors / folds})


def cross_validate_k(sample: RegressionSample, k_grid: Sequence[int], folds: int = 5,
                     seed: int = 0, rng: Optional[np.random.Generator] = None,
                     metric: Metric = EUCLIDEAN, backend: str = 'auto') -> int:
    """
    k with the smallest mean validation error; ties go to the smallest k

    Raises:
        ValueError: folds < 2 or an empty / invalid grid
    """
    scores = cross_validation_scores(sample, k_grid, folds=folds, seed=seed, rng=rng,
                                     metric=metric, backend=backend)
    best = int(scores['k'].iloc[int(np.argmin(scores['mean_error'].to_numpy()))])
    logger.info(f"Cross-validation picked k={best} from {scores['k'].tolist()}")
    return best
