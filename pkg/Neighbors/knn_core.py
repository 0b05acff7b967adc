"""
kNN Core
k-nearest-neighbour regression, extrema and noise-rate estimation, and the
standard / label-noise-robust plug-in classifiers.

Training points are their own first neighbour: predicting at X_i averages the
responses of X_i and its k - 1 closest other points.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Any, Optional

import numpy as np

from Bounds.bounds import warn_if_outside_window
from Neighbors.nn_index import (
    EUCLIDEAN,
    Index,
    Metric,
    build_index,
    check_k,
    knn_query,
    knn_query_many,
    line_windows,
)
from Noise.noise_model import (
    DENOMINATOR_EPS,
    NOISELESS,
    DegenerateRatesError,
    NoiseRates,
    correct_regression,
)

logger = logging.getLogger(__name__)

# Confidence level used only for the theory-window diagnostic at fit time
WINDOW_DELTA = 0.05

__all__ = [
    'DENOMINATOR_EPS', 'DegenerateRatesError', 'NoiseRates',
    'RegressionSample', 'KnnRegressor', 'RobustKnnModel',
    'as_regression_sample', 'fit_regressor', 'predict', 'estimate_max', 'estimate_min',
    'estimate_noise_rates', 'fit_robust_classifier', 'fit_standard_classifier',
    'fit_known_rates_classifier', 'classify', 'classify_standard', 'corrected_regression',
]


@dataclass(frozen=True, eq=False)
class RegressionSample:
    """Points with responses in [0, 1] (noisy labels are the binary case)"""
    points: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        responses = np.array(self.responses, dtype=np.float64).reshape(-1)

        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError(f"points must be a non-empty (n, d) array, got shape {points.shape}")
        if responses.shape[0] != points.shape[0]:
            raise ValueError(f"{responses.shape[0]} responses for {points.shape[0]} points")
        if not np.all((responses >= 0) & (responses <= 1)):
            raise ValueError("responses must lie in [0, 1]")

        points.setflags(write=False)
        responses.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'responses', responses)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.responses == 0) | (self.responses == 1)))

    def complemented(self) -> 'RegressionSample':
        """Same points with responses replaced by 1 - Z"""
        return RegressionSample(self.points, 1.0 - self.responses)


def as_regression_sample(data) -> RegressionSample:
    """Accept a RegressionSample or anything with features / labels (a LabeledDataset)"""
    if isinstance(data, RegressionSample):
        return data
    if hasattr(data, 'features') and hasattr(data, 'labels'):
        return RegressionSample(data.features, data.labels)
    raise TypeError(f"expected RegressionSample or LabeledDataset, got {type(data).__name__}")


# ============================================================================
# REGRESSION
# ============================================================================

@dataclass(frozen=True, eq=False)
class KnnRegressor:
    """
    kNN regression estimate: the mean response of the k nearest points

    Sums run over neighbours in NeighborList order, so results are bit-identical
    to a straightforward per-query recomputation. Binary responses on a line
    index use integer window counts instead.
    """
    index: Index
    responses: np.ndarray
    k: int
    window_counts: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.index.n

    def predict(self, x) -> float:
        neighbors = knn_query(self.index, x, self.k)
        total = 0.0
        for j in neighbors.indices:
            total += self.responses[j]
        return total / self.k

    def _predict_by_neighbors(self, queries: np.ndarray) -> np.ndarray:
        indices, _ = knn_query_many(self.index, queries, self.k)
        total = np.zeros(indices.shape[0], dtype=np.float64)
        for column in range(self.k):
            total += self.responses[indices[:, column]]
        return total / self.k

    def predict_many(self, queries) -> np.ndarray:
        """Predictions for an (m, d) batch (a flat batch for one-dimensional data)"""
        matrix = np.asarray(queries, dtype=np.float64)
        if matrix.ndim == 1 and self.index.dim == 1:
            matrix = matrix.reshape(-1, 1)

        if self.window_counts is None or matrix.ndim != 2 or matrix.shape[0] == 0:
            return self._predict_by_neighbors(matrix)
        if matrix.shape[1] != 1 or not np.all(np.isfinite(matrix)):
            return self._predict_by_neighbors(matrix)

        starts, clear = line_windows(self.index, matrix[:, 0], self.k)
        counts = self.window_counts[starts + self.k] - self.window_counts[starts]
        predictions = counts / self.k
        if not np.all(clear):
            tied = np.flatnonzero(~clear)
            predictions[tied] = self._predict_by_neighbors(matrix[tied])
        return predictions


def fit_regressor(sample: RegressionSample, k: int, metric: Metric = EUCLIDEAN,
                  backend: str = 'auto', window_delta: float = WINDOW_DELTA) -> KnnRegressor:
    """
    Fit a kNN regressor

    Args:
        sample: Points and responses
        k: Neighbour count, 1 <= k <= n
        metric: Distance
        backend: Index backend (see nn_index.build_index)
        window_delta: Confidence level for the theory-window diagnostic

    Returns:
        KnnRegressor

    Raises:
        QueryError: k out of range
    """
    sample = as_regression_sample(sample)
    k = check_k(k, sample.n)
    warn_if_outside_window(sample.n, k, window_delta)

    index = build_index(sample.points, metric=metric, backend=backend)

    window_counts = None
    if index.backend == 'line' and sample.is_binary:
        window_counts = np.concatenate(([0], np.cumsum(sample.responses[index.order].astype(np.int64))))

    return KnnRegressor(index=index, responses=sample.responses, k=k, window_counts=window_counts)


def predict(regressor: KnnRegressor, x) -> float:
    """Mean response of the k nearest points to x"""
    return regressor.predict(x)


def _training_predictions(sample: RegressionSample, k: int, metric: Metric, backend: str) -> np.ndarray:
    regressor = fit_regressor(sample, k, metric=metric, backend=backend)
    return regressor.predict_many(regressor.index.points)


def estimate_max(sample: RegressionSample, k: int, metric: Metric = EUCLIDEAN, backend: str = 'auto') -> float:
    """Empirical maximum of the kNN estimate over the training points"""
    sample = as_regression_sample(sample)
    return float(_training_predictions(sample, k, metric, backend).max())


def estimate_min(sample: RegressionSample, k: int, metric: Metric = EUCLIDEAN, backend: str = 'auto') -> float:
    """Empirical minimum of the kNN estimate over the training points"""
    sample = as_regression_sample(sample)
    return float(_training_predictions(sample, k, metric, backend).min())


def _rates_from_predictions(predictions: np.ndarray) -> NoiseRates:
    p0 = float(predictions.min())
    p1 = 1.0 - float(predictions.max())
    # 1 - 1.0 rounding can leave a tiny negative
    return NoiseRates(max(p0, 0.0), max(p1, 0.0))


def estimate_noise_rates(sample: RegressionSample, k: int, metric: Metric = EUCLIDEAN,
                         backend: str = 'auto') -> NoiseRates:
    """
    Noise rates from the extrema of the corrupted-label kNN estimate

    p0_hat = min_i f(X_i), p1_hat = 1 - max_i f(X_i). The result is flagged
    degenerate when p0_hat + p1_hat >= 1.
    """
    sample = as_regression_sample(sample)
    rates = _rates_from_predictions(_training_predictions(sample, k, metric, backend))
    if rates.degenerate:
        logger.warning(f"Degenerate noise-rate estimate p0={rates.p0:.4f}, p1={rates.p1:.4f} (k={k}, n={sample.n})")
    return rates


# ============================================================================
# CLASSIFIERS
# ============================================================================

@dataclass(frozen=True, eq=False)
class RobustKnnModel:
    """
    Plug-in classifier 1{f(x) >= threshold} over a corrupted-label regressor

    kind is 'robust' (estimated rates), 'standard' (threshold 1/2) or
    'known_rates' (true rates supplied by the caller).
    """
    regressor: KnnRegressor
    estimated_rates: NoiseRates
    threshold: float
    kind: str = 'robust'

    @property
    def k(self) -> int:
        return self.regressor.k

    def predict(self, x) -> float:
        return self.regressor.predict(x)

    def predict_many(self, queries) -> np.ndarray:
        return self.regressor.predict_many(queries)

    def classify(self, x) -> int:
        return int(self.predict(x) >= self.threshold)

    def classify_many(self, queries) -> np.ndarray:
        return (self.predict_many(queries) >= self.threshold).astype(np.int64)

    def __call__(self, queries) -> np.ndarray:
        return self.classify_many(queries)

    def corrected_regression_raw(self, x) -> float:
        """Unclamped ratio (f(x) - p0_hat) / (1 - p0_hat - p1_hat)"""
        return correct_regression(self.predict(x), self.estimated_rates, clamp=False)

    def corrected_regression(self, x) -> float:
        return correct_regression(self.predict(x), self.estimated_rates, clamp=True)

    def corrected_regression_many(self, queries, clamp: bool = True) -> np.ndarray:
        return correct_regression(self.predict_many(queries), self.estimated_rates, clamp=clamp)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'k': self.k,
            'n': self.regressor.n,
            'p0_hat': self.estimated_rates.p0,
            'p1_hat': self.estimated_rates.p1,
            'threshold': self.threshold,
            'degenerate': self.estimated_rates.degenerate,
            'backend': self.regressor.index.backend,
        }


def _model(regressor: KnnRegressor, rates: NoiseRates, kind: str) -> RobustKnnModel:
    return RobustKnnModel(regressor=regressor, estimated_rates=rates, threshold=rates.threshold, kind=kind)


def fit_robust_classifier(sample: RegressionSample, k: int, metric: Metric = EUCLIDEAN,
                          backend: str = 'auto') -> RobustKnnModel:
    """
    Fit the label-noise-robust kNN classifier on corrupted labels

    1. fit the kNN regressor on the noisy labels
    2. estimate (p0, p1) from its extrema over the training points
    3. threshold at (1 + p0_hat - p1_hat) / 2

    Degenerate estimates still give a well-defined threshold in [0, 1].
    """
    sample = as_regression_sample(sample)
    if not sample.is_binary:
        raise ValueError("robust classifier needs binary labels")

    regressor = fit_regressor(sample, k, metric=metric, backend=backend)
    rates = _rates_from_predictions(regressor.predict_many(regressor.index.points))
    if rates.degenerate:
        logger.warning(f"Degenerate noise-rate estimate p0={rates.p0:.4f}, p1={rates.p1:.4f}; "
                       f"classification uses threshold {rates.threshold:.4f}")
    return _model(regressor, rates, 'robust')


def fit_standard_classifier(sample: RegressionSample, k: int, metric: Metric = EUCLIDEAN,
                            backend: str = 'auto') -> RobustKnnModel:
    """Plain kNN majority vote (threshold 1/2), blind to label noise"""
    regressor = fit_regressor(as_regression_sample(sample), k, metric=metric, backend=backend)
    return _model(regressor, NOISELESS, 'standard')


def fit_known_rates_classifier(sample: RegressionSample, k: int, rates: NoiseRates,
                               metric: Metric = EUCLIDEAN, backend: str = 'auto') -> RobustKnnModel:
    """kNN with the threshold set from true (known) noise rates"""
    regressor = fit_regressor(as_regression_sample(sample), k, metric=metric, backend=backend)
    return _model(regressor, rates, 'known_rates')


def classify(model: RobustKnnModel, x) -> int:
    """1 iff f(x) >= threshold (boundary goes to class 1)"""
    return model.classify(x)


def classify_standard(regressor: KnnRegressor, x) -> int:
    """1 iff f(x) >= 1/2"""
    return int(regressor.predict(x) >= 0.5)


def corrected_regression(model: RobustKnnModel, x) -> float:
    """
    Noise-corrected regression estimate, clamped to [0, 1]

    Raises:
        DegenerateRatesError: 1 - p0_hat - p1_hat <= DENOMINATOR_EPS
    """
    return model.corrected_regression(x)
