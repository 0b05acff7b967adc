"""
Noise Model
Class-conditional label-flip channel and the affine relation between the
clean regression function eta and the corrupted one:

    eta_corr = (1 - p0 - p1) * eta + p0
"""
import math
import logging
from dataclasses import dataclass
from typing import Dict, Any, Optional, Union

import numpy as np

from Data.datasets import LabeledDataset
from utils.seeding import get_rng

logger = logging.getLogger(__name__)

# Smallest admissible 1 - p0 - p1 when dividing by it
DENOMINATOR_EPS = 1e-9

ArrayLike = Union[float, np.ndarray]


class DegenerateRatesError(ValueError):
    """Raised when 1 - p0 - p1 is too small to invert the noise relation"""


@dataclass(frozen=True)
class NoiseRates:
    """
    Flip probabilities (p0 for true class 0, p1 for true class 1), true or estimated

    Estimated rates may be degenerate (p0 + p1 >= 1); true rates used by a
    NoiseChannel may not.
    """
    p0: float
    p1: float

    def __post_init__(self):
        for name in ('p0', 'p1'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0 or value > 1:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
            object.__setattr__(self, name, value)

    @property
    def degenerate(self) -> bool:
        return self.p0 + self.p1 >= 1.0

    @property
    def denominator(self) -> float:
        return 1.0 - self.p0 - self.p1

    @property
    def threshold(self) -> float:
        """Decision threshold (1 + p0 - p1)/2 on the corrupted regression; exactly 1/2 when p0 == p1"""
        return 0.5 + 0.5 * (self.p0 - self.p1)

    def for_labels(self, labels: np.ndarray) -> np.ndarray:
        """Per-label flip probability"""
        return np.where(np.asarray(labels) == 1, self.p1, self.p0)

    def to_dict(self) -> Dict[str, Any]:
        return {'p0': self.p0, 'p1': self.p1, 'degenerate': self.degenerate}


NOISELESS = NoiseRates(0.0, 0.0)


@dataclass(frozen=True)
class NoiseChannel:
    """Flip channel with true rates and the seed of its default random stream"""
    rates: NoiseRates
    rng_seed: int = 0

    def __post_init__(self):
        if self.rates.p0 >= 1 or self.rates.p1 >= 1 or self.rates.p0 + self.rates.p1 >= 1:
            raise ValueError(
                f"channel rates must satisfy p0 + p1 < 1, got ({self.rates.p0}, {self.rates.p1})"
            )
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ValueError(f"rng_seed must be a non-negative integer, got {self.rng_seed}")

    def generator(self) -> np.random.Generator:
        return get_rng(int(self.rng_seed))


def _as_binary(labels) -> np.ndarray:
    values = np.asarray(labels)
    if values.ndim != 1:
        raise ValueError(f"labels must be one-dimensional, got shape {values.shape}")
    if not np.all((values == 0) | (values == 1)):
        raise ValueError("labels must be binary 0/1")
    return values.astype(np.int64)


def corrupt_labels(labels, channel: NoiseChannel,
                   rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Pass labels through the flip channel

    Draws exactly one uniform per label in dataset order and flips label y when
    the draw is below p_y, so the stream layout is fixed for a given seed.

    Args:
        labels: Binary labels
        channel: Noise channel
        rng: Generator to draw from; defaults to the channel's own seeded stream

    Returns:
        Corrupted labels (int64)
    """
    clean = _as_binary(labels)
    generator = rng if rng is not None else channel.generator()
    draws = generator.random(clean.shape[0])
    flips = draws < channel.rates.for_labels(clean)
    return np.where(flips, 1 - clean, clean)


def corrupt_dataset(dataset: LabeledDataset, channel: NoiseChannel,
                    rng: Optional[np.random.Generator] = None) -> LabeledDataset:
    """Corrupt a dataset's labels; features are untouched and the input labels are kept as clean_labels"""
    noisy = corrupt_labels(dataset.labels, channel, rng=rng)
    flipped = int(np.sum(noisy != dataset.labels))
    logger.debug(f"Channel ({channel.rates.p0}, {channel.rates.p1}) flipped {flipped}/{dataset.n} labels")
    return LabeledDataset(dataset.features, noisy, dataset.labels)


def _check_unit(values: np.ndarray, name: str) -> None:
    if not np.all((values >= 0) & (values <= 1)):
        raise ValueError(f"{name} must lie in [0, 1]")


def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def corrupt_regression(eta: ArrayLike, rates: NoiseRates) -> ArrayLike:
    """Corrupted regression value(s) (1 - p0 - p1) * eta + p0"""
    scalar = np.ndim(eta) == 0
    values = np.asarray(eta, dtype=np.float64)
    _check_unit(values, 'eta')
    return _as_output((1.0 - rates.p0 - rates.p1) * values + rates.p0, scalar)


def invert_regression(eta_corr: ArrayLike, rates: NoiseRates) -> ArrayLike:
    """
    Clean regression value(s) from corrupted ones, (eta_corr - p0) / (1 - p0 - p1)

    Raises:
        ValueError: p0 + p1 >= 1
    """
    if rates.degenerate:
        raise ValueError(f"cannot invert with p0 + p1 >= 1, got ({rates.p0}, {rates.p1})")
    scalar = np.ndim(eta_corr) == 0
    values = np.asarray(eta_corr, dtype=np.float64)
    return _as_output((values - rates.p0) / (1.0 - rates.p0 - rates.p1), scalar)


def correct_regression(eta_corr_hat: ArrayLike, estimated_rates: NoiseRates,
                       clamp: bool = True, eps: float = DENOMINATOR_EPS) -> ArrayLike:
    """
    Ratio correction of an estimated corrupted regression with estimated rates

    Args:
        eta_corr_hat: Estimated corrupted regression value(s)
        estimated_rates: Estimated (p0, p1)
        clamp: Clamp the ratio to [0, 1]
        eps: Denominator guard

    Raises:
        DegenerateRatesError: 1 - p0 - p1 <= eps
    """
    denominator = estimated_rates.denominator
    if denominator <= eps:
        raise DegenerateRatesError(
            f"1 - p0 - p1 = {denominator:.3g} is not above {eps:g} for rates "
            f"({estimated_rates.p0}, {estimated_rates.p1})"
        )
    scalar = np.ndim(eta_corr_hat) == 0
    values = (np.asarray(eta_corr_hat, dtype=np.float64) - estimated_rates.p0) / denominator
    if clamp:
        values = np.clip(values, 0.0, 1.0)
    return _as_output(values, scalar)
