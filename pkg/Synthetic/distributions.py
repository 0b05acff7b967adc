"""
Synthetic Distributions
Distributions with known marginal, regression function and smoothness / margin constants.

Built-ins with the uniform marginal on [0, 1] carry a piecewise-linear regression
function, so ball measures, margin sets and excess risks are exactly computable.
gaussian_probit is sampling-only.
"""
import math
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Any, Optional, Tuple

import numpy as np
from scipy.stats import norm

from Data.datasets import LabeledDataset
from Noise.noise_model import NOISELESS, NoiseRates, corrupt_regression
from utils.seeding import get_rng

logger = logging.getLogger(__name__)

UNIFORM = 'uniform'
GAUSSIAN = 'gaussian'


@dataclass(frozen=True)
class SyntheticDistribution:
    """
    Marginal plus regression function with declared constants

    For the uniform marginal the regression function is np.interp over
    (breakpoints, values). For the Gaussian marginal it is
    Phi(direction . x / scale). noise records the channel of a corrupted
    distribution: uniform values already include it, the Gaussian regression
    applies it on evaluation.
    """
    kind: str
    params: Dict[str, Any]
    lam: float
    omega: float
    alpha: float = 0.0
    c_alpha: float = 1.0
    marginal: str = UNIFORM
    dim: int = 1
    breakpoints: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()
    direction: Tuple[float, ...] = ()
    scale: float = 1.0
    noise: NoiseRates = field(default=NOISELESS)

    def __post_init__(self):
        if self.marginal == UNIFORM:
            _check_piecewise(self.breakpoints, self.values)
        elif self.marginal == GAUSSIAN:
            if len(self.direction) != self.dim or self.scale <= 0:
                raise ValueError("gaussian marginal needs a direction of length dim and scale > 0")
        else:
            raise ValueError(f"Unknown marginal: {self.marginal}")

    @property
    def exact(self) -> bool:
        """Exact (analytic / quadrature) risk and measure computations are available"""
        return self.marginal == UNIFORM

    def eta(self, x) -> np.ndarray:
        """
        Regression function P(Y = 1 | X = x)

        Args:
            x: (m,) points for one-dimensional distributions, (m, dim) otherwise

        Returns:
            (m,) values in [0, 1]
        """
        if self.marginal == UNIFORM:
            points = np.asarray(x, dtype=np.float64).reshape(-1)
            return np.interp(points, self.breakpoints, self.values)

        points = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        clean = norm.cdf(points @ np.asarray(self.direction) / self.scale)
        if self.noise == NOISELESS:
            return clean
        return corrupt_regression(clean, self.noise)

    def to_dict(self) -> Dict[str, Any]:
        """JSON descriptor accepted by distribution_from_dict"""
        descriptor = {'name': self.kind, **self.params}
        if self.noise != NOISELESS:
            descriptor['noise'] = {'p0': self.noise.p0, 'p1': self.noise.p1}
        return descriptor


def _check_piecewise(breakpoints: Tuple[float, ...], values: Tuple[float, ...]) -> None:
    xs = np.asarray(breakpoints, dtype=np.float64)
    ys = np.asarray(values, dtype=np.float64)
    if xs.ndim != 1 or xs.shape[0] < 2 or xs.shape != ys.shape:
        raise ValueError("need at least two breakpoints with one value each")
    if xs[0] != 0.0 or xs[-1] != 1.0 or not np.all(np.diff(xs) > 0):
        raise ValueError(f"breakpoints must increase strictly from 0 to 1, got {breakpoints}")
    if not np.all(np.isfinite(ys)) or np.any(ys < 0) or np.any(ys > 1):
        raise ValueError(f"regression values must lie in [0, 1], got {values}")


# ============================================================================
# BUILT-INS
# ============================================================================

def flat_level(p0: float, p1: float) -> float:
    """Height m = (2 - 3p0 - p1) / (4(1 - p0 - p1)) of the flat piece in the inconsistency example"""
    return (2.0 - 3.0 * p0 - p1) / (4.0 * (1.0 - p0 - p1))


def make_inconsistency_example(p0: float, p1: float) -> SyntheticDistribution:
    """
    Inconsistency example: slope 3/2 up to m, flat at m over a third of [0, 1], slope 3/2 to 1

    The flat level m sits strictly between 1/2 and the clean level whose corrupted
    value is 1/2, so a noise-blind classifier gets the whole flat piece wrong.

    Args:
        p0, p1: Noise rates in (0, 1/2), p0 != p1

    Returns:
        Uniform-marginal distribution with lambda=1, omega=3, alpha=0, C_alpha=1
    """
    for name, rate in (('p0', p0), ('p1', p1)):
        if not (0.0 < rate < 0.5):
            raise ValueError(f"{name} must be in (0, 1/2), got {rate}")
    if p0 == p1:
        raise ValueError("inconsistency example needs asymmetric noise (p0 != p1)")

    m = flat_level(p0, p1)
    return SyntheticDistribution(
        kind='inconsistency_example',
        params={'p0': float(p0), 'p1': float(p1)},
        lam=1.0, omega=3.0, alpha=0.0, c_alpha=1.0,
        breakpoints=(0.0, 2.0 * m / 3.0, (2.0 * m + 1.0) / 3.0, 1.0),
        values=(0.0, m, m, 1.0),
    )


def ramp() -> SyntheticDistribution:
    """eta(x) = x; measure-smooth with lambda=1, omega=1"""
    return SyntheticDistribution(
        kind='ramp', params={},
        lam=1.0, omega=1.0, alpha=1.0, c_alpha=2.0,
        breakpoints=(0.0, 1.0), values=(0.0, 1.0),
    )


def constant(c: float, omega: float = 0.0) -> SyntheticDistribution:
    """eta(x) = c everywhere"""
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"constant level must be in [0, 1], got {c}")
    return SyntheticDistribution(
        kind='constant', params={'c': float(c), 'omega': float(omega)},
        lam=1.0, omega=float(omega), alpha=0.0, c_alpha=1.0,
        breakpoints=(0.0, 1.0), values=(float(c), float(c)),
    )


def piecewise_linear(breakpoints, values, lam: float, omega: float,
                     alpha: float = 0.0, c_alpha: float = 1.0) -> SyntheticDistribution:
    """User-specified piecewise-linear regression function on the uniform marginal"""
    breakpoints = tuple(float(b) for b in breakpoints)
    values = tuple(float(v) for v in values)
    return SyntheticDistribution(
        kind='piecewise_linear',
        params={'breakpoints': list(breakpoints), 'values': list(values),
                'lambda': lam, 'omega': omega, 'alpha': alpha, 'c_alpha': c_alpha},
        lam=lam, omega=omega, alpha=alpha, c_alpha=c_alpha,
        breakpoints=breakpoints, values=values,
    )


def gaussian_probit(dim: int = 2, scale: float = 1.0) -> SyntheticDistribution:
    """
    Standard Gaussian marginal in R^dim with eta(x) = Phi(sum(x) / (sqrt(dim) * scale))

    Sampling-only: no exact ball measures or excess risk. Smoothness constants
    are nominal.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    direction = tuple([1.0 / math.sqrt(dim)] * dim)
    return SyntheticDistribution(
        kind='gaussian_probit', params={'dim': int(dim), 'scale': float(scale)},
        lam=1.0, omega=1.0, alpha=1.0, c_alpha=1.0,
        marginal=GAUSSIAN, dim=int(dim), direction=direction, scale=float(scale),
    )


_BUILDERS = {
    'inconsistency_example': lambda d: make_inconsistency_example(d['p0'], d['p1']),
    'ramp': lambda d: ramp(),
    'constant': lambda d: constant(d['c'], d.get('omega', 0.0)),
    'piecewise_linear': lambda d: piecewise_linear(
        d['breakpoints'], d['values'], d.get('lambda', 1.0), d.get('omega', 1.0),
        d.get('alpha', 0.0), d.get('c_alpha', 1.0)
    ),
    'gaussian_probit': lambda d: gaussian_probit(d.get('dim', 2), d.get('scale', 1.0)),
}


def distribution_from_dict(descriptor: Dict[str, Any]) -> SyntheticDistribution:
    """
    Build a distribution from its JSON descriptor

    Example:
        {"name": "inconsistency_example", "p0": 0.1, "p1": 0.3}

    Raises:
        ValueError: Unknown name or missing parameters
    """
    name = descriptor.get('name')
    if name not in _BUILDERS:
        raise ValueError(f"Unknown distribution '{name}', expected one of {sorted(_BUILDERS)}")
    try:
        dist = _BUILDERS[name](descriptor)
    except KeyError as e:
        raise ValueError(f"distribution '{name}' missing parameter {e}")

    if 'noise' in descriptor:
        noise = descriptor['noise']
        dist = corrupted(dist, NoiseRates(noise['p0'], noise['p1']))
    return dist


# ============================================================================
# DERIVED QUANTITIES
# ============================================================================

def corrupted(dist: SyntheticDistribution, rates: NoiseRates) -> SyntheticDistribution:
    """
    The distribution of (X, noisy Y): same marginal, regression (1 - p0 - p1) eta + p0

    Uniform-marginal distributions stay piecewise linear with the same breakpoints.
    """
    if dist.noise != NOISELESS:
        raise ValueError("distribution is already corrupted")
    if rates.degenerate:
        raise ValueError(f"noise rates must satisfy p0 + p1 < 1, got ({rates.p0}, {rates.p1})")
    if dist.marginal == UNIFORM:
        values = tuple(float(v) for v in corrupt_regression(np.asarray(dist.values), rates))
        return replace(dist, values=values, noise=rates)
    return replace(dist, noise=rates)


def regression_extrema(dist: SyntheticDistribution, rates: NoiseRates = NOISELESS) -> Tuple[float, float]:
    """
    (inf, sup) of the regression function after the noise map

    For a distribution meeting the range assumption this is (p0, 1 - p1).
    """
    if dist.marginal == UNIFORM:
        low, high = min(dist.values), max(dist.values)
    else:
        low, high = 0.0, 1.0
    return (float(corrupt_regression(low, rates)), float(corrupt_regression(high, rates)))


def integrated_regression(dist: SyntheticDistribution) -> float:
    """Integral of eta over the uniform marginal (the expected positive fraction)"""
    require_exact(dist)
    xs = np.asarray(dist.breakpoints)
    ys = np.asarray(dist.values)
    return float(np.sum(np.diff(xs) * (ys[:-1] + ys[1:]) / 2.0))


def require_exact(dist: SyntheticDistribution) -> None:
    if not dist.exact:
        raise ValueError(f"'{dist.kind}' is sampling-only; exact computations need the uniform marginal")


# ============================================================================
# SAMPLING AND BAYES RULE
# ============================================================================

def sample_features(dist: SyntheticDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    if dist.marginal == UNIFORM:
        return rng.random(n).reshape(-1, 1)
    return rng.standard_normal((n, dist.dim))


def sample(dist: SyntheticDistribution, n: int, seed: Optional[int] = None,
           rng: Optional[np.random.Generator] = None) -> LabeledDataset:
    """
    Draw n i.i.d. clean pairs: X ~ marginal, then Y ~ Bernoulli(eta(X))

    All features are drawn before all label uniforms.

    Args:
        dist: Distribution
        n: Sample size (>= 1)
        seed: Seed for a fresh stream (ignored when rng is given)
        rng: Generator to draw from
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    generator = rng if rng is not None else get_rng(0 if seed is None else int(seed))

    features = sample_features(dist, n, generator)
    eta = dist.eta(features if dist.dim > 1 else features[:, 0])
    labels = (generator.random(n) < eta).astype(np.int64)
    return LabeledDataset(features, labels)


def bayes_labels(dist: SyntheticDistribution, x) -> np.ndarray:
    """Vectorized Bayes rule 1{eta(x) >= 1/2}"""
    return (dist.eta(x) >= 0.5).astype(np.int64)


def bayes_classify(dist: SyntheticDistribution, x) -> int:
    """Bayes label at one point (1/2 goes to class 1)"""
    point = np.asarray(x, dtype=np.float64).reshape(1, -1 if dist.dim > 1 else 1)
    return int(bayes_labels(dist, point)[0])
