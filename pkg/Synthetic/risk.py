"""
Exact Risk and Assumption Checks
Excess risk, disagreement sets and smoothness / margin verification for
uniform-marginal distributions on [0, 1], plus a held-out fallback for
sampling-only distributions.

Excess risk is the integral of |eta - 1/2| over the points where a classifier
and the Bayes rule disagree.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from Noise.noise_model import NOISELESS, NoiseRates
from Synthetic.distributions import (
    SyntheticDistribution,
    corrupted,
    sample_features,
    require_exact,
)
from utils.seeding import get_rng

logger = logging.getLogger(__name__)

DEFAULT_QUAD_TOL = 1e-6
DEFAULT_SCAN_NODES = 100_001
MAX_BISECTIONS = 80
SNAP_TOL = 1e-12

LabelFunction = Callable[[np.ndarray], np.ndarray]


def ball_measure(x, r) -> np.ndarray:
    """Uniform-marginal measure of the ball of radius r around x: |[x - r, x + r] intersected with [0, 1]|"""
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    return np.clip(np.minimum(1.0, x + r) - np.maximum(0.0, x - r), 0.0, None)


def _evaluate(classifier: LabelFunction, points: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        labels = np.asarray(classifier(points))
    else:
        labels = np.array([classifier(float(x)) for x in points])
    if labels.shape != points.shape:
        raise ValueError(f"classifier returned shape {labels.shape} for {points.shape[0]} points")
    return labels.astype(np.int64)


def _half_crossings(dist: SyntheticDistribution) -> List[float]:
    """Points where the piecewise-linear regression function crosses 1/2"""
    crossings = []
    for (a, b), (ya, yb) in zip(zip(dist.breakpoints[:-1], dist.breakpoints[1:]),
                                zip(dist.values[:-1], dist.values[1:])):
        if ya != yb and min(ya, yb) < 0.5 < max(ya, yb):
            crossings.append(a + (0.5 - ya) * (b - a) / (yb - ya))
    return crossings


def decision_boundaries(classifier: LabelFunction, scan_nodes: int = DEFAULT_SCAN_NODES,
                        quad_tol: float = DEFAULT_QUAD_TOL, vectorized: bool = True) -> np.ndarray:
    """
    Locate label changes of a classifier on [0, 1]

    Scans scan_nodes equally spaced nodes, then bisects every bracket with a
    label change (all brackets at once) until each is narrower than
    2 * quad_tol / (number of brackets). A misplaced boundary costs at most half
    its bracket width of risk, so the total error stays under quad_tol.

    Returns:
        Sorted boundary estimates
    """
    grid = np.linspace(0.0, 1.0, scan_nodes)
    labels = _evaluate(classifier, grid, vectorized)
    brackets = np.flatnonzero(labels[:-1] != labels[1:])
    if brackets.size == 0:
        return np.empty(0)

    width = max(2.0 * quad_tol / brackets.size, 1e-15)
    lo = grid[brackets].copy()
    hi = grid[brackets + 1].copy()
    left_label = labels[brackets]

    for _ in range(MAX_BISECTIONS):
        if np.max(hi - lo) <= width:
            break
        mid = 0.5 * (lo + hi)
        same = _evaluate(classifier, mid, vectorized) == left_label
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)

    return 0.5 * (lo + hi)


def excess_risk(dist: SyntheticDistribution, classifier: LabelFunction,
                quad_tol: float = DEFAULT_QUAD_TOL, rates: Optional[NoiseRates] = None,
                scan_nodes: int = DEFAULT_SCAN_NODES, vectorized: bool = True) -> float:
    """
    Exact excess risk of a classifier under a uniform-marginal distribution

    [0, 1] is cut at the regression breakpoints, the crossings of 1/2 and the
    classifier's decision boundaries. On every cell |eta - 1/2| is linear and the
    classifier constant, so the trapezoid rule is exact per cell; the only error
    comes from locating the decision boundaries, which are bisected finely enough
    to keep the total under quad_tol.

    Args:
        dist: Clean distribution
        classifier: Label function on (m,) arrays of points in [0, 1]
        quad_tol: Absolute tolerance
        rates: When given, the risk is measured against the corrupted distribution
        scan_nodes: Nodes of the boundary scan
        vectorized: classifier accepts arrays (else called per point)

    Returns:
        Excess risk (>= 0)
    """
    require_exact(dist)
    target = dist if rates is None or rates == NOISELESS else corrupted(dist, rates)

    boundaries = decision_boundaries(classifier, scan_nodes=scan_nodes, quad_tol=quad_tol, vectorized=vectorized)

    edges = np.unique(np.concatenate((
        np.asarray(target.breakpoints),
        np.asarray(_half_crossings(target)),
        np.clip(boundaries, 0.0, 1.0),
    )))
    a, b = edges[:-1], edges[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    mid = 0.5 * (a + b)

    mid_eta = target.eta(mid)
    bayes = mid_eta >= 0.5
    predicted = _evaluate(classifier, mid, vectorized) == 1
    # the boundary value eta == 1/2 never counts as disagreement
    disagree = (predicted != bayes) & (mid_eta != 0.5)
    if not np.any(disagree):
        return 0.0

    nodes = np.stack((a[disagree], b[disagree]), axis=1)
    integrand = np.abs(target.eta(nodes.reshape(-1)).reshape(nodes.shape) - 0.5)
    cells = np.trapz(integrand, x=nodes, axis=-1)
    return float(np.sum(cells))


def holdout_excess_risk(dist: SyntheticDistribution, classifier: LabelFunction,
                        n_test: int = 100_000, seed: int = 0,
                        rates: Optional[NoiseRates] = None) -> float:
    """
    Monte Carlo excess risk from a held-out sample of the marginal

    Used for sampling-only distributions; needs the regression function but not
    an exact marginal measure.
    """
    target = dist if rates is None or rates == NOISELESS else corrupted(dist, rates)
    rng = get_rng(seed)
    features = sample_features(target, n_test, rng)
    points = features if target.dim > 1 else features[:, 0]

    eta = target.eta(points)
    predicted = np.asarray(classifier(points)).astype(np.int64)
    disagree = ((eta - 0.5) * (predicted - 0.5)) < 0
    return float(np.mean(np.abs(eta - 0.5) * disagree))


# ============================================================================
# DISAGREEMENT SET
# ============================================================================

@dataclass(frozen=True)
class DisagreementSet:
    """Points where eta and the corrupted eta sit on opposite sides of 1/2 (each by at least theta when theta > 0)"""
    theta: float
    measure: float
    intervals: Tuple[Tuple[float, float], ...]


def _eta_range_preimage(a: float, b: float, ya: float, yb: float,
                        low: float, high: float, strict: bool) -> Optional[Tuple[float, float]]:
    """x-interval within [a, b] where the linear piece takes values in [low, high] (open when strict)"""
    if low > high or (strict and low >= high):
        return None
    if ya == yb:
        inside = (low < ya < high) if strict else (low <= ya <= high)
        return (a, b) if inside else None

    slope = (yb - ya) / (b - a)
    x_low = a + (low - ya) / slope
    x_high = a + (high - ya) / slope
    lo, hi = max(a, min(x_low, x_high)), min(b, max(x_low, x_high))
    if hi <= lo:
        return None
    return (lo, hi)


def _snap(value: float, target: float) -> float:
    """Pull a computed eta cut onto target when they differ only by rounding"""
    return target if abs(value - target) <= SNAP_TOL else value


def _merge(intervals: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    merged: List[Tuple[float, float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def disagreement_set(dist: SyntheticDistribution, rates: NoiseRates, theta: float = 0.0) -> DisagreementSet:
    """
    Disagreement set between the clean and corrupted regression functions

    theta = 0: {(eta - 1/2)(eta_corr - 1/2) < 0}
    theta > 0: {eta <= 1/2 - theta, eta_corr >= 1/2 + theta} union {eta >= 1/2 + theta, eta_corr <= 1/2 - theta}

    eta_corr is an increasing affine map of eta, so each condition is an eta-range
    and every piece contributes at most one interval per condition.
    """
    require_exact(dist)
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    if rates.degenerate:
        raise ValueError(f"noise rates must satisfy p0 + p1 < 1, got ({rates.p0}, {rates.p1})")

    slope = rates.denominator
    strict = theta == 0.0
    lower_cut = _snap((0.5 + theta - rates.p0) / slope, 0.5 - theta)
    upper_cut = _snap((0.5 - theta - rates.p0) / slope, 0.5 + theta)
    # eta-ranges: below 1/2 yet corrupted above, and above 1/2 yet corrupted below
    ranges = [
        (lower_cut, 0.5 - theta),
        (0.5 + theta, upper_cut),
    ]

    pieces = []
    for i in range(len(dist.breakpoints) - 1):
        a, b = dist.breakpoints[i], dist.breakpoints[i + 1]
        ya, yb = dist.values[i], dist.values[i + 1]
        for low, high in ranges:
            found = _eta_range_preimage(a, b, ya, yb, low, high, strict)
            if found is not None:
                pieces.append(found)

    intervals = _merge(pieces)
    measure = float(sum(hi - lo for lo, hi in intervals))
    return DisagreementSet(theta=float(theta), measure=measure, intervals=tuple(intervals))


# ============================================================================
# ASSUMPTION VERIFIERS
# ============================================================================

@dataclass(frozen=True)
class SmoothnessReport:
    """
    Falsification check of |eta(x0) - eta(x1)| <= omega * mu(B(x0, |x0 - x1|))^lambda

    max_ratio is the largest lhs / rhs seen (<= 1 means no violation); passing is
    evidence, not proof.
    """
    num_pairs: int
    lam: float
    omega: float
    violations: int
    max_ratio: float
    worst_pair: Tuple[float, float]

    @property
    def passed(self) -> bool:
        return self.violations == 0


def verify_smoothness(dist: SyntheticDistribution, num_pairs: int = 100_000, seed: int = 0,
                      lam: Optional[float] = None, omega: Optional[float] = None) -> SmoothnessReport:
    """
    Check measure-smoothness on random pairs

    Args:
        dist: Uniform-marginal distribution
        num_pairs: Pairs drawn uniformly from [0, 1]^2
        seed: Seed for the pairs
        lam, omega: Constants to test (default: the distribution's declared ones)
    """
    require_exact(dist)
    lam = dist.lam if lam is None else lam
    omega = dist.omega if omega is None else omega

    rng = get_rng(seed)
    x0 = rng.random(num_pairs)
    x1 = rng.random(num_pairs)
    lhs = np.abs(dist.eta(x0) - dist.eta(x1))
    rhs = omega * ball_measure(x0, np.abs(x0 - x1)) ** lam

    violated = lhs > rhs * (1.0 + 1e-12) + 1e-15
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))

    worst = int(np.argmax(ratio))
    report = SmoothnessReport(
        num_pairs=num_pairs, lam=lam, omega=omega,
        violations=int(np.sum(violated)),
        max_ratio=float(ratio[worst]),
        worst_pair=(float(x0[worst]), float(x1[worst])),
    )
    logger.info(f"Smoothness check (lambda={lam}, omega={omega}): {report.violations} violations "
                f"over {num_pairs} pairs, max ratio {report.max_ratio:.4f}")
    return report


def margin_measure(dist: SyntheticDistribution, xi: float) -> float:
    """Uniform measure of {x: 0 < |eta(x) - 1/2| < xi}"""
    require_exact(dist)
    total = 0.0
    for i in range(len(dist.breakpoints) - 1):
        a, b = dist.breakpoints[i], dist.breakpoints[i + 1]
        ya, yb = dist.values[i], dist.values[i + 1]
        if ya == yb:
            if 0.0 < abs(ya - 0.5) < xi:
                total += b - a
            continue
        found = _eta_range_preimage(a, b, ya, yb, 0.5 - xi, 0.5 + xi, strict=True)
        if found is not None:
            total += found[1] - found[0]
    return total


@dataclass(frozen=True)
class MarginReport:
    """Margin-set measure against C_alpha * xi^alpha per xi"""
    alpha: float
    c_alpha: float
    table: pd.DataFrame

    @property
    def passed(self) -> bool:
        return bool(self.table['holds'].all())


def verify_margin(dist: SyntheticDistribution, xi_grid: Sequence[float],
                  alpha: Optional[float] = None, c_alpha: Optional[float] = None) -> MarginReport:
    """
    Compare the exact margin-set measure with C_alpha * xi^alpha on a grid of xi in (0, 1/2]
    """
    require_exact(dist)
    alpha = dist.alpha if alpha is None else alpha
    c_alpha = dist.c_alpha if c_alpha is None else c_alpha

    rows = []
    for xi in xi_grid:
        if not (0.0 < xi <= 0.5):
            raise ValueError(f"xi must be in (0, 1/2], got {xi}")
        measure = margin_measure(dist, xi)
        bound = c_alpha * xi ** alpha
        rows.append({'xi': float(xi), 'measure': measure, 'bound': bound,
                     'holds': bool(measure <= bound + 1e-12)})

    return MarginReport(alpha=alpha, c_alpha=c_alpha, table=pd.DataFrame(rows, columns=['xi', 'measure', 'bound', 'holds']))
