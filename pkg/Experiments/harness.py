"""
Experiment Harness
Monte Carlo validation of the kNN concentration bounds, noise-rate recovery,
risk-rate scaling and the noise-blind inconsistency effect.

Replicates are the unit of parallel work (joblib). Each replicate draws from its
own SeedSequence stream keyed by (seed, n, replicate, stream), and results are
gathered by replicate index, so output does not depend on the worker count.
"""
import os
import math
import time
import logging
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import linregress

from Bounds.bounds import (
    BoundParams,
    ball_measure_tail,
    max_bound,
    optimal_k,
    pointwise_bound,
    risk_bound,
    xi_error_term,
)
from Data.datasets import write_frame_csv, write_json
from Experiments.cross_validation import cross_validate_k, geometric_k_grid
from Neighbors.knn_core import (
    RegressionSample,
    fit_known_rates_classifier,
    fit_regressor,
    fit_robust_classifier,
    fit_standard_classifier,
)
from Neighbors.nn_index import build_index, kth_neighbor_distance
from Noise.noise_model import NoiseChannel, NoiseRates, corrupt_dataset
from Synthetic.distributions import (
    SyntheticDistribution,
    corrupted,
    distribution_from_dict,
    regression_extrema,
    sample,
)
from Synthetic.risk import ball_measure, disagreement_set, excess_risk, holdout_excess_risk
from utils.seeding import (
    STREAM_CHANNEL,
    STREAM_FOLDS,
    STREAM_HOLDOUT,
    STREAM_SAMPLE,
    replicate_rng,
)

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ('ball', 'pointwise', 'max', 'noise', 'rate', 'inconsistency', 'cv')
K_POLICIES = ('fixed', 'optimal', 'cv')
CENTRES = ('fixed', 'data_point')

# Absolute margins for the inconsistency checks
GAP_MARGIN = 0.01
ROBUST_CEILING = 0.01


def mc_slack(p: float, reps: int) -> float:
    """Three-sigma Monte Carlo slack 3 * sqrt(p(1 - p) / reps) for a frequency with nominal level p"""
    return 3.0 * math.sqrt(p * (1.0 - p) / reps)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment run

    distribution is a descriptor (see distribution_from_dict); p0 / p1 are the
    true channel rates. k is used by the 'fixed' k_policy.
    """
    kind: str
    distribution: Dict[str, Any] = field(default_factory=lambda: {'name': 'ramp'})
    p0: float = 0.0
    p1: float = 0.0
    n_grid: Tuple[int, ...] = (1000,)
    k_policy: str = 'optimal'
    k: Optional[int] = None
    reps: int = 100
    delta: float = 0.05
    seed: int = 0
    output_dir: str = 'results'
    zeta: float = 0.2
    centre: str = 'fixed'
    probe_x: float = 0.5
    theta: float = 0.04
    cv_folds: int = 5
    cv_grid_points: int = 8
    slope_window: Tuple[float, float] = (-0.6, -0.15)
    workers: int = 1
    timings: bool = False
    quad_tol: float = 1e-6
    scan_nodes: int = 100_001
    n_test: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, 'n_grid', tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, 'slope_window', tuple(float(s) for s in self.slope_window))

        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"Unknown experiment kind '{self.kind}', expected one of {EXPERIMENT_KINDS}")
        if self.k_policy not in K_POLICIES:
            raise ValueError(f"Unknown k_policy '{self.k_policy}', expected one of {K_POLICIES}")
        if self.k_policy == 'fixed' and (self.k is None or int(self.k) < 1):
            raise ValueError("k_policy 'fixed' needs k >= 1")
        if int(self.reps) < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if not self.n_grid or min(self.n_grid) < 1:
            raise ValueError("n_grid must be a non-empty list of positive sizes")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError(f"n_grid must be strictly increasing, got {list(self.n_grid)}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.centre not in CENTRES:
            raise ValueError(f"centre must be one of {CENTRES}, got '{self.centre}'")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if int(self.workers) == 0:
            raise ValueError("workers must be non-zero (-1 uses every core)")
        if self.zeta < 0 or self.theta < 0:
            raise ValueError("zeta and theta must be >= 0")
        NoiseChannel(NoiseRates(self.p0, self.p1))

    @property
    def rates(self) -> NoiseRates:
        return NoiseRates(self.p0, self.p1)

    def build_distribution(self) -> SyntheticDistribution:
        return distribution_from_dict(self.distribution)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['n_grid'] = list(self.n_grid)
        data['slope_window'] = list(self.slope_window)
        # execution details never change results
        for key in ('output_dir', 'workers', 'timings'):
            data.pop(key)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            logger.warning(f"Ignoring unknown experiment settings: {unknown}")
        return cls(**{key: value for key, value in data.items() if key in known})


@dataclass
class ExperimentResult:
    """Per-(n, replicate) records plus a summary with named pass/fail checks"""
    kind: str
    records: pd.DataFrame
    summary: Dict[str, Any]
    checks: Dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def save(self, output_dir: str, timings: bool = False) -> Tuple[str, str]:
        """
        Write <kind>_records.csv and <kind>_summary.json

        Runtime columns are written only with timings=True so the default files
        are byte-reproducible.
        """
        records = self.records
        if not timings and 'runtime_s' in records.columns:
            records = records.drop(columns=['runtime_s'])

        csv_path = write_frame_csv(records, os.path.join(output_dir, f"{self.kind}_records.csv"))
        summary = dict(self.summary)
        summary['checks'] = self.checks
        summary['passed'] = self.passed
        if timings and 'runtime_s' in self.records.columns:
            summary['total_runtime_s'] = float(self.records['runtime_s'].sum())
        json_path = write_json(summary, os.path.join(output_dir, f"{self.kind}_summary.json"))

        logger.info(f"Saved {len(records)} records to {csv_path} and summary to {json_path}")
        return csv_path, json_path


# ============================================================================
# SHARED PLUMBING
# ============================================================================

def _run_replicates(task: Callable[..., Dict[str, Any]], jobs: List[Tuple], workers: int) -> List[Dict[str, Any]]:
    """Run task(*job) for every job; the returned list follows job order"""
    if workers == 1:
        return [task(*job) for job in jobs]
    return Parallel(n_jobs=workers)(delayed(task)(*job) for job in jobs)


def _timed(task: Callable[..., Dict[str, Any]]) -> Callable[..., Dict[str, Any]]:
    def run(*args):
        started = time.perf_counter()
        record = task(*args)
        record['runtime_s'] = time.perf_counter() - started
        return record
    run.__name__ = getattr(task, '__name__', 'task')
    return run


def _jobs(config: ExperimentConfig) -> List[Tuple[ExperimentConfig, int, int]]:
    return [(config, n, replicate) for n in config.n_grid for replicate in range(config.reps)]


def _draw_noisy(config: ExperimentConfig, dist: SyntheticDistribution, n: int, replicate: int):
    clean = sample(dist, n, rng=replicate_rng(config.seed, n, replicate, STREAM_SAMPLE))
    channel = NoiseChannel(config.rates, rng_seed=config.seed)
    return corrupt_dataset(clean, channel, rng=replicate_rng(config.seed, n, replicate, STREAM_CHANNEL))


def resolve_k(config: ExperimentConfig, dist: SyntheticDistribution, n: int,
              noisy: Optional[RegressionSample] = None, replicate: int = 0) -> int:
    """Neighbour count for sample size n under the configured policy"""
    if config.k_policy == 'fixed':
        return int(min(config.k, n))
    if config.k_policy == 'optimal':
        return optimal_k(n, config.delta, dist.lam, dist.omega)
    if noisy is None:
        raise ValueError("k_policy 'cv' needs the training sample")
    rng = replicate_rng(config.seed, n, replicate, STREAM_FOLDS)
    return cross_validate_k(noisy, geometric_k_grid(n, config.cv_grid_points), folds=config.cv_folds, rng=rng)


def _corrupted_smoothness(dist: SyntheticDistribution, rates: NoiseRates) -> float:
    """The corrupted regression is (1 - p0 - p1) * omega smooth"""
    return dist.omega * rates.denominator


def _excess(config: ExperimentConfig, dist: SyntheticDistribution, classifier,
            n: int, replicate: int, rates: Optional[NoiseRates] = None) -> float:
    if dist.exact:
        return excess_risk(dist, classifier, quad_tol=config.quad_tol, rates=rates, scan_nodes=config.scan_nodes)
    holdout_seed = int(replicate_rng(config.seed, n, replicate, STREAM_HOLDOUT).integers(0, 2 ** 63 - 1))
    return holdout_excess_risk(dist, classifier, n_test=config.n_test, seed=holdout_seed, rates=rates)


def _banner(title: str) -> None:
    logger.info("=" * 80)
    logger.info(title)
    logger.info("=" * 80)


def _finish(kind: str, config: ExperimentConfig, records: List[Dict[str, Any]],
            summary: Dict[str, Any], checks: Dict[str, bool]) -> ExperimentResult:
    frame = pd.DataFrame(records)
    summary = {'kind': kind, 'seed': config.seed, 'config': config.to_dict(), **summary}
    result = ExperimentResult(kind=kind, records=frame, summary=summary, checks=checks)
    for name, ok in checks.items():
        logger.info(f"{'✓' if ok else '✗'} {name}")
    return result


# ============================================================================
# BALL MEASURE
# ============================================================================

def _ball_replicate(config: ExperimentConfig, n: int, replicate: int) -> Dict[str, Any]:
    rng = replicate_rng(config.seed, n, replicate, STREAM_SAMPLE)
    points = rng.random(n)
    index = build_index(points, backend='line')
    centre = float(points[0]) if config.centre == 'data_point' else config.probe_x

    radius = kth_neighbor_distance(index, [centre], config.k)
    measure = float(ball_measure(centre, radius))
    threshold = (1.0 + config.zeta) * config.k / n
    return {
        'n': n, 'replicate': replicate, 'k': config.k, 'centre': centre,
        'radius': radius, 'ball_measure': measure, 'violated': bool(measure > threshold),
    }


def run_ball_measure_experiment(n: int, k: int, zeta: float, reps: int, seed: int = 0,
                                centre: str = 'fixed', probe_x: float = 0.5,
                                workers: int = 1) -> ExperimentResult:
    """
    Tail frequency of the k-th neighbour ball measure under the uniform marginal

    Counts replicates where mu(B(centre, r_k)) > (1 + zeta) k / n and compares the
    frequency with ball_measure_tail (k - 1 in the exponent when the centre is
    the data point X_1) plus slack 3 * sqrt(0.25 / reps).
    """
    config = ExperimentConfig(kind='ball', n_grid=(n,), k_policy='fixed', k=k, zeta=zeta,
                              reps=reps, seed=seed, centre=centre, probe_x=probe_x, workers=workers)
    return run_ball_experiment(config)


def run_ball_experiment(config: ExperimentConfig) -> ExperimentResult:
    _banner(f"Ball-measure tail: n={list(config.n_grid)}, k={config.k}, zeta={config.zeta}, "
            f"centre={config.centre}, reps={config.reps}")
    records = _run_replicates(_timed(_ball_replicate), _jobs(config), config.workers)

    frame = pd.DataFrame(records)
    data_point = config.centre == 'data_point'
    bound = ball_measure_tail(config.k, config.zeta, data_point_centre=data_point)
    slack = mc_slack(0.5, config.reps)

    per_n = {}
    checks = {}
    for n, group in frame.groupby('n', sort=True):
        frequency = float(group['violated'].mean())
        per_n[str(n)] = {'violation_frequency': frequency, 'threshold': (1.0 + config.zeta) * config.k / n}
        checks[f"n={n}: tail frequency {frequency:.4f} <= {bound:.4f} + {slack:.4f}"] = frequency <= bound + slack

    summary = {'bound': bound, 'slack': slack, 'per_n': per_n}
    return _finish('ball', config, records, summary, checks)


# ============================================================================
# POINTWISE AND EXTREMA CONCENTRATION
# ============================================================================

def _probe_point(config: ExperimentConfig, dist: SyntheticDistribution) -> np.ndarray:
    return np.full(dist.dim, config.probe_x)


def _pointwise_replicate(config: ExperimentConfig, n: int, replicate: int) -> Dict[str, Any]:
    dist = config.build_distribution()
    noisy = _draw_noisy(config, dist, n, replicate)
    train = RegressionSample(noisy.features, noisy.labels)
    k = resolve_k(config, dist, n, train, replicate)
    regressor = fit_regressor(train, k)
    target = corrupted(dist, config.rates)

    probes = {'fixed': _probe_point(config, dist), 'data_point': noisy.features[0]}
    record = {'n': n, 'replicate': replicate, 'k': k}
    for name, point in probes.items():
        estimate = regressor.predict(point)
        truth = float(target.eta(point)[0])
        record[f"estimate_{name}"] = estimate
        record[f"error_{name}"] = abs(estimate - truth)
    return record


def run_pointwise_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Frequency with which |f_hat - eta_corr| exceeds pointwise_bound at two probes:
    the fixed point probe_x and the training point X_1
    """
    dist = config.build_distribution()
    omega = _corrupted_smoothness(dist, config.rates)
    _banner(f"Pointwise concentration: n={list(config.n_grid)}, delta={config.delta}, reps={config.reps}")

    records = _run_replicates(_timed(_pointwise_replicate), _jobs(config), config.workers)
    frame = pd.DataFrame(records)
    slack = mc_slack(config.delta, config.reps)

    per_n = {}
    checks = {}
    for n, group in frame.groupby('n', sort=True):
        k = int(group['k'].iloc[0])
        bound = pointwise_bound(BoundParams(n=n, k=k, delta=config.delta, lam=dist.lam, omega=omega))
        entry = {'k': k, 'bound': bound}
        for probe in ('fixed', 'data_point'):
            frequency = float((group[f"error_{probe}"] > bound).mean())
            entry[f"violation_frequency_{probe}"] = frequency
            checks[f"n={n} probe={probe}: violation frequency {frequency:.4f} <= {config.delta} + {slack:.4f}"] = \
                frequency <= config.delta + slack
        per_n[str(n)] = entry

    summary = {'slack': slack, 'omega_corrupted': omega, 'per_n': per_n}
    return _finish('pointwise', config, records, summary, checks)


def _extrema_replicate(config: ExperimentConfig, n: int, replicate: int) -> Dict[str, Any]:
    dist = config.build_distribution()
    noisy = _draw_noisy(config, dist, n, replicate)
    train = RegressionSample(noisy.features, noisy.labels)
    k = resolve_k(config, dist, n, train, replicate)

    regressor = fit_regressor(train, k)
    predictions = regressor.predict_many(regressor.index.points)
    return {
        'n': n, 'replicate': replicate, 'k': k,
        'max_estimate': float(predictions.max()),
        'min_estimate': float(predictions.min()),
    }


def run_max_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Frequency with which the empirical max (and min) of the noisy-label kNN
    estimate misses sup eta_corr = 1 - p1 (inf eta_corr = p0) by more than max_bound
    """
    dist = config.build_distribution()
    omega = _corrupted_smoothness(dist, config.rates)
    inf_target, sup_target = regression_extrema(dist, config.rates)
    _banner(f"Extrema concentration: targets ({inf_target:.4f}, {sup_target:.4f}), reps={config.reps}")

    records = _run_replicates(_timed(_extrema_replicate), _jobs(config), config.workers)
    frame = pd.DataFrame(records)
    frame['max_error'] = (frame['max_estimate'] - sup_target).abs()
    frame['min_error'] = (frame['min_estimate'] - inf_target).abs()
    slack = mc_slack(config.delta, config.reps)

    per_n = {}
    checks = {}
    for n, group in frame.groupby('n', sort=True):
        k = int(group['k'].iloc[0])
        bound = max_bound(BoundParams(n=n, k=k, delta=config.delta, lam=dist.lam, omega=omega))
        entry = {'k': k, 'bound': bound}
        for side in ('max', 'min'):
            frequency = float((group[f"{side}_error"] > bound).mean())
            entry[f"violation_frequency_{side}"] = frequency
            checks[f"n={n} {side}: violation frequency {frequency:.4f} <= {config.delta} + {slack:.4f}"] = \
                frequency <= config.delta + slack
        per_n[str(n)] = entry

    summary = {'slack': slack, 'sup_target': sup_target, 'inf_target': inf_target, 'per_n': per_n}
    return _finish('max', config, frame.to_dict('records'), summary, checks)


# ============================================================================
# NOISE-RATE RECOVERY
# ============================================================================

def run_noise_recovery_experiment(config: ExperimentConfig, median_tolerance: float = 0.05) -> ExperimentResult:
    """
    Rate estimates against the true rates

    Checks per n that the median absolute errors are within median_tolerance and
    that every replicate's errors are within xi_error_term.
    """
    dist = config.build_distribution()
    _banner(f"Noise-rate recovery: rates ({config.p0}, {config.p1}), n={list(config.n_grid)}, reps={config.reps}")

    records = _run_replicates(_timed(_extrema_replicate), _jobs(config), config.workers)
    frame = pd.DataFrame(records)
    frame['p0_hat'] = frame['min_estimate']
    frame['p1_hat'] = 1.0 - frame['max_estimate']
    frame['p0_error'] = (frame['p0_hat'] - config.p0).abs()
    frame['p1_error'] = (frame['p1_hat'] - config.p1).abs()

    per_n = {}
    checks = {}
    for n, group in frame.groupby('n', sort=True):
        k = int(group['k'].iloc[0])
        xi = xi_error_term(n, k, config.delta, dist.lam, dist.omega)
        median_p0 = float(group['p0_error'].median())
        median_p1 = float(group['p1_error'].median())
        worst = float(max(group['p0_error'].max(), group['p1_error'].max()))
        per_n[str(n)] = {'k': k, 'xi': xi, 'median_p0_error': median_p0,
                         'median_p1_error': median_p1, 'max_error': worst}
        checks[f"n={n}: median |p0_hat - p0| {median_p0:.4f} <= {median_tolerance}"] = median_p0 <= median_tolerance
        checks[f"n={n}: median |p1_hat - p1| {median_p1:.4f} <= {median_tolerance}"] = median_p1 <= median_tolerance
        checks[f"n={n}: every rate error <= xi {xi:.4f}"] = worst <= xi

    summary = {'per_n': per_n}
    return _finish('noise', config, frame.to_dict('records'), summary, checks)


# ============================================================================
# CLASSIFICATION: RATE AND INCONSISTENCY
# ============================================================================

def _classifier_replicate(config: ExperimentConfig, n: int, replicate: int) -> Dict[str, Any]:
    dist = config.build_distribution()
    noisy = _draw_noisy(config, dist, n, replicate)
    train = RegressionSample(noisy.features, noisy.labels)
    k = resolve_k(config, dist, n, train, replicate)

    robust = fit_robust_classifier(train, k)
    models = {
        'robust': robust,
        'standard': fit_standard_classifier(train, k),
        'known': fit_known_rates_classifier(train, k, config.rates),
    }

    record = {
        'n': n, 'replicate': replicate, 'k': k,
        'p0_hat': robust.estimated_rates.p0, 'p1_hat': robust.estimated_rates.p1,
        'threshold': robust.threshold, 'degenerate': robust.estimated_rates.degenerate,
    }
    for name, model in models.items():
        record[f"excess_{name}"] = _excess(config, dist, model, n, replicate)
        if config.kind == 'inconsistency':
            record[f"excess_corrupted_{name}"] = _excess(config, dist, model, n, replicate, rates=config.rates)
    return record


def _median_non_increasing(medians: List[float], allowed_inversions: int = 1) -> bool:
    inversions = sum(1 for a, b in zip(medians, medians[1:]) if b > a)
    return inversions <= allowed_inversions


def fit_rate_slope(n_values: List[int], mean_risks: List[float]) -> Optional[float]:
    """Least-squares slope of log(mean risk) against log(n), over positive means"""
    pairs = [(n, risk) for n, risk in zip(n_values, mean_risks) if risk > 0]
    if len(pairs) < 2:
        return None
    fit = linregress(np.log([n for n, _ in pairs]), np.log([risk for _, risk in pairs]))
    return float(fit.slope)


def run_rate_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Mean clean excess risk of the robust classifier per n, its log-log slope,
    and a per-replicate comparison with risk_bound
    """
    dist = config.build_distribution()
    if len(config.n_grid) < 4 or config.n_grid[-1] / config.n_grid[0] < 10 ** 1.5:
        logger.warning("Rate fits want at least 4 sizes spanning 1.5 decades")
    _banner(f"Risk rate: n={list(config.n_grid)}, reps={config.reps}, k_policy={config.k_policy}")

    records = _run_replicates(_timed(_classifier_replicate), _jobs(config), config.workers)
    frame = pd.DataFrame(records)
    frame['risk_bound'] = [
        risk_bound(BoundParams(n=int(row.n), k=int(row.k), delta=config.delta, lam=dist.lam, omega=dist.omega,
                               alpha=dist.alpha, c_alpha=dist.c_alpha, p0=config.p0, p1=config.p1))
        for row in frame.itertuples()
    ]
    frame['within_bound'] = frame['excess_robust'] <= frame['risk_bound']

    grouped = frame.groupby('n', sort=True)
    n_values = [int(n) for n in grouped.groups.keys()]
    means = grouped['excess_robust'].mean().tolist()
    medians = grouped['excess_robust'].median().tolist()
    slope = fit_rate_slope(n_values, means)
    theory = -dist.lam * (dist.alpha + 1.0) / (2.0 * dist.lam + 1.0)

    low, high = config.slope_window
    checks = {
        'every replicate excess risk <= risk bound': bool(frame['within_bound'].all()),
        'median robust excess risk non-increasing in n (one inversion allowed)': _median_non_increasing(medians),
        f"fitted slope in [{low}, {high}]": slope is not None and low <= slope <= high,
    }
    summary = {
        'n_grid': n_values,
        'mean_excess_robust': means,
        'median_excess_robust': medians,
        'mean_excess_standard': grouped['excess_standard'].mean().tolist(),
        'mean_excess_known': grouped['excess_known'].mean().tolist(),
        'fitted_slope': slope,
        'theoretical_slope': theory,
    }
    return _finish('rate', config, frame.to_dict('records'), summary, checks)


def noise_blind_excess(dist: SyntheticDistribution, rates: NoiseRates, quad_tol: float = 1e-6) -> float:
    """Clean excess risk of the corrupted Bayes rule 1{eta_corr >= 1/2}, the limit of noise-blind kNN"""
    target = corrupted(dist, rates)
    return excess_risk(dist, lambda x: (target.eta(x) >= 0.5).astype(np.int64), quad_tol=quad_tol)


def run_inconsistency_demo(config: ExperimentConfig) -> ExperimentResult:
    """
    Standard vs robust kNN trained on noisy labels and scored on the clean law

    Checks the standard classifier stays near the noise-blind limit at the largest
    n, the robust one goes below ROBUST_CEILING, the gap holds at every n, and the
    floor clean + corrupted excess >= theta * mu(A_theta) for every trained model.
    """
    dist = config.build_distribution()
    a_zero = disagreement_set(dist, config.rates, 0.0)
    a_theta = disagreement_set(dist, config.rates, config.theta)
    floor = config.theta * a_theta.measure
    blind = noise_blind_excess(dist, config.rates, config.quad_tol)
    _banner(f"Inconsistency demo: mu(A_0)={a_zero.measure:.4f}, mu(A_theta)={a_theta.measure:.4f}, "
            f"noise-blind limit={blind:.5f}")

    records = _run_replicates(_timed(_classifier_replicate), _jobs(config), config.workers)
    frame = pd.DataFrame(records)
    tolerance = 2.0 * config.quad_tol
    for name in ('robust', 'standard', 'known'):
        frame[f"floor_ok_{name}"] = frame[f"excess_{name}"] + frame[f"excess_corrupted_{name}"] >= floor - tolerance

    grouped = frame.groupby('n', sort=True)
    standard_means = grouped['excess_standard'].mean()
    robust_means = grouped['excess_robust'].mean()
    largest = max(config.n_grid)

    checks = {
        f"standard excess at n={largest} >= noise-blind limit - {GAP_MARGIN}":
            bool(standard_means.loc[largest] >= blind - GAP_MARGIN),
        f"robust excess at n={largest} <= {ROBUST_CEILING}": bool(robust_means.loc[largest] <= ROBUST_CEILING),
        'standard excess above robust at every n': bool((standard_means > robust_means).all())
        if a_zero.measure > 0 else True,
        f"clean + corrupted excess >= theta * mu(A_theta) = {floor:.5f} for every model":
            bool(frame[[f"floor_ok_{name}" for name in ('robust', 'standard', 'known')]].all().all()),
    }
    summary = {
        'mu_a0': a_zero.measure,
        'a0_intervals': [list(interval) for interval in a_zero.intervals],
        'theta': config.theta,
        'mu_a_theta': a_theta.measure,
        'disagreement_floor': floor,
        'noise_blind_excess': blind,
        'n_grid': [int(n) for n in grouped.groups.keys()],
        'mean_excess_standard': standard_means.tolist(),
        'mean_excess_robust': robust_means.tolist(),
        'mean_excess_known': grouped['excess_known'].mean().tolist(),
    }
    return _finish('inconsistency', config, frame.to_dict('records'), summary, checks)


# ============================================================================
# CROSS-VALIDATION RUN
# ============================================================================

def _cv_replicate(config: ExperimentConfig, n: int, replicate: int) -> Dict[str, Any]:
    dist = config.build_distribution()
    noisy = _draw_noisy(config, dist, n, replicate)
    train = RegressionSample(noisy.features, noisy.labels)
    rng = replicate_rng(config.seed, n, replicate, STREAM_FOLDS)
    selected = cross_validate_k(train, geometric_k_grid(n, config.cv_grid_points), folds=config.cv_folds, rng=rng)
    reference = optimal_k(n, config.delta, dist.lam, dist.omega)
    return {'n': n, 'replicate': replicate, 'k_selected': selected, 'k_optimal': reference,
            'ratio': selected / reference}


def run_cv_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Cross-validated k against optimal_k (within a factor of 4)"""
    _banner(f"Cross-validated k: n={list(config.n_grid)}, folds={config.cv_folds}, reps={config.reps}")
    records = _run_replicates(_timed(_cv_replicate), _jobs(config), config.workers)
    frame = pd.DataFrame(records)
    within = frame['ratio'].between(0.25, 4.0)
    checks = {'selected k within a factor of 4 of optimal_k': bool(within.all())}
    summary = {'selected_k': frame['k_selected'].tolist(), 'optimal_k': frame['k_optimal'].tolist()}
    return _finish('cv', config, records, summary, checks)


_RUNNERS = {
    'ball': run_ball_experiment,
    'pointwise': run_pointwise_experiment,
    'max': run_max_experiment,
    'noise': run_noise_recovery_experiment,
    'rate': run_rate_experiment,
    'inconsistency': run_inconsistency_demo,
    'cv': run_cv_experiment,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Dispatch on config.kind"""
    return _RUNNERS[config.kind](config)
