"""
Main entry point for the noise-robust kNN toolkit
Dataset generation, model fitting, bound tables and Monte Carlo experiments
"""
import sys
import json
import logging
import argparse
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import pandas as pd

from Bounds.bounds import BoundParams, bounds_table, optimal_k
from Data.datasets import (
    DatasetFormatError,
    feature_columns,
    load_dataset_csv,
    load_points_csv,
    save_dataset_csv,
    to_json_text,
    write_frame_csv,
    write_json,
)
from Experiments.cross_validation import cross_validate_k, cross_validation_scores, geometric_k_grid
from Experiments.harness import EXPERIMENT_KINDS, ExperimentConfig, run_experiment
from Neighbors.knn_core import (
    RegressionSample,
    estimate_noise_rates,
    fit_known_rates_classifier,
    fit_robust_classifier,
    fit_standard_classifier,
)
from Noise.noise_model import NoiseChannel, NoiseRates, corrupt_dataset
from Synthetic.distributions import SyntheticDistribution, distribution_from_dict, sample
from Synthetic.risk import excess_risk, holdout_excess_risk
from utils.config_loader import ConfigError, ConfigLoader, get_config_loader, load_user_config
from utils.log_setup import setup_logging
from utils.seeding import STREAM_CHANNEL, STREAM_FOLDS, STREAM_HOLDOUT, STREAM_SAMPLE, get_rng, resolve_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings shared by every subcommand"""
    subcommand: str
    seed: int
    loader: ConfigLoader
    user_config: Dict[str, Any]
    workers: Optional[int] = None
    timings: bool = False
    check: bool = False

    def default(self, key: str, value: Any = None) -> Any:
        """User-file default, then built-in default"""
        user_defaults = self.user_config.get('defaults', {})
        if key in user_defaults:
            return user_defaults[key]
        return self.loader.get_defaults().get(key, value)


# ============================================================================
# SHARED HELPERS
# ============================================================================

def _resolve_distribution(name: str, run: RunConfig) -> SyntheticDistribution:
    """A JSON descriptor file, a configured distribution name or a built-in name"""
    if name.endswith('.json'):
        with open(name, 'r', encoding='utf-8') as f:
            return distribution_from_dict(json.load(f))

    configured = dict(run.loader.get_config().get('distributions', {}))
    configured.update(run.user_config.get('distributions', {}))
    descriptor = configured.get(name, {'name': name})
    return distribution_from_dict(descriptor)


def _channel_rates(args, run: RunConfig) -> NoiseRates:
    p0 = args.p0 if args.p0 is not None else run.default('p0', 0.0)
    p1 = args.p1 if args.p1 is not None else run.default('p1', 0.0)
    return NoiseRates(p0, p1)


def _resolve_k(args, train: RegressionSample, run: RunConfig) -> int:
    if args.k is not None:
        return args.k
    if args.k_policy == 'optimal':
        return optimal_k(train.n, args.delta, args.lam, args.omega)
    if args.k_policy == 'cv':
        return cross_validate_k(train, geometric_k_grid(train.n), folds=args.folds,
                                rng=get_rng(run.seed, STREAM_FOLDS))
    raise ValueError("give --k or --k-policy {optimal,cv}")


def _emit(data: Dict[str, Any], output: Optional[str] = None) -> None:
    if output:
        write_json(data, output)
    print(to_json_text(data))


def _echo_seed(run: RunConfig) -> None:
    print(f"seed: {run.seed}")


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_generate(args, run: RunConfig) -> int:
    """Sample a clean dataset and pass it through the noise channel"""
    _echo_seed(run)
    dist = _resolve_distribution(args.distribution, run)
    rates = _channel_rates(args, run)

    clean = sample(dist, args.n, rng=get_rng(run.seed, STREAM_SAMPLE))
    noisy = corrupt_dataset(clean, NoiseChannel(rates, rng_seed=run.seed), rng=get_rng(run.seed, STREAM_CHANNEL))
    save_dataset_csv(noisy, args.output, keep_clean=args.keep_clean)

    print(f"✓ Wrote {noisy.n} rows from '{dist.kind}' with rates ({rates.p0}, {rates.p1}) to {args.output}")
    return EXIT_OK


def cmd_corrupt(args, run: RunConfig) -> int:
    """Flip the labels of an existing dataset"""
    _echo_seed(run)
    dataset = load_dataset_csv(args.input)
    rates = _channel_rates(args, run)

    noisy = corrupt_dataset(dataset, NoiseChannel(rates, rng_seed=run.seed), rng=get_rng(run.seed, STREAM_CHANNEL))
    save_dataset_csv(noisy, args.output, keep_clean=args.keep_clean)

    print(f"✓ Corrupted {noisy.n} labels with rates ({rates.p0}, {rates.p1}) into {args.output}")
    return EXIT_OK


def _fit_model(args, train: RegressionSample, k: int):
    if args.standard:
        return fit_standard_classifier(train, k)
    if args.known_rates:
        return fit_known_rates_classifier(train, k, NoiseRates(*args.known_rates))
    return fit_robust_classifier(train, k)


def cmd_fit_predict(args, run: RunConfig) -> int:
    """Fit on noisy training labels and label the query points"""
    _echo_seed(run)
    dataset = load_dataset_csv(args.train)
    queries = load_points_csv(args.query)
    if queries.shape[1] != dataset.dim:
        raise ValueError(f"query dimension {queries.shape[1]} does not match training dimension {dataset.dim}")

    train = RegressionSample(dataset.features, dataset.labels)
    model = _fit_model(args, train, _resolve_k(args, train, run))

    frame = pd.DataFrame(queries, columns=feature_columns(dataset.dim))
    frame['label'] = model.classify_many(queries)
    frame['eta_corrupted_hat'] = model.predict_many(queries)
    write_frame_csv(frame, args.output)

    summary = model.to_dict()
    summary['seed'] = run.seed
    _emit(summary, args.summary)
    return EXIT_OK


def cmd_estimate_noise(args, run: RunConfig) -> int:
    """Noise-rate estimates from the extrema of the kNN estimate"""
    _echo_seed(run)
    dataset = load_dataset_csv(args.input)
    train = RegressionSample(dataset.features, dataset.labels)
    k = _resolve_k(args, train, run)

    rates = estimate_noise_rates(train, k)
    _emit({
        'k': k, 'n': train.n, 'p0_hat': rates.p0, 'p1_hat': rates.p1,
        'threshold': rates.threshold, 'degenerate': rates.degenerate, 'seed': run.seed,
    }, args.output)
    return EXIT_OK


def cmd_evaluate(args, run: RunConfig) -> int:
    """Excess risk of the robust, standard and known-rates classifiers against a distribution"""
    _echo_seed(run)
    dist = _resolve_distribution(args.distribution, run)
    rates = _channel_rates(args, run)
    dataset = load_dataset_csv(args.train)
    train = RegressionSample(dataset.features, dataset.labels)
    k = _resolve_k(args, train, run)

    models = {
        'robust': fit_robust_classifier(train, k),
        'standard': fit_standard_classifier(train, k),
        'known_rates': fit_known_rates_classifier(train, k, rates),
    }

    report = {'distribution': dist.to_dict(), 'k': k, 'n': train.n, 'seed': run.seed,
              'exact': dist.exact, 'rates': rates.to_dict()}
    for name, model in models.items():
        if dist.exact:
            clean = excess_risk(dist, model)
            noisy = excess_risk(dist, model, rates=rates)
        else:
            holdout = int(get_rng(run.seed, STREAM_HOLDOUT).integers(0, 2 ** 63 - 1))
            clean = holdout_excess_risk(dist, model, n_test=args.n_test, seed=holdout)
            noisy = holdout_excess_risk(dist, model, n_test=args.n_test, seed=holdout, rates=rates)
        report[name] = {'excess_clean': clean, 'excess_corrupted': noisy, 'threshold': model.threshold}

    _emit(report, args.output)
    return EXIT_OK


def cmd_bounds(args, run: RunConfig) -> int:
    """Table of every bound at the given parameters"""
    values: Dict[str, Any] = {}
    if args.params:
        with open(args.params, 'r', encoding='utf-8') as f:
            values.update(json.load(f))
    flags = {'n': args.n, 'k': args.k, 'delta': args.delta, 'lambda': args.lam, 'omega': args.omega,
             'alpha': args.alpha, 'c_alpha': args.c_alpha, 'p0': args.p0, 'p1': args.p1}
    values.update({key: value for key, value in flags.items() if value is not None})

    if 'n' not in values:
        raise ValueError("bounds needs --n (or 'n' in --params)")
    if 'k' not in values:
        values['k'] = optimal_k(int(values['n']), values.get('delta', 0.05),
                                values.get('lambda', 1.0), values.get('omega', 1.0))

    table = bounds_table(BoundParams.from_dict(values))
    if args.output:
        write_frame_csv(table, args.output)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_experiment(args, run: RunConfig) -> int:
    """Run one Monte Carlo experiment and write its records and summary"""
    _echo_seed(run)
    overrides = {
        'seed': run.seed, 'workers': run.workers, 'timings': run.timings,
        'reps': args.reps, 'n_grid': args.n_grid, 'k': args.k, 'k_policy': args.k_policy,
        'output_dir': args.output_dir,
    }
    if args.distribution:
        overrides['distribution'] = _resolve_distribution(args.distribution, run).to_dict()

    resolved = run.loader.resolve_experiment(args.kind, run.user_config, overrides)
    config = ExperimentConfig.from_dict(resolved)
    result = run_experiment(config)
    result.save(resolved.get('output_dir', 'results'), timings=run.timings)

    print(to_json_text({key: value for key, value in result.summary.items() if key != 'config'}))
    for name, ok in result.checks.items():
        print(f"{'✓' if ok else '✗'} {name}")

    if run.check and not result.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_cv_k(args, run: RunConfig) -> int:
    """Cross-validated k over a grid"""
    _echo_seed(run)
    dataset = load_dataset_csv(args.input)
    train = RegressionSample(dataset.features, dataset.labels)
    grid = args.grid or geometric_k_grid(train.n, args.grid_points)

    scores = cross_validation_scores(train, grid, folds=args.folds, rng=get_rng(run.seed, STREAM_FOLDS))
    best = int(scores['k'].iloc[int(scores['mean_error'].to_numpy().argmin())])
    if args.output:
        write_frame_csv(scores, args.output)
    print(scores.to_string(index=False))
    print(f"k: {best}")
    return EXIT_OK


# ============================================================================
# PARSER
# ============================================================================

def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='User configuration JSON (overrides experiment_config.json)')
    common.add_argument('--seed', type=int, help='Master seed (default: config, then NOISYKNN_SEED, then 0)')
    common.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    common.add_argument('--workers', type=int, help='Parallel workers for experiments (-1 for every core)')
    common.add_argument('--timings', action='store_true', help='Record per-replicate runtimes')
    common.add_argument('--check', action='store_true', help='Exit 1 when an experiment check fails')
    return common


def _k_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--k', type=int, help='Neighbour count')
    parser.add_argument('--k-policy', choices=['optimal', 'cv'], help='Pick k when --k is absent')
    parser.add_argument('--delta', type=float, default=0.05, help='Confidence level for --k-policy optimal')
    parser.add_argument('--lambda', dest='lam', type=float, default=1.0, help='Smoothness exponent')
    parser.add_argument('--omega', type=float, default=1.0, help='Smoothness constant')
    parser.add_argument('--folds', type=int, default=5, help='Folds for --k-policy cv')


def _rate_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--p0', type=float, help='Flip probability of class-0 labels')
    parser.add_argument('--p1', type=float, help='Flip probability of class-1 labels')


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(description='Label-noise robust kNN classification toolkit')
    subparsers = parser.add_subparsers(dest='subcommand', required=True)

    generate = subparsers.add_parser('generate', parents=[common], help='Sample a noisy synthetic dataset')
    generate.add_argument('--distribution', required=True, help='Configured name, built-in name or descriptor .json')
    generate.add_argument('--n', type=int, required=True, help='Sample size')
    generate.add_argument('--output', required=True, help='Output CSV')
    generate.add_argument('--keep-clean', action='store_true', help='Also write the clean_label column')
    _rate_options(generate)
    generate.set_defaults(handler=cmd_generate)

    corrupt = subparsers.add_parser('corrupt', parents=[common], help='Flip labels of a dataset')
    corrupt.add_argument('--input', required=True, help='Input CSV')
    corrupt.add_argument('--output', required=True, help='Output CSV')
    corrupt.add_argument('--keep-clean', action='store_true', help='Also write the clean_label column')
    _rate_options(corrupt)
    corrupt.set_defaults(handler=cmd_corrupt)

    fit_predict = subparsers.add_parser('fit-predict', parents=[common], help='Fit and label query points')
    fit_predict.add_argument('--train', required=True, help='Training CSV with noisy labels')
    fit_predict.add_argument('--query', required=True, help='Query CSV (x1..xd)')
    fit_predict.add_argument('--output', required=True, help='Predictions CSV')
    fit_predict.add_argument('--summary', help='Model summary JSON')
    mode = fit_predict.add_mutually_exclusive_group()
    mode.add_argument('--standard', action='store_true', help='Noise-blind majority vote (threshold 1/2)')
    mode.add_argument('--known-rates', type=float, nargs=2, metavar=('P0', 'P1'), help='Use these rates, skip estimation')
    _k_options(fit_predict)
    fit_predict.set_defaults(handler=cmd_fit_predict)

    estimate = subparsers.add_parser('estimate-noise', parents=[common], help='Estimate the noise rates')
    estimate.add_argument('--input', required=True, help='CSV with noisy labels')
    estimate.add_argument('--output', help='Estimate JSON')
    _k_options(estimate)
    estimate.set_defaults(handler=cmd_estimate_noise)

    evaluate = subparsers.add_parser('evaluate', parents=[common], help='Excess risk against a distribution')
    evaluate.add_argument('--train', required=True, help='Training CSV with noisy labels')
    evaluate.add_argument('--distribution', required=True, help='Configured name, built-in name or descriptor .json')
    evaluate.add_argument('--n-test', type=int, default=100_000, help='Held-out size for sampling-only distributions')
    evaluate.add_argument('--output', help='Report JSON')
    _rate_options(evaluate)
    _k_options(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    bounds = subparsers.add_parser('bounds', parents=[common], help='Evaluate every bound')
    bounds.add_argument('--params', help='BoundParams JSON (flags override it)')
    bounds.add_argument('--n', type=int, help='Sample size')
    bounds.add_argument('--k', type=int, help='Neighbour count (default: optimal_k)')
    bounds.add_argument('--delta', type=float, help='Confidence level')
    bounds.add_argument('--lambda', dest='lam', type=float, help='Smoothness exponent')
    bounds.add_argument('--omega', type=float, help='Smoothness constant')
    bounds.add_argument('--alpha', type=float, help='Margin exponent')
    bounds.add_argument('--c-alpha', dest='c_alpha', type=float, help='Margin constant')
    bounds.add_argument('--output', help='Table CSV')
    _rate_options(bounds)
    bounds.set_defaults(handler=cmd_bounds)

    experiment = subparsers.add_parser('experiment', parents=[common], help='Run a Monte Carlo experiment')
    experiment.add_argument('kind', choices=EXPERIMENT_KINDS, help='Experiment kind')
    experiment.add_argument('--reps', type=int, help='Replicates per sample size')
    experiment.add_argument('--n-grid', type=int, nargs='+', help='Sample sizes')
    experiment.add_argument('--k', type=int, help='Neighbour count for k_policy fixed')
    experiment.add_argument('--k-policy', choices=['fixed', 'optimal', 'cv'], help='Neighbour-count policy')
    experiment.add_argument('--distribution', help='Configured name, built-in name or descriptor .json')
    experiment.add_argument('--output-dir', help='Directory for records and summary')
    experiment.set_defaults(handler=cmd_experiment)

    cv_k = subparsers.add_parser('cv-k', parents=[common], help='Cross-validate k')
    cv_k.add_argument('--input', required=True, help='CSV with noisy labels')
    cv_k.add_argument('--grid', type=int, nargs='+', help='Candidate k values')
    cv_k.add_argument('--grid-points', type=int, default=8, help='Size of the default geometric grid')
    cv_k.add_argument('--folds', type=int, default=5, help='Folds')
    cv_k.add_argument('--output', help='Scores CSV')
    cv_k.set_defaults(handler=cmd_cv_k)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        loader = get_config_loader()
        user_config = load_user_config(args.config) if args.config else {}
        setup_logging(loader.get_logging_config(), level=args.log_level)
        logging.captureWarnings(True)

        seed = resolve_seed(args.seed if args.seed is not None else user_config.get('seed'))
        run = RunConfig(subcommand=args.subcommand, seed=seed, loader=loader, user_config=user_config,
                        workers=args.workers, timings=args.timings, check=args.check)
        return args.handler(args, run)
    except (OSError, DatasetFormatError) as e:
        logger.error(f"✗ I/O error: {e}")
        return EXIT_IO
    except (ConfigError, ValueError, KeyError, TypeError) as e:
        logger.error(f"✗ {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
