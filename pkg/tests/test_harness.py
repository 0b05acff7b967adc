"""
Experiment harness tests

Small runs check structure and determinism; the full-size runs from
experiment_config.json are marked slow.
"""
import json
import logging

import pytest

from Experiments.harness import (
    ExperimentConfig,
    ExperimentResult,
    fit_rate_slope,
    mc_slack,
    noise_blind_excess,
    run_ball_measure_experiment,
    run_experiment,
    run_inconsistency_demo,
    run_max_experiment,
    run_noise_recovery_experiment,
    run_pointwise_experiment,
)
from Experiments.run_all_experiments import run_all_experiments
from utils.config_loader import ConfigLoader

EXAMPLE = {'name': 'inconsistency_example', 'p0': 0.1, 'p1': 0.3}


def _example_config(kind, **overrides):
    settings = {'kind': kind, 'distribution': EXAMPLE, 'p0': 0.1, 'p1': 0.3, 'seed': 3}
    settings.update(overrides)
    return ExperimentConfig(**settings)


class TestExperimentConfig:
    @pytest.mark.parametrize('overrides', [
        {'kind': 'bootstrap'},
        {'k_policy': 'fixed'},
        {'k_policy': 'random'},
        {'n_grid': (200, 100)},
        {'n_grid': ()},
        {'reps': 0},
        {'delta': 1.0},
        {'p0': 0.6, 'p1': 0.4},
        {'workers': 0},
        {'centre': 'origin'},
    ])
    def test_invalid(self, overrides):
        with pytest.raises(ValueError):
            ExperimentConfig(**{'kind': 'ball', **overrides})

    def test_lists_become_tuples(self):
        config = ExperimentConfig(kind='rate', n_grid=[100, 200], slope_window=[-1, 0])
        assert config.n_grid == (100, 200)
        assert config.slope_window == (-1.0, 0.0)

    def test_dict_leaves_out_execution_details(self):
        data = ExperimentConfig(kind='ball', k_policy='fixed', k=5, workers=2, timings=True).to_dict()
        assert 'workers' not in data and 'timings' not in data and 'output_dir' not in data
        assert data['n_grid'] == [1000]

    def test_unknown_keys_are_ignored(self, caplog):
        with caplog.at_level(logging.WARNING):
            config = ExperimentConfig.from_dict({'kind': 'noise', 'reps': 3, 'colour': 'blue'})
        assert config.reps == 3
        assert 'colour' in caplog.text

    def test_rates_and_distribution(self):
        config = _example_config('noise')
        assert config.rates.threshold == pytest.approx(0.4)
        assert config.build_distribution().omega == 3.0


class TestHelpers:
    def test_mc_slack(self):
        assert mc_slack(0.05, 100) == pytest.approx(0.0653834842, abs=1e-9)
        assert mc_slack(0.5, 10_000) == pytest.approx(0.015)

    def test_rate_slope(self):
        assert fit_rate_slope([1000, 10_000], [0.1, 0.01]) == pytest.approx(-1.0)
        assert fit_rate_slope([1000, 10_000, 100_000], [0.1, 0.0, 0.001]) == pytest.approx(-1.0)
        assert fit_rate_slope([1000, 10_000], [0.1, 0.0]) is None

    def test_noise_blind_limit(self, example, rates):
        assert noise_blind_excess(example, rates, quad_tol=1e-8) == pytest.approx(1.0 / 27.0, abs=1e-7)


class TestBallExperiment:
    def test_tail_frequency_within_bound(self, workdir):
        result = run_ball_measure_experiment(n=500, k=50, zeta=0.2, reps=200, seed=1)
        assert result.kind == 'ball'
        assert len(result.records) == 200
        assert result.summary['bound'] == pytest.approx(0.4131592528, abs=1e-9)
        assert result.passed

    def test_data_point_centre(self, workdir):
        result = run_ball_measure_experiment(n=300, k=20, zeta=0.5, reps=30, seed=2, centre='data_point')
        assert result.summary['bound'] > 0.0
        assert (result.records['centre'] != 0.5).all()

    def test_one_record_per_size_and_replicate(self, workdir):
        config = ExperimentConfig(kind='ball', n_grid=(300, 600), k_policy='fixed', k=10, reps=7)
        result = run_experiment(config)
        assert len(result.records) == 14
        assert result.records.groupby('n').size().tolist() == [7, 7]
        assert result.records['replicate'].tolist()[:7] == list(range(7))


class TestDeterminism:
    def _saved(self, config, directory):
        csv_path, json_path = run_experiment(config).save(str(directory))
        with open(csv_path, 'rb') as f:
            records = f.read()
        with open(json_path, 'rb') as f:
            summary = f.read()
        return records, summary

    def test_worker_count_does_not_change_output(self, workdir):
        base = {'kind': 'ball', 'n_grid': (400,), 'k_policy': 'fixed', 'k': 20, 'reps': 12, 'seed': 9}
        serial = self._saved(ExperimentConfig(**base, workers=1), workdir / 'serial')
        parallel = self._saved(ExperimentConfig(**base, workers=2), workdir / 'parallel')
        assert serial == parallel

    def test_same_seed_same_records(self, workdir):
        config = _example_config('max', n_grid=(1000,), k_policy='fixed', k=50, reps=3)
        first = run_experiment(config).records
        second = run_experiment(config).records
        assert first.drop(columns=['runtime_s']).equals(second.drop(columns=['runtime_s']))

    def test_timings_are_opt_in(self, workdir):
        config = ExperimentConfig(kind='ball', n_grid=(200,), k_policy='fixed', k=10, reps=3)
        result = run_experiment(config)
        csv_path, json_path = result.save(str(workdir / 'plain'))
        with open(csv_path, encoding='utf-8') as f:
            assert 'runtime_s' not in f.readline()

        csv_path, json_path = result.save(str(workdir / 'timed'), timings=True)
        with open(csv_path, encoding='utf-8') as f:
            assert 'runtime_s' in f.readline()
        with open(json_path, encoding='utf-8') as f:
            summary = json.load(f)
        assert summary['total_runtime_s'] >= 0.0
        assert summary['passed'] == result.passed


class TestSmallRuns:
    def test_pointwise(self, workdir):
        config = _example_config('pointwise', n_grid=(2000,), k_policy='fixed', k=100, reps=20)
        result = run_pointwise_experiment(config)
        assert result.summary['omega_corrupted'] == pytest.approx(1.8)
        assert set(result.records.columns) >= {'estimate_fixed', 'error_fixed', 'estimate_data_point',
                                               'error_data_point'}
        assert (result.records['error_fixed'] >= 0.0).all()
        assert result.passed

    def test_max(self, workdir):
        config = _example_config('max', n_grid=(2000,), k_policy='fixed', k=100, reps=5)
        result = run_max_experiment(config)
        assert result.summary['sup_target'] == pytest.approx(0.7)
        assert result.summary['inf_target'] == pytest.approx(0.1)
        assert (result.records['max_estimate'] >= result.records['min_estimate']).all()
        assert result.passed

    def test_noise_recovery(self, workdir):
        config = _example_config('noise', n_grid=(5000,), delta=0.1, reps=4)
        result = run_noise_recovery_experiment(config)
        entry = result.summary['per_n']['5000']
        assert entry['k'] == 268
        assert entry['max_error'] <= entry['xi']
        assert ((result.records['p0_hat'] >= 0.0) & (result.records['p1_hat'] >= 0.0)).all()

    def test_inconsistency(self, workdir):
        config = _example_config('inconsistency', n_grid=(1000,), k_policy='fixed', k=60, reps=2)
        result = run_inconsistency_demo(config)
        summary = result.summary
        assert summary['mu_a0'] == pytest.approx(4.0 / 9.0, abs=1e-5)
        assert summary['mu_a_theta'] == pytest.approx(1.0 / 3.0 + 0.04, abs=1e-5)
        assert summary['disagreement_floor'] == pytest.approx(0.04 * (1.0 / 3.0 + 0.04), abs=1e-6)
        assert summary['noise_blind_excess'] == pytest.approx(1.0 / 27.0, abs=1e-5)
        floor_check = [name for name in result.checks if name.startswith('clean + corrupted')]
        assert result.checks[floor_check[0]]
        assert {'excess_corrupted_robust', 'excess_corrupted_standard'} <= set(result.records.columns)

    def test_result_passed_needs_every_check(self):
        result = ExperimentResult(kind='ball', records=None, summary={}, checks={'a': True, 'b': False})
        assert not result.passed


@pytest.mark.slow
class TestConfiguredRuns:
    """The runs in experiment_config.json at full size"""

    @pytest.mark.parametrize('kind', ['ball', 'pointwise', 'max', 'noise', 'rate', 'inconsistency'])
    def test_configured_run_passes(self, workdir, kind):
        resolved = ConfigLoader().resolve_experiment(kind, overrides={'workers': -1})
        result = run_experiment(ExperimentConfig.from_dict(resolved))
        failed = [name for name, ok in result.checks.items() if not ok]
        assert not failed

    def test_configured_ball_run_with_data_point_centre(self, workdir):
        resolved = ConfigLoader().resolve_experiment('ball', overrides={'workers': -1, 'centre': 'data_point'})
        config = ExperimentConfig.from_dict(resolved)
        assert (config.n_grid, config.k, config.reps) == ((2000,), 50, 10_000)
        result = run_experiment(config)
        # k - 1 in the exponent when the centre is a sample point
        assert result.summary['bound'] == pytest.approx(0.4205282, abs=1e-6)
        assert len(result.records) == 10_000
        assert result.passed


class TestRunAll:
    def test_selected_kinds_with_user_overrides(self, workdir):
        user = {'experiments': {'ball': {'reps': 20, 'n_grid': [300], 'k': 30}}}
        outcomes = run_all_experiments(['ball'], seed=4, user_config=user)
        assert outcomes == {'ball': {'success': True, 'passed': True, 'error': None}}
        assert (workdir / 'results' / 'ball_summary.json').exists()

    def test_failure_is_reported_not_raised(self, workdir):
        user = {'experiments': {'ball': {'reps': 0}}}
        outcomes = run_all_experiments(['ball'], user_config=user)
        assert outcomes['ball']['success'] is False
        assert 'reps' in outcomes['ball']['error']
