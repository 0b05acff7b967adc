import json

import numpy as np
import pytest

from utils.config_loader import ConfigError, ConfigLoader, get_config_loader, load_user_config, reload_config
from utils.seeding import STREAM_CHANNEL, STREAM_SAMPLE, get_rng, replicate_rng, resolve_seed


@pytest.fixture
def loader():
    return ConfigLoader()


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestBuiltInConfig:
    def test_loads_and_lists_enabled(self, loader):
        enabled = loader.get_enabled_experiments()
        assert enabled == ['ball', 'pointwise', 'max', 'noise', 'rate', 'inconsistency']
        assert loader.get_workers() == -1
        assert loader.get_logging_config()['level'] == 'INFO'

    def test_reload_picks_up_edits(self, tmp_path, loader):
        data = json.loads(json.dumps(loader.get_config()))
        path = _write(tmp_path, 'cfg.json', data)
        local = ConfigLoader(path)
        data['execution_settings']['workers'] = 4
        _write(tmp_path, 'cfg.json', data)
        assert local.get_workers() == -1
        local.reload_config()
        assert local.get_workers() == 4

    def test_singleton(self):
        assert get_config_loader() is get_config_loader()
        reload_config()
        assert get_config_loader().get_workers() == -1

    def test_named_distribution_is_a_copy(self, loader):
        descriptor = loader.get_distribution('ramp')
        descriptor['name'] = 'changed'
        assert loader.get_distribution('ramp') == {'name': 'ramp'}
        with pytest.raises(ConfigError):
            loader.get_distribution('sine')


class TestResolveExperiment:
    def test_built_in_block(self, loader):
        resolved = loader.resolve_experiment('pointwise')
        assert resolved['kind'] == 'pointwise'
        assert resolved['k'] == 200
        assert resolved['distribution'] == {'name': 'inconsistency_example', 'p0': 0.1, 'p1': 0.3}
        assert resolved['quad_tol'] == 1e-6
        assert resolved['workers'] == -1
        assert 'enabled' not in resolved

    def test_workers_default_to_every_core(self, loader):
        assert loader.resolve_experiment('ball')['workers'] == -1
        assert loader.resolve_experiment('ball', overrides={'workers': 2})['workers'] == 2
        assert loader.resolve_experiment('ball', overrides={'workers': None})['workers'] == -1

    def test_precedence(self, loader):
        user = {
            'defaults': {'delta': 0.2, 'reps': 7},
            'experiments': {'pointwise': {'reps': 9}},
        }
        resolved = loader.resolve_experiment('pointwise', user, overrides={'reps': 3, 'k': None})
        assert resolved['delta'] == 0.2
        assert resolved['reps'] == 3
        assert resolved['k'] == 200

        resolved = loader.resolve_experiment('pointwise', user)
        assert resolved['reps'] == 9

    def test_flat_user_file(self, loader):
        user = {'reps': 4, 'distribution': 'mine', 'distributions': {'mine': {'name': 'constant', 'value': 0.7}}}
        resolved = loader.resolve_experiment('ball', user)
        assert resolved['reps'] == 4
        assert resolved['distribution'] == {'name': 'constant', 'value': 0.7}
        assert 'distributions' not in resolved

    def test_unknown_kind_and_distribution(self, loader):
        with pytest.raises(ConfigError):
            loader.resolve_experiment('bootstrap')
        with pytest.raises(ConfigError):
            loader.resolve_experiment('ball', {'distribution': 'sine'})


class TestValidation:
    @pytest.fixture
    def base(self, loader):
        return json.loads(json.dumps(loader.get_config()))

    def test_missing_section(self, tmp_path, base):
        del base['logging']
        with pytest.raises(ConfigError):
            ConfigLoader(_write(tmp_path, 'cfg.json', base))

    @pytest.mark.parametrize('block', [
        {'n_grid': [100]},
        {'enabled': True, 'n_grid': []},
        {'enabled': True, 'n_grid': [200, 100]},
        {'enabled': True, 'reps': 0},
        {'enabled': True, 'distribution': 'sine'},
    ])
    def test_bad_experiment_block(self, tmp_path, base, block):
        base['experiments']['ball'] = block
        with pytest.raises(ConfigError):
            ConfigLoader(_write(tmp_path, 'cfg.json', base))

    def test_unknown_kind(self, tmp_path, base):
        base['experiments']['bootstrap'] = {'enabled': True}
        with pytest.raises(ConfigError):
            ConfigLoader(_write(tmp_path, 'cfg.json', base))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"defaults": ')
        with pytest.raises(ConfigError):
            ConfigLoader(str(path))
        with pytest.raises(ConfigError):
            load_user_config(str(path))

    def test_user_file_must_be_an_object(self, tmp_path):
        with pytest.raises(ConfigError):
            load_user_config(_write(tmp_path, 'list.json', [1, 2]))
        with pytest.raises(FileNotFoundError):
            load_user_config(str(tmp_path / 'absent.json'))


class TestSeeding:
    def test_flag_beats_environment(self, workdir, monkeypatch):
        monkeypatch.setenv('NOISYKNN_SEED', '17')
        assert resolve_seed(3) == 3
        assert resolve_seed() == 17

    def test_default_and_bad_environment(self, workdir, monkeypatch):
        assert resolve_seed() == 0
        monkeypatch.setenv('NOISYKNN_SEED', 'abc')
        with pytest.raises(ValueError):
            resolve_seed()

    def test_streams_are_independent_and_reproducible(self):
        first = replicate_rng(5, 1000, 2, STREAM_SAMPLE).random(4)
        again = get_rng(5, 1000, 2, STREAM_SAMPLE).random(4)
        other = replicate_rng(5, 1000, 2, STREAM_CHANNEL).random(4)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, other)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError):
            get_rng(-1)
        with pytest.raises(ValueError):
            get_rng(0, -2)
