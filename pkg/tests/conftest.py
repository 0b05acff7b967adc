import pytest

from Noise.noise_model import NoiseRates
from Synthetic.distributions import make_inconsistency_example


@pytest.fixture
def rates():
    return NoiseRates(0.1, 0.3)


@pytest.fixture
def example(rates):
    return make_inconsistency_example(rates.p0, rates.p1)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Run in a scratch directory so logs and results stay out of the repository"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv('NOISYKNN_SEED', raising=False)
    return tmp_path
