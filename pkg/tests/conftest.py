import pytest

from bggkit.bgg import BggParams
from bggkit.infer import PairSample
from bggkit.sample import RandomStream, sample_bgg

# magnitude and duration estimates of the exchange-rate application
APPLICATION_MU = 0.0082
APPLICATION_ALPHA = 0.8805
APPLICATION_P = 0.5093


@pytest.fixture
def application_params():
    return BggParams(APPLICATION_ALPHA / APPLICATION_MU, APPLICATION_ALPHA, APPLICATION_P)


@pytest.fixture
def application_pairs(application_params):
    xs, ns = sample_bgg(application_params, RandomStream(2011), 549)
    return PairSample.from_arrays(xs, ns)


@pytest.fixture
def small_pairs():
    xs, ns = sample_bgg(BggParams(2.0, 1.5, 0.4), RandomStream(7), 300)
    return PairSample.from_arrays(xs, ns)
