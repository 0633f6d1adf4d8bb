import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from bggkit import bgg, sample
from bggkit.bgg import BggParams
from bggkit.bmixgnb import BmixgnbParams, covariance_ym
from bggkit.errors import DomainError
from bggkit.gof import ks_one_sample, ks_two_sample, pearson_chi_square
from bggkit.sample import RandomStream


def _geometric_cells(ns, p, cells):
    observed = np.bincount(np.minimum(ns, cells), minlength=cells + 1)[1:]
    return pearson_chi_square(observed, bgg.duration_probabilities(p, cells))


def test_random_stream_is_reproducible():
    a = RandomStream(42, 3).gen.random(5)
    b = RandomStream(42, 3).gen.random(5)
    c = RandomStream(42, 4).gen.random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RandomStream(42).spawn(7).stream_id == 7


@pytest.mark.parametrize("seed", [-1, 2 ** 64, 1.5])
def test_random_stream_rejects_bad_seeds(seed):
    with pytest.raises(DomainError):
        RandomStream(seed)


def test_building_block_validation():
    rng = RandomStream(0)
    with pytest.raises(DomainError):
        sample.sample_gamma(0.0, 1.0, rng)
    with pytest.raises(DomainError):
        sample.sample_geometric(1.0, rng)
    with pytest.raises(DomainError):
        sample.sample_nb(-1.0, 0.5, rng)
    with pytest.raises(DomainError):
        sample.sample_logarithmic(0.0, rng)
    with pytest.raises(DomainError):
        sample.sample_poisson(0.0, rng)


def test_scalar_and_shaped_draws():
    params = BggParams(1.0, 2.0, 0.5)
    x, n = sample.sample_bgg(params, RandomStream(1))
    assert isinstance(x, float) and isinstance(n, int) and n >= 1
    xs, ns = sample.sample_bgg(params, RandomStream(1), size=(3, 4))
    assert xs.shape == (3, 4) and ns.shape == (3, 4)
    y, m = sample.sample_bmixgnb(BmixgnbParams(1.0, 2.0, 0.5, 0.3), RandomStream(1))
    assert y > 0 and m >= 0


def test_bgg_draws_are_deterministic():
    params = BggParams(1.5, 0.7, 0.3)
    for method in (sample.sample_bgg, sample.sample_bgg_compound_poisson):
        x1, n1 = method(params, RandomStream(9), 100)
        x2, n2 = method(params, RandomStream(9), 100)
        assert np.array_equal(x1, x2) and np.array_equal(n1, n2)


def test_literal_sum_and_supports():
    params = BggParams(1.5, 0.7, 0.3)
    xs, ns = sample.sample_bgg(params, RandomStream(2), 500, literal_sum=True)
    assert np.all(xs > 0) and np.all(ns >= 1)
    xs, ns = sample.sample_bgg_compound_poisson(params, RandomStream(2), 500)
    assert np.all(xs > 0) and np.all(ns >= 1)
    ys, ms = sample.sample_bmixgnb_compound_poisson(BmixgnbParams(1.0, 1.0, 0.4, 0.8), RandomStream(2), 500)
    assert np.all(ys > 0) and np.all(ms >= 0)


def test_geometric_sum_with_sure_single_copy():
    params = BggParams(1.0, 2.0, 0.5)
    xs, ns = sample.sample_bgg_geometric_sum(1.0 - 1e-12, params, RandomStream(3), 1000)
    assert np.all(ns >= 1)
    with pytest.raises(DomainError):
        sample.sample_bgg_geometric_sum(1.0, params, RandomStream(3), 10)


def test_write_sample_csv(tmp_path):
    path = tmp_path / "draws.csv"
    xs, ns = sample.sample_bgg(BggParams(1.0, 2.0, 0.5), RandomStream(5), 20)
    sample.write_sample_csv(path, xs, ns)
    frame = pd.read_csv(path, float_precision="round_trip")
    assert list(frame.columns) == ["x", "n"]
    assert np.array_equal(frame["x"].to_numpy(), xs)
    assert np.array_equal(frame["n"].to_numpy(), ns)


@pytest.mark.slow
def test_gamma_and_geometric_blocks():
    rng = RandomStream(31)
    draws = sample.sample_gamma(2.0, 4.0, rng, 10 ** 6)
    assert abs(draws.mean() - 0.5) < 3 * draws.std() / 1000.0
    draws = sample.sample_gamma(1.0, 2.0, rng, 10 ** 4)
    assert ks_one_sample(draws, stats.expon(scale=0.5).cdf).p_value > 0.01
    draws = sample.sample_gamma(0.3, 1.0, rng, 10 ** 4)
    assert ks_one_sample(draws, stats.gamma(0.3).cdf).p_value > 0.01
    draws = sample.sample_geometric(0.5, rng, 10 ** 6)
    assert abs(draws.mean() - 2.0) < 3 * draws.std() / 1000.0


@pytest.mark.slow
def test_logarithmic_pmf():
    p = 0.3
    draws = sample.sample_logarithmic(p, RandomStream(32), 10 ** 6)
    cells = 15
    observed = np.bincount(np.minimum(draws, cells), minlength=cells + 1)[1:]
    k = np.arange(1, cells)
    head = (1 - p) ** k / (k * -math.log(p))
    probs = np.append(head, 1.0 - head.sum())
    assert pearson_chi_square(observed, probs).p_value > 0.01


@pytest.mark.slow
def test_poisson_block():
    lam = 1.7
    draws = sample.sample_poisson(lam, RandomStream(33), 10 ** 5)
    cells = 7
    observed = np.bincount(np.minimum(draws, cells - 1), minlength=cells)
    head = stats.poisson.pmf(np.arange(cells - 1), lam)
    probs = np.append(head, 1.0 - head.sum())
    assert pearson_chi_square(observed, probs).p_value > 0.01


@pytest.mark.slow
@pytest.mark.parametrize("seed", [101, 202, 303])
def test_bgg_representations_agree(seed):
    params = BggParams(1.5, 0.7, 0.3)
    n = 10 ** 5
    direct = sample.sample_bgg(params, RandomStream(seed, 0), n)
    literal = sample.sample_bgg(params, RandomStream(seed, 1), n, literal_sum=True)
    poisson = sample.sample_bgg_compound_poisson(params, RandomStream(seed, 2), n)
    for xs, ns in (direct, literal, poisson):
        assert _geometric_cells(ns, params.p, 10).p_value > 0.01
    assert ks_two_sample(direct[0], literal[0]).p_value > 0.01
    assert ks_two_sample(direct[0], poisson[0]).p_value > 0.01
    assert ks_two_sample(literal[0], poisson[0]).p_value > 0.01


@pytest.mark.slow
def test_compound_poisson_base_event_frequency():
    params = BggParams(1.0, 1.0, 0.6)
    _, ns = sample.sample_bgg_compound_poisson(params, RandomStream(33), 10 ** 5)
    freq = np.mean(ns == 1)
    assert abs(freq - params.p) < 3 * math.sqrt(params.p * (1 - params.p) / ns.size)


@pytest.mark.slow
def test_bgg_moments():
    params = BggParams(2.0, 1.5, 0.5)
    xs, ns = sample.sample_bgg(params, RandomStream(34), 10 ** 6)
    size = xs.size
    assert abs(ns.mean() - 2.0) < 3 * ns.std() / math.sqrt(size)
    assert abs(xs.mean() - 1.5) < 3 * xs.std() / math.sqrt(size)
    cov = bgg.covariance(params)
    prods = (xs - xs.mean()) * (ns - ns.mean())
    assert abs(prods.mean() - cov.cov_xn) < 3 * prods.std() / math.sqrt(size)


@pytest.mark.slow
def test_geometric_stability():
    params = BggParams(1.2, 0.9, 0.5)
    q = 0.4
    n = 10 ** 5
    xs, ns = sample.sample_bgg_geometric_sum(q, params, RandomStream(35), n)
    ref_x, _ = sample.sample_bgg(BggParams(1.2, 0.9, 0.2), RandomStream(36), n)
    assert ks_two_sample(xs, ref_x).p_value > 0.01
    assert _geometric_cells(ns, 0.2, 15).p_value > 0.01
    assert abs(ns.mean() - 1.0 / 0.2) < 3 * ns.std() / math.sqrt(n)


@pytest.mark.slow
def test_bmixgnb_representations_agree():
    params = BmixgnbParams(1.0, 1.5, 0.45, 2.3)
    n = 10 ** 5
    y1, m1 = sample.sample_bmixgnb(params, RandomStream(37, 0), n)
    y2, m2 = sample.sample_bmixgnb_flp(params, RandomStream(37, 1), n)
    y3, m3 = sample.sample_bmixgnb_compound_poisson(params, RandomStream(37, 2), n)
    assert ks_two_sample(y1, y2).p_value > 0.01
    assert ks_two_sample(y1, y3).p_value > 0.01
    cells = 20
    probs = stats.nbinom.pmf(np.arange(cells - 1), params.r, params.p)
    probs = np.append(probs, 1.0 - probs.sum())
    for ms in (m1, m2, m3):
        observed = np.bincount(np.minimum(ms, cells - 1), minlength=cells)
        assert pearson_chi_square(observed, probs).p_value > 0.01


@pytest.mark.slow
def test_bmixgnb_unit_time_matches_shifted_bgg():
    params = BmixgnbParams(1.0, 2.0, 0.5, 1.0)
    ys, ms = sample.sample_bmixgnb(params, RandomStream(38), 10 ** 5)
    xs, _ = sample.sample_bgg(params.bgg(), RandomStream(39), 10 ** 5)
    assert ks_two_sample(ys, xs).p_value > 0.01
    assert _geometric_cells(ms + 1, 0.5, 10).p_value > 0.01


@pytest.mark.slow
def test_bmixgnb_covariance():
    params = BmixgnbParams(1.0, 1.5, 0.45, 2.3)
    ys, ms = sample.sample_bmixgnb(params, RandomStream(40), 10 ** 6)
    expected = covariance_ym(params)
    size = ys.size
    yc, mc = ys - ys.mean(), ms - ms.mean()
    for prods, exact in ((yc * yc, expected.var_x), (mc * mc, expected.var_n), (yc * mc, expected.cov_xn)):
        assert abs(prods.mean() - exact) < 3 * prods.std() / math.sqrt(size)


@pytest.mark.slow
def test_limit_law_is_exponential():
    p = 1e-3
    params = BggParams(1.0, 2.0, p)
    xs, ns = sample.sample_bgg(params, RandomStream(41), 10 ** 5)
    # spread each lattice point over its cell so the comparison law is continuous
    jitter = RandomStream(42).gen.uniform(size=ns.size)
    scaled = p * (ns - jitter)
    assert ks_one_sample(scaled, stats.expon.cdf).p_value > 0.01
    assert abs(np.corrcoef(p * xs, p * ns)[0, 1] - 1.0) < 0.01
