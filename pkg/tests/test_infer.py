import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from bggkit import infer
from bggkit.bgg import BggParams, BggParamsOrtho
from bggkit.bmixgnb import BmixgnbParams
from bggkit.errors import (
    BoundaryError,
    DegenerateDataError,
    DomainError,
    NonConvergenceError,
    PreconditionError,
)
from bggkit.infer import PairSample, SolverOptions
from bggkit.sample import RandomStream, sample_bgg, sample_bmixgnb


def _central_gradient(fn, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h * max(1.0, abs(theta[i]))
        grad[i] = (fn(theta + step) - fn(theta - step)) / (2.0 * step[i])
    return grad


def test_pair_sample_validation():
    with pytest.raises(DomainError):
        PairSample.from_arrays([], [])
    with pytest.raises(DomainError):
        PairSample.from_arrays([1.0, -2.0], [1, 2])
    with pytest.raises(DomainError):
        PairSample.from_arrays([1.0, 2.0], [0, 2])
    with pytest.raises(DomainError):
        PairSample.from_arrays([1.0, 2.0], [1.5, 2])
    data = PairSample.from_arrays([1.0, 2.0], [0, 2], model_kind=infer.BMIXGNB)
    assert data.ns.tolist() == [0, 2]
    assert data.shifted().ns.tolist() == [1, 3]
    assert data.shifted().shifted().model_kind == infer.BMIXGNB


def test_bgg_loglik_single_point():
    data = PairSample.from_arrays([1.0], [1])
    assert_allclose(infer.bgg_loglik(BggParams(1.0, 1.0, 0.5), data), math.log(0.5) - 1.0, rtol=1e-14)


def test_bgg_score_matches_finite_differences(small_pairs):
    theta = np.array([1.7, 1.2, 0.45])
    fn = lambda v: infer.bgg_loglik(BggParams(*v), small_pairs)
    assert_allclose(infer.bgg_score(BggParams(*theta), small_pairs), _central_gradient(fn, theta), rtol=1e-4)


def test_bgg_hessian_matches_score_differences(small_pairs):
    theta = np.array([1.7, 1.2, 0.45])
    h = infer.bgg_hessian(BggParams(*theta), small_pairs)
    for i in range(3):
        fn = lambda v: infer.bgg_score(BggParams(*v), small_pairs)[i]
        assert_allclose(h[i], _central_gradient(fn, theta), rtol=1e-4, atol=1e-6)


def test_ortho_score_and_hessian_match_finite_differences(small_pairs):
    theta = np.array([0.8, 1.2, 0.45])
    fn = lambda v: infer.bgg_loglik(BggParamsOrtho(*v).to_rate(), small_pairs)
    assert_allclose(infer.bgg_score_ortho(BggParamsOrtho(*theta), small_pairs), _central_gradient(fn, theta), rtol=1e-4)
    h = infer.bgg_hessian_ortho(BggParamsOrtho(*theta), small_pairs)
    for i in range(3):
        row = lambda v: infer.bgg_score_ortho(BggParamsOrtho(*v), small_pairs)[i]
        assert_allclose(h[i], _central_gradient(row, theta), rtol=1e-4, atol=1e-6)


def test_p_score_vanishes_at_closed_form_estimate(small_pairs):
    p_hat = 1.0 / small_pairs.n_bar
    score = infer.bgg_score(BggParams(1.0, 1.0, p_hat), small_pairs)
    assert abs(score[2]) < 1e-8 * small_pairs.size


def test_bgg_fit_closed_forms():
    data = PairSample.from_arrays([1.0, 2.5, 2.0], [1, 2, 3])
    report = infer.bgg_fit(data)
    assert_allclose(report.estimates["p"], 0.5, rtol=1e-15)
    beta, alpha = report.estimates["beta"], report.estimates["alpha"]
    assert_allclose(beta, alpha * 2.0 / data.x_bar, rtol=1e-14)
    assert report.converged and report.model == "BGG"


def test_bgg_fit_score_vanishes(small_pairs):
    report = infer.bgg_fit(small_pairs)
    score = infer.bgg_score(report.params(), small_pairs)
    assert np.all(np.abs(score) < 1e-6 * small_pairs.size)


def test_bgg_fit_errors():
    with pytest.raises(BoundaryError):
        infer.bgg_fit(PairSample.from_arrays([1.0, 2.0, 3.0], [1, 1, 1]))
    with pytest.raises(DomainError):
        infer.bgg_fit(PairSample.from_arrays([1.0], [2]))
    # magnitudes proportional to durations leave the alpha equation without a root
    with pytest.raises(NonConvergenceError) as info:
        infer.bgg_fit(PairSample.from_arrays([0.5, 1.0, 1.5], [1, 2, 3]))
    assert "bracket" in info.value.diagnostics
    with pytest.raises(DomainError):
        infer.bgg_fit(PairSample.from_arrays([1.0, 2.0], [0, 3], model_kind=infer.BMIXGNB))


def test_beg_fit_fixes_alpha(small_pairs):
    report = infer.bgg_fit(small_pairs, fixed_alpha=1.0)
    assert report.model == "BEG"
    assert report.estimates["alpha"] == 1.0
    assert "alpha" not in report.std_errors
    assert report.fixed == {"alpha": 1.0}


def test_ortho_fit_relations():
    data = PairSample.from_arrays([1.0, 3.5, 2.0, 1.5], [1, 3, 2, 2])
    report = infer.bgg_fit_ortho(data)
    assert_allclose(report.estimates["mu"], data.x_bar / data.n_bar, rtol=1e-15)
    rate = infer.bgg_fit(data)
    assert_allclose(report.estimates["alpha"], rate.estimates["alpha"], rtol=1e-15)
    assert_allclose(report.loglik, rate.loglik, rtol=1e-14)


def test_ortho_mu_hat_from_means():
    data = PairSample.from_arrays([1.5, 2.5, 3.0, 1.0], [1, 2, 3, 2])
    assert_allclose(infer.bgg_fit_ortho(data).estimates["mu"], 1.0, rtol=1e-15)


def test_bgg_fisher_entries():
    info = infer.bgg_fisher(BggParams(1.0, 1.0, 0.5))
    assert_allclose(info[2, 2], 8.0, rtol=1e-14)
    direct = 0.5 * sum(j ** 2 * 0.5 ** (j - 1) * float(special.polygamma(1, j)) for j in range(1, 200))
    assert_allclose(info[1, 1], direct, rtol=1e-10)
    ortho = infer.bgg_fisher_ortho(BggParamsOrtho(1.0, 1.0, 0.5))
    assert_allclose(ortho[0, 0], 2.0, rtol=1e-14)
    assert ortho[0, 1] == 0.0 and ortho[1, 2] == 0.0


@pytest.mark.parametrize("mu,alpha,p", [(1.0, 1.0, 0.5), (0.4, 2.7, 0.2), (3.0, 0.6, 0.85)])
def test_ortho_information_decouples_mu_and_alpha(mu, alpha, p):
    point = BggParamsOrtho(mu, alpha, p)
    a = infer._ortho_jacobian(mu, alpha, 3)
    transformed = a.T @ infer.bgg_fisher(point.to_rate()) @ a
    assert_allclose(transformed[0, 1], 0.0, atol=1e-12 * transformed[0, 0])
    assert_allclose(transformed, infer.bgg_fisher_ortho(point), rtol=1e-10, atol=1e-12)

    theta = BmixgnbParams(alpha / mu, alpha, p, 1.7)
    a = infer._ortho_jacobian(mu, alpha, 4)
    transformed = a.T @ infer.bmixgnb_fisher(theta) @ a
    ortho = infer.bmixgnb_fisher_ortho(theta)
    assert ortho[0, 1] == 0.0 and ortho[0, 2] == 0.0
    assert_allclose(transformed, ortho, rtol=1e-10, atol=1e-12)


def test_report_json_round_trip(small_pairs):
    report = infer.bgg_fit(small_pairs)
    payload = json.loads(report.to_json())
    assert set(payload) >= {"model", "estimates", "std_errors", "ci", "loglik", "converged", "information_matrix"}
    back = infer.FitReport.from_dict(payload)
    assert back.estimates == report.estimates
    assert back.params() == report.params()
    lo, hi = payload["ci"]["alpha"]
    assert lo < report.estimates["alpha"] < hi


def test_observed_information_option(small_pairs):
    opts = SolverOptions(information="observed")
    report = infer.bgg_fit(small_pairs, opts)
    assert report.information == "observed"
    expected = infer.bgg_fit(small_pairs)
    assert_allclose(report.estimates["alpha"], expected.estimates["alpha"])
    assert_allclose(report.std_errors["alpha"], expected.std_errors["alpha"], rtol=0.5)
    with pytest.raises(DomainError):
        SolverOptions(information="sandwich")


def test_bgg_recovers_application_parameters(application_params, application_pairs):
    report = infer.bgg_fit_ortho(application_pairs)
    truth = dict(zip(("mu", "alpha", "p"), application_params.to_ortho().as_tuple()))
    for name, value in truth.items():
        assert abs(report.estimates[name] - value) < 4 * report.std_errors[name]


def test_bmixgnb_loglik_and_score():
    params = BmixgnbParams(1.0, 1.5, 0.4, 2.0)
    ys, ms = sample_bmixgnb(params, RandomStream(51), 300)
    data = PairSample.from_arrays(ys, ms, model_kind=infer.BMIXGNB)
    theta = np.array([1.1, 1.3, 0.45, 1.7])
    fn = lambda v: infer.bmixgnb_loglik(BmixgnbParams(*v), data)
    assert_allclose(infer.bmixgnb_score(BmixgnbParams(*theta), data), _central_gradient(fn, theta), rtol=1e-4)
    h = infer.bmixgnb_hessian(BmixgnbParams(*theta), data)
    for i in range(4):
        row = lambda v: infer.bmixgnb_score(BmixgnbParams(*v), data)[i]
        assert_allclose(h[i], _central_gradient(row, theta), rtol=1e-4, atol=1e-5)


def test_bmixgnb_unit_time_loglik_equals_bgg(small_pairs):
    params = BmixgnbParams(2.0, 1.5, 0.4, 1.0)
    assert_allclose(
        infer.bmixgnb_loglik(params, small_pairs.shifted()),
        infer.bgg_loglik(params.bgg(), small_pairs),
        rtol=1e-12,
    )


def test_bmixgnb_fixed_tau_reproduces_bgg_fit(small_pairs):
    bgg_report = infer.bgg_fit(small_pairs)
    report = infer.bmixgnb_fit(small_pairs.shifted(), fixed_tau=1.0)
    for name in ("beta", "alpha", "p"):
        assert_allclose(report.estimates[name], bgg_report.estimates[name], rtol=1e-6)
    assert report.fixed == {"tau": 1.0}
    assert "tau" not in report.std_errors


def test_bmixgnb_p_hat_given_tau():
    data = PairSample.from_arrays([0.5, 1.5, 2.2, 0.9], [0, 2, 1, 1], model_kind=infer.BMIXGNB)
    report = infer.bmixgnb_fit(data, fixed_alpha=1.0, fixed_tau=1.0)
    assert_allclose(report.estimates["p"], 0.5, rtol=1e-15)
    assert report.iterations == 0


def test_bmixgnb_recovery():
    truth = BmixgnbParams(1.0, 1.5, 0.4, 2.0)
    ys, ms = sample_bmixgnb(truth, RandomStream(52), 2000)
    data = PairSample.from_arrays(ys, ms, model_kind=infer.BMIXGNB)
    report = infer.bmixgnb_fit(data)
    assert report.converged
    for name, value in zip(("beta", "alpha", "p", "tau"), truth.as_tuple()):
        assert abs(report.estimates[name] - value) < 4 * report.std_errors[name]
    grad = infer.bmixgnb_score(report.params(), data)
    assert np.all(np.abs(grad) < 1e-5 * data.size)
    ortho = infer.bmixgnb_fit(data, parametrization="ortho")
    assert_allclose(ortho.estimates["mu"], report.estimates["alpha"] / report.estimates["beta"], rtol=1e-8)


def test_bmixgnb_fit_errors():
    zeros = PairSample.from_arrays([1.0, 2.0, 3.0], [0, 0, 0], model_kind=infer.BMIXGNB)
    with pytest.raises(DegenerateDataError):
        infer.bmixgnb_fit(zeros)
    data = PairSample.from_arrays([1.0, 2.0, 3.0], [0, 1, 0], model_kind=infer.BMIXGNB)
    with pytest.raises(DomainError):
        infer.bmixgnb_fit(data, parametrization="polar")


def test_lr_test():
    result = infer.lr_test(-100.0, -100.0 - 5.666 / 2.0, 1)
    assert_allclose(result.statistic, 5.666, rtol=1e-12)
    assert abs(result.p_value - 0.0173) < 5e-4
    same = infer.lr_test(-10.0, -10.0)
    assert same.statistic == 0.0 and same.p_value == 1.0
    with pytest.raises(DomainError):
        infer.lr_test(-10.0, -5.0)


def test_wald_test(small_pairs):
    report = infer.bgg_fit(small_pairs)
    stat, p_value = infer.wald_test(report, "alpha", report.estimates["alpha"])
    assert stat == 0.0 and p_value == 1.0
    report.converged = False
    with pytest.raises(PreconditionError):
        infer.wald_test(report, "alpha", 1.0)


@pytest.mark.slow
def test_bgg_information_matches_simulated_hessian(application_params):
    xs, ns = sample_bgg(application_params, RandomStream(61), 10 ** 5)
    data = PairSample.from_arrays(xs, ns)
    observed = -infer.bgg_hessian(application_params, data) / data.size
    expected = infer.bgg_fisher(application_params)
    mask = expected != 0.0
    assert_allclose(observed[mask], expected[mask], rtol=0.02)

    theta_star = application_params.to_ortho()
    observed = -infer.bgg_hessian_ortho(theta_star, data) / data.size
    expected = infer.bgg_fisher_ortho(theta_star)
    diag = np.diag(expected)
    assert_allclose(np.diag(observed), diag, rtol=0.02)
    assert abs(observed[0, 1]) < 0.02 * math.sqrt(diag[0] * diag[1])


@pytest.mark.slow
def test_bmixgnb_information_matches_simulated_hessian():
    theta = BmixgnbParams(1.0, 1.5, 0.4, 2.0)
    ys, ms = sample_bmixgnb(theta, RandomStream(62), 10 ** 5)
    data = PairSample.from_arrays(ys, ms, model_kind=infer.BMIXGNB)
    observed = -infer.bmixgnb_hessian(theta, data) / data.size
    expected = infer.bmixgnb_fisher(theta)
    mask = expected != 0.0
    assert_allclose(observed[mask], expected[mask], rtol=0.02)
    observed = -infer.bmixgnb_hessian_ortho(theta, data) / data.size
    expected = infer.bmixgnb_fisher_ortho(theta)
    assert_allclose(np.diag(observed), np.diag(expected), rtol=0.02)
