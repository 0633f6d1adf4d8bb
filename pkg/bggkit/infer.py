"""Maximum likelihood, Fisher information and tests for BGG and BMixGNB.

BGG closes in p and beta given alpha, leaving a monotone one-dimensional
equation for alpha. BMixGNB profiles beta and p out and solves the remaining
(alpha, tau) system jointly with a damped Newton iteration.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc
from scipy import stats

from .bgg import BggParams, BggParamsOrtho, joint_pdf, require_positive
from .bmixgnb import BmixgnbParams, _log_nb_norm, _log_nb_weights, joint_pdf_ym
from .errors import (
    BoundaryError,
    DegenerateDataError,
    DegenerateInformationError,
    DomainError,
    NonConvergenceError,
    PreconditionError,
)
from .gof import TestResult
from .special import DEFAULT_CONTROL, SeriesControl, log_sum_series

# --- CONFIG ---
BGG = "BGG"
BMIXGNB = "BMIXGNB"
MODEL_KINDS = (BGG, BMIXGNB)
RATE = "rate"
ORTHO = "ortho"
START_GRID = (0.5, 1.0, 2.0)
ARMIJO = 1e-4
MAX_HALVINGS = 60
STEP_TOL = 1e-14
# score size accepted when the line search stalls in rounding noise
STALL_SCORE_TOL = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 200
    bracket: tuple = (1e-3, 1e3)
    max_bracket: tuple = (1e-6, 1e6)
    confidence: float = 0.95
    information: str = "expected"
    series: SeriesControl = DEFAULT_CONTROL
    fixed_alpha: float = None
    fixed_tau: float = None

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise DomainError(f"confidence must lie in (0, 1), got {self.confidence}")
        if self.information not in ("expected", "observed"):
            raise DomainError(f"information must be 'expected' or 'observed', got {self.information!r}")
        if not self.tol > 0 or self.max_iter < 1:
            raise DomainError("tol must be > 0 and max_iter >= 1")


DEFAULT_OPTIONS = SolverOptions()


# --- DATA ---

@dataclass(frozen=True, eq=False)
class PairSample:
    xs: np.ndarray
    ns: np.ndarray
    model_kind: str = BGG

    @classmethod
    def from_arrays(cls, xs, ns, model_kind=BGG):
        if model_kind not in MODEL_KINDS:
            raise DomainError(f"model_kind must be one of {MODEL_KINDS}, got {model_kind!r}")
        xs = np.asarray(xs, dtype=float).ravel()
        ns_raw = np.asarray(ns).ravel()
        if xs.size == 0 or xs.size != ns_raw.size:
            raise DomainError(f"need equal non-empty xs and ns, got {xs.size} and {ns_raw.size}")
        if not np.all(np.isfinite(xs)) or not np.all(xs > 0):
            bad = np.flatnonzero(~(xs > 0))
            raise DomainError(f"all xs must be > 0; offending positions {bad[:10].tolist()}")
        as_float = ns_raw.astype(float)
        minimum = 1 if model_kind == BGG else 0
        if not np.all(as_float == np.round(as_float)) or not np.all(as_float >= minimum):
            raise DomainError(f"{model_kind} counts must be integers >= {minimum}")
        return cls(xs=xs, ns=as_float.astype(np.int64), model_kind=model_kind)

    @property
    def size(self):
        return int(self.xs.size)

    @property
    def x_bar(self):
        return float(self.xs.mean())

    @property
    def n_bar(self):
        return float(self.ns.mean())

    def shifted(self):
        """BGG counts N become BMixGNB counts M = N - 1, and back."""
        if self.model_kind == BGG:
            return PairSample(self.xs, self.ns - 1, BMIXGNB)
        return PairSample(self.xs, self.ns + 1, BGG)


def _require_kind(data, kind):
    if data.model_kind != kind:
        raise DomainError(f"expected a {kind} sample, got {data.model_kind}")


# --- REPORT ---

@dataclass
class FitReport:
    model: str
    parametrization: str
    estimates: dict
    std_errors: dict
    ci_lower: dict
    ci_upper: dict
    loglik: float
    converged: bool
    iterations: int
    information_matrix: np.ndarray
    information: str = "expected"
    confidence: float = 0.95
    n: int = 0
    fixed: dict = field(default_factory=dict)

    @property
    def names(self):
        return tuple(self.estimates)

    def params(self):
        est = self.estimates
        if self.model == BMIXGNB:
            beta = est["beta"] if self.parametrization == RATE else est["alpha"] / est["mu"]
            return BmixgnbParams(beta, est["alpha"], est["p"], est["tau"])
        if self.parametrization == ORTHO:
            return BggParamsOrtho(est["mu"], est["alpha"], est["p"])
        return BggParams(est["beta"], est["alpha"], est["p"])

    def to_dict(self):
        return {
            "model": self.model,
            "parametrization": self.parametrization,
            "estimates": dict(self.estimates),
            "std_errors": dict(self.std_errors),
            "ci": {name: [self.ci_lower[name], self.ci_upper[name]] for name in self.ci_lower},
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "information": self.information,
            "information_matrix": np.asarray(self.information_matrix).tolist(),
            "confidence": self.confidence,
            "n": self.n,
            "fixed": dict(self.fixed),
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data):
        ci = data.get("ci", {})
        return cls(
            model=data["model"],
            parametrization=data["parametrization"],
            estimates=dict(data["estimates"]),
            std_errors=dict(data.get("std_errors", {})),
            ci_lower={k: v[0] for k, v in ci.items()},
            ci_upper={k: v[1] for k, v in ci.items()},
            loglik=data["loglik"],
            converged=data["converged"],
            iterations=data["iterations"],
            information_matrix=np.asarray(data.get("information_matrix", [])),
            information=data.get("information", "expected"),
            confidence=data.get("confidence", 0.95),
            n=data.get("n", 0),
            fixed=dict(data.get("fixed", {})),
        )


def _make_report(model, parametrization, names, values, info, fixed, data, loglik, iterations, opts):
    free = [i for i, name in enumerate(names) if name not in fixed]
    block = info[np.ix_(free, free)]
    try:
        cov = np.linalg.inv(block) / data.size
    except np.linalg.LinAlgError:
        raise DegenerateInformationError("information matrix is singular at the estimate", point=dict(zip(names, values)))
    variances = np.diag(cov)
    if not np.all(variances > 0):
        raise DegenerateInformationError("information matrix is not positive definite at the estimate", point=dict(zip(names, values)))
    z = stats.norm.ppf(0.5 + opts.confidence / 2.0)
    se = dict(zip([names[i] for i in free], np.sqrt(variances).tolist()))
    estimates = {name: float(v) for name, v in zip(names, values)}
    return FitReport(
        model=model,
        parametrization=parametrization,
        estimates=estimates,
        std_errors=se,
        ci_lower={k: estimates[k] - z * s for k, s in se.items()},
        ci_upper={k: estimates[k] + z * s for k, s in se.items()},
        loglik=float(loglik),
        converged=True,
        iterations=int(iterations),
        information_matrix=info,
        information=opts.information,
        confidence=opts.confidence,
        n=data.size,
        fixed=dict(fixed),
    )


# --- REPARAMETRIZATION mu = alpha / beta ---

def _ortho_jacobian(mu, alpha, dim):
    """d(beta, alpha, p[, tau]) / d(mu, alpha, p[, tau])."""
    a = np.eye(dim)
    a[0, 0] = -alpha / mu ** 2
    a[0, 1] = 1.0 / mu
    return a


def _ortho_hessian(h, score_beta, mu, alpha):
    dim = h.shape[-1]
    a = _ortho_jacobian(mu, alpha, dim)
    curvature = np.zeros((dim, dim))
    curvature[0, 0] = 2.0 * alpha / mu ** 3
    curvature[0, 1] = curvature[1, 0] = -1.0 / mu ** 2
    out = np.einsum("ji,...jk,kl->...il", a, h, a)
    return out + np.multiply.outer(np.asarray(score_beta), curvature)


# --- BGG ---

def bgg_loglik(theta, data):
    _require_kind(data, BGG)
    return float(np.sum(joint_pdf(theta, data.xs, data.ns, log_scale=True)))


def bgg_score(theta, data):
    _require_kind(data, BGG)
    beta, alpha, p = theta.as_tuple()
    n, ns, xs = data.size, data.ns, data.xs
    n_bar = data.n_bar
    return np.array([
        n * (alpha * n_bar / beta - data.x_bar),
        n * n_bar * math.log(beta) + np.sum(ns * np.log(xs)) - np.sum(ns * sc.psi(alpha * ns)),
        n / p - n * (n_bar - 1.0) / (1.0 - p),
    ])


def bgg_score_ortho(theta_star, data):
    theta = theta_star.to_rate()
    score = bgg_score(theta, data)
    return _ortho_jacobian(theta_star.mu, theta_star.alpha, 3).T @ score


def bgg_hessian(theta, data, per_observation=False):
    _require_kind(data, BGG)
    beta, alpha, p = theta.as_tuple()
    ns = data.ns.astype(float)
    h = np.zeros((data.size, 3, 3))
    h[:, 0, 0] = -alpha * ns / beta ** 2
    h[:, 0, 1] = h[:, 1, 0] = ns / beta
    h[:, 1, 1] = -ns ** 2 * sc.polygamma(1, alpha * ns)
    h[:, 2, 2] = -1.0 / p ** 2 - (ns - 1.0) / (1.0 - p) ** 2
    return h if per_observation else h.sum(axis=0)


def bgg_hessian_ortho(theta_star, data, per_observation=False):
    theta = theta_star.to_rate()
    h = bgg_hessian(theta, data, per_observation=True)
    score_beta = theta.alpha * data.ns / theta.beta - data.xs
    out = _ortho_hessian(h, score_beta, theta_star.mu, theta_star.alpha)
    return out if per_observation else out.sum(axis=0)


def _kappa_alpha_alpha(alpha, p, ctl):
    """p * sum_j j^2 (1-p)^(j-1) trigamma(j*alpha)."""
    log_q = math.log1p(-p)

    def terms():
        j = 1
        while True:
            yield 2.0 * math.log(j) + (j - 1) * log_q + math.log(float(sc.polygamma(1, j * alpha)))
            j += 1

    return p * math.exp(log_sum_series(terms(), ctl))


def bgg_fisher(theta, ctl=DEFAULT_CONTROL):
    beta, alpha, p = theta.as_tuple()
    info = np.zeros((3, 3))
    info[0, 0] = alpha / (beta ** 2 * p)
    info[0, 1] = info[1, 0] = -1.0 / (beta * p)
    info[1, 1] = _kappa_alpha_alpha(alpha, p, ctl)
    info[2, 2] = 1.0 / (p ** 2 * (1.0 - p))
    return info


def bgg_fisher_ortho(theta_star, ctl=DEFAULT_CONTROL):
    mu, alpha, p = theta_star.as_tuple()
    diag = np.array([
        alpha / (mu ** 2 * p),
        _kappa_alpha_alpha(alpha, p, ctl) - 1.0 / (alpha * p),
        1.0 / (p ** 2 * (1.0 - p)),
    ])
    if not np.all(diag > 0):
        raise DegenerateInformationError(
            f"nonpositive diagonal in orthogonal information: {diag.tolist()}",
            point={"mu": mu, "alpha": alpha, "p": p},
        )
    return np.diag(diag)


def _safeguarded_newton(func, dfunc, lo, hi, tol, max_iter):
    """Newton-Raphson kept inside a sign-changing bracket, bisecting when a step leaves it."""
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo, 0
    if f_hi == 0.0:
        return hi, 0
    x_neg, x_pos = (lo, hi) if f_lo < 0.0 else (hi, lo)
    root = 0.5 * (lo + hi)
    dx_old = dx = abs(hi - lo)
    f, df = func(root), dfunc(root)
    for it in range(1, max_iter + 1):
        leaves = ((root - x_pos) * df - f) * ((root - x_neg) * df - f) > 0.0
        if leaves or abs(2.0 * f) > abs(dx_old * df):
            dx_old, dx = dx, 0.5 * (x_pos - x_neg)
            root = x_neg + dx
        else:
            dx_old, dx = dx, f / df
            root -= dx
        if abs(dx) < tol * max(1.0, abs(root)):
            return root, it
        f, df = func(root), dfunc(root)
        if f < 0.0:
            x_neg = root
        else:
            x_pos = root
    raise NonConvergenceError(
        f"alpha equation did not converge in {max_iter} iterations",
        partial=root,
        iterations=max_iter,
        diagnostics={"bracket": (min(x_neg, x_pos), max(x_neg, x_pos))},
    )


def _solve_alpha(data, opts):
    n, ns = data.size, data.ns.astype(float)
    n_bar, x_bar = data.n_bar, data.x_bar
    sum_n_log_x = float(np.sum(ns * np.log(data.xs)))

    def g(a):
        return float(np.sum(ns * sc.psi(a * ns)) - n * n_bar * math.log(a * n_bar / x_bar) - sum_n_log_x)

    def dg(a):
        return float(np.sum(ns ** 2 * sc.polygamma(1, a * ns)) - n * n_bar / a)

    lo, hi = opts.bracket
    while g(lo) > 0.0 and lo > opts.max_bracket[0]:
        lo /= 10.0
    while g(hi) < 0.0 and hi < opts.max_bracket[1]:
        hi *= 10.0
    g_lo, g_hi = g(lo), g(hi)
    if g_lo > 0.0 or g_hi < 0.0:
        raise NonConvergenceError(
            "alpha equation has no sign change in the expanded bracket",
            partial=None,
            iterations=0,
            diagnostics={"bracket": (lo, hi), "g_lo": g_lo, "g_hi": g_hi},
        )
    return _safeguarded_newton(g, dg, lo, hi, opts.tol, opts.max_iter)


def _check_bgg_fit_data(data):
    _require_kind(data, BGG)
    if data.size < 2:
        raise DomainError(f"need at least two observations, got {data.size}")
    if data.n_bar == 1.0:
        raise BoundaryError("all durations equal 1: p-hat = 1 is on the boundary")


def _fit_bgg_core(data, opts, fixed_alpha):
    _check_bgg_fit_data(data)
    if fixed_alpha is None:
        alpha, iterations = _solve_alpha(data, opts)
        fixed = {}
    else:
        alpha, iterations = require_positive("fixed_alpha", fixed_alpha), 0
        fixed = {"alpha": alpha}
    p = 1.0 / data.n_bar
    beta = alpha * data.n_bar / data.x_bar
    return BggParams(beta, alpha, p), iterations, fixed


def _bgg_model_name(fixed):
    return "BEG" if fixed.get("alpha") == 1.0 else BGG


def bgg_fit(data, opts=None, fixed_alpha=None):
    """MLE in (beta, alpha, p); ``fixed_alpha=1`` gives the BEG fit."""
    opts = opts or DEFAULT_OPTIONS
    fixed_alpha = fixed_alpha if fixed_alpha is not None else opts.fixed_alpha
    theta, iterations, fixed = _fit_bgg_core(data, opts, fixed_alpha)
    if opts.information == "expected":
        info = bgg_fisher(theta, opts.series)
    else:
        info = -bgg_hessian(theta, data) / data.size
    loglik = bgg_loglik(theta, data)
    return _make_report(_bgg_model_name(fixed), RATE, ("beta", "alpha", "p"), theta.as_tuple(), info, fixed, data, loglik, iterations, opts)


def bgg_fit_ortho(data, opts=None, fixed_alpha=None):
    """MLE in (mu, alpha, p) with mu = alpha / beta."""
    opts = opts or DEFAULT_OPTIONS
    fixed_alpha = fixed_alpha if fixed_alpha is not None else opts.fixed_alpha
    theta, iterations, fixed = _fit_bgg_core(data, opts, fixed_alpha)
    theta_star = BggParamsOrtho(data.x_bar / data.n_bar, theta.alpha, theta.p)
    if opts.information == "expected":
        info = bgg_fisher_ortho(theta_star, opts.series)
    else:
        info = -bgg_hessian_ortho(theta_star, data) / data.size
    loglik = bgg_loglik(theta, data)
    return _make_report(_bgg_model_name(fixed), ORTHO, ("mu", "alpha", "p"), theta_star.as_tuple(), info, fixed, data, loglik, iterations, opts)


# --- BMIXGNB ---

def bmixgnb_loglik(theta, data):
    _require_kind(data, BMIXGNB)
    return float(np.sum(joint_pdf_ym(theta, data.xs, data.ns, log_scale=True)))


def bmixgnb_score(theta, data):
    _require_kind(data, BMIXGNB)
    beta, alpha, p, tau = theta.as_tuple()
    n, ms, log_x = data.size, data.ns.astype(float), np.log(data.xs)
    k = tau + ms
    psi_k = sc.psi(alpha * k)
    return np.array([
        n * alpha * (tau + data.n_bar) / beta - n * data.x_bar,
        np.sum(k * (math.log(beta) + log_x - psi_k)),
        n * tau / p - n * data.n_bar / (1.0 - p),
        np.sum(sc.psi(ms + tau)) - n * sc.psi(tau) + n * math.log(p) + np.sum(alpha * (math.log(beta) + log_x - psi_k)),
    ])


def bmixgnb_hessian(theta, data, per_observation=False):
    _require_kind(data, BMIXGNB)
    beta, alpha, p, tau = theta.as_tuple()
    ms, log_x = data.ns.astype(float), np.log(data.xs)
    k = tau + ms
    psi_k = sc.psi(alpha * k)
    tri_k = sc.polygamma(1, alpha * k)
    h = np.zeros((data.size, 4, 4))
    h[:, 0, 0] = -alpha * k / beta ** 2
    h[:, 0, 1] = h[:, 1, 0] = k / beta
    h[:, 0, 3] = h[:, 3, 0] = alpha / beta
    h[:, 1, 1] = -k ** 2 * tri_k
    h[:, 1, 3] = h[:, 3, 1] = math.log(beta) + log_x - psi_k - alpha * k * tri_k
    h[:, 2, 2] = -tau / p ** 2 - ms / (1.0 - p) ** 2
    h[:, 2, 3] = h[:, 3, 2] = 1.0 / p
    h[:, 3, 3] = sc.polygamma(1, ms + tau) - sc.polygamma(1, tau) - alpha ** 2 * tri_k
    return h if per_observation else h.sum(axis=0)


def bmixgnb_hessian_ortho(theta, data, per_observation=False):
    """Observed Hessian in (mu, alpha, p, tau)."""
    h = bmixgnb_hessian(theta, data, per_observation=True)
    score_beta = theta.alpha * (theta.r + data.ns) / theta.beta - data.xs
    out = _ortho_hessian(h, score_beta, theta.mu, theta.alpha)
    return out if per_observation else out.sum(axis=0)


def _nb_expectation(theta, fn, ctl):
    """E fn(M) for M ~ NB(tau, p) and positive fn."""
    log_norm = _log_nb_norm(theta)

    def terms():
        for m, log_w in enumerate(_log_nb_weights(theta)):
            yield log_norm + log_w + math.log(fn(m))

    return math.exp(log_sum_series(terms(), ctl))


def bmixgnb_fisher(theta, ctl=DEFAULT_CONTROL):
    """Per-observation information in (beta, alpha, p, tau)."""
    beta, alpha, p, tau = theta.as_tuple()

    def tri(m):
        return float(sc.polygamma(1, alpha * (tau + m)))

    k_aa = _nb_expectation(theta, lambda m: (tau + m) ** 2 * tri(m), ctl)
    k_at = alpha * _nb_expectation(theta, lambda m: (tau + m) * tri(m), ctl)
    k_tt = (
        float(sc.polygamma(1, tau))
        + alpha ** 2 * _nb_expectation(theta, tri, ctl)
        - _nb_expectation(theta, lambda m: float(sc.polygamma(1, tau + m)), ctl)
    )
    info = np.array([
        [alpha * tau / (beta ** 2 * p), -tau / (p * beta), 0.0, -alpha / beta],
        [-tau / (p * beta), k_aa, 0.0, k_at],
        [0.0, 0.0, tau / (p ** 2 * (1.0 - p)), -1.0 / p],
        [-alpha / beta, k_at, -1.0 / p, k_tt],
    ])
    return info


def bmixgnb_fisher_ortho(theta, ctl=DEFAULT_CONTROL):
    """Per-observation information in (mu, alpha, p, tau)."""
    full = bmixgnb_fisher(theta, ctl)
    _, alpha, p, tau = theta.as_tuple()
    mu = theta.mu
    info = full.copy()
    info[0, :] = info[:, 0] = 0.0
    info[0, 0] = alpha * tau / (mu ** 2 * p)
    info[0, 3] = info[3, 0] = alpha / mu
    info[1, 1] = full[1, 1] - tau / (alpha * p)
    info[1, 3] = info[3, 1] = full[1, 3] - 1.0
    diag = np.diag(info)
    if not np.all(diag > 0):
        raise DegenerateInformationError(
            f"nonpositive diagonal in orthogonal information: {diag.tolist()}",
            point={"mu": mu, "alpha": alpha, "p": p, "tau": tau},
        )
    return info


def _profile_params(data, alpha, tau):
    s = tau + data.n_bar
    return BmixgnbParams(alpha * s / data.x_bar, alpha, tau / s, tau)


def _profile_loglik(data, theta):
    return bmixgnb_loglik(_profile_params(data, theta[0], theta[1]), data)


def _profile_derivatives(data, alpha, tau):
    """Gradient and Hessian of the loglik with beta and p profiled out."""
    n, ms, log_x = data.size, data.ns.astype(float), np.log(data.xs)
    s = tau + data.n_bar
    big_l = math.log(alpha * s / data.x_bar)
    k = tau + ms
    psi_k = sc.psi(alpha * k)
    tri_k = sc.polygamma(1, alpha * k)
    grad = np.array([
        n * s * big_l + np.sum(k * log_x) - np.sum(k * psi_k),
        n * alpha * big_l - n * sc.psi(tau) + n * math.log(tau / s) + np.sum(sc.psi(ms + tau)) + alpha * np.sum(log_x - psi_k),
    ])
    h_at = n * big_l + n + np.sum(log_x - psi_k) - alpha * np.sum(k * tri_k)
    hess = np.array([
        [n * s / alpha - np.sum(k ** 2 * tri_k), h_at],
        [h_at, n * alpha / s - n * sc.polygamma(1, tau) + n / tau - n / s + np.sum(sc.polygamma(1, ms + tau)) - alpha ** 2 * np.sum(tri_k)],
    ])
    return grad, hess


def _maximize_profile(data, start, free, opts):
    theta = np.array(start, dtype=float)
    value = _profile_loglik(data, theta)
    if not free:
        return theta, 0
    stall_tol = STALL_SCORE_TOL * data.size
    for it in range(1, opts.max_iter + 1):
        grad, hess = _profile_derivatives(data, *theta)
        g = grad[free]
        if np.max(np.abs(g)) <= opts.tol * data.size:
            return theta, it
        h = hess[np.ix_(free, free)]
        try:
            np.linalg.cholesky(-h)
            step = np.linalg.solve(-h, g)
        except np.linalg.LinAlgError:
            # not concave here: scaled ascent step
            step = 0.5 * theta[free] * g / np.max(np.abs(g))
        slope = float(g @ step)
        t = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            trial = theta.copy()
            trial[free] += t * step
            if np.all(trial > 0):
                trial_value = _profile_loglik(data, trial)
                if np.isfinite(trial_value) and trial_value >= value + ARMIJO * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if np.max(np.abs(g)) <= stall_tol:
                return theta, it
            raise NonConvergenceError(
                "line search failed on the profile likelihood",
                partial=dict(zip(("alpha", "tau"), theta.tolist())),
                iterations=it,
                diagnostics={"score": g.tolist()},
            )
        moved = np.max(np.abs(trial - theta) / theta)
        theta, value = trial, trial_value
        if moved < STEP_TOL:
            grad, _ = _profile_derivatives(data, *theta)
            if np.max(np.abs(grad[free])) <= stall_tol:
                return theta, it
    raise NonConvergenceError(
        f"profile Newton did not converge in {opts.max_iter} iterations",
        partial=dict(zip(("alpha", "tau"), theta.tolist())),
        iterations=opts.max_iter,
    )


def _moment_start(data):
    ms = data.ns.astype(float)
    m_bar, m_var = ms.mean(), ms.var()
    tau = m_bar ** 2 / (m_var - m_bar) if m_var > m_bar else 10.0
    k = tau + ms
    mu = data.xs.sum() / k.sum()
    resid = np.mean((data.xs - mu * k) ** 2 / k)
    alpha = mu ** 2 / resid if resid > 0 else 1.0
    start = (alpha, tau)
    if not all(math.isfinite(v) and v > 0 for v in start):
        start = (1.0, 1.0)
    return start


def bmixgnb_fit(data, opts=None, fixed_alpha=None, fixed_tau=None, parametrization=RATE):
    """MLE of BMixGNB(beta, alpha, p, tau).

    ``fixed_tau=1`` is the BGG model on counts shifted up by one,
    ``fixed_alpha=1`` the BGNB model and both together the BEG model.
    """
    opts = opts or DEFAULT_OPTIONS
    _require_kind(data, BMIXGNB)
    if parametrization not in (RATE, ORTHO):
        raise DomainError(f"parametrization must be 'rate' or 'ortho', got {parametrization!r}")
    if data.size < 2:
        raise DomainError(f"need at least two observations, got {data.size}")
    if data.n_bar == 0.0:
        raise DegenerateDataError("all counts are zero: p-hat = 1 is on the boundary")
    fixed_alpha = fixed_alpha if fixed_alpha is not None else opts.fixed_alpha
    fixed_tau = fixed_tau if fixed_tau is not None else opts.fixed_tau
    fixed = {}
    if fixed_alpha is not None:
        fixed["alpha"] = require_positive("fixed_alpha", fixed_alpha)
    if fixed_tau is not None:
        fixed["tau"] = require_positive("fixed_tau", fixed_tau)
    free = [i for i, name in enumerate(("alpha", "tau")) if name not in fixed]

    moment = _moment_start(data)
    starts = [moment] + [(a, t) for a in START_GRID for t in START_GRID]
    failures = []
    for alpha0, tau0 in starts:
        start = (fixed.get("alpha", alpha0), fixed.get("tau", tau0))
        try:
            (alpha, tau), iterations = _maximize_profile(data, start, free, opts)
            break
        except NonConvergenceError as exc:
            failures.append({"start": start, "reason": str(exc)})
    else:
        raise NonConvergenceError(
            "profile Newton failed from every starting point",
            partial=None,
            iterations=len(failures),
            diagnostics={"attempts": failures},
        )

    theta = _profile_params(data, alpha, tau)
    loglik = bmixgnb_loglik(theta, data)
    if parametrization == RATE:
        names, values = ("beta", "alpha", "p", "tau"), theta.as_tuple()
        if opts.information == "expected":
            info = bmixgnb_fisher(theta, opts.series)
        else:
            info = -bmixgnb_hessian(theta, data) / data.size
    else:
        names, values = ("mu", "alpha", "p", "tau"), (theta.mu, theta.alpha, theta.p, theta.r)
        if opts.information == "expected":
            info = bmixgnb_fisher_ortho(theta, opts.series)
        else:
            info = -bmixgnb_hessian_ortho(theta, data) / data.size
    return _make_report(BMIXGNB, parametrization, names, values, info, fixed, data, loglik, iterations, opts)


# --- TESTS ---

def wald_test(report, component, null_value):
    if not report.converged:
        raise PreconditionError("Wald test needs a converged fit")
    if component not in report.std_errors:
        raise DomainError(f"no standard error for {component!r}; available: {sorted(report.std_errors)}")
    stat = ((report.estimates[component] - null_value) / report.std_errors[component]) ** 2
    return TestResult(statistic=float(stat), p_value=float(stats.chi2.sf(stat, 1)), df_or_n=1)


def lr_test(loglik_full, loglik_restricted, df=1):
    if int(df) != df or df < 1:
        raise DomainError(f"df must be a positive integer, got {df}")
    stat = 2.0 * (loglik_full - loglik_restricted)
    if stat < 0.0:
        if stat < -1e-8 * (1.0 + abs(loglik_full)):
            raise DomainError(f"restricted loglik {loglik_restricted} exceeds full loglik {loglik_full}")
        stat = 0.0
    return TestResult(statistic=float(stat), p_value=float(stats.chi2.sf(stat, df)), df_or_n=int(df))
