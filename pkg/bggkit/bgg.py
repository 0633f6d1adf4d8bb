"""The bivariate gamma-geometric law BGG(beta, alpha, p).

(X, N) where N ~ Geom(p) on {1, 2, ...} and X | N is a sum of N iid
Gamma(alpha, beta) variables. Everything is evaluated in log-space and
exponentiated once at the end.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import DomainError, UnsupportedParameterError
from .special import DEFAULT_CONTROL, erf, gamma_log_pdf, log_reg_inc_gamma, log_sum_series

# --- CONFIG ---
CLOSED_FORM_ALPHAS = (0.5, 1.0, 2.0, 3.0, 4.0)


# --- PARAMETERS ---

def require_positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


def require_interior(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and 0 < value < 1):
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return float(value)


@dataclass(frozen=True)
class BggParams:
    beta: float
    alpha: float
    p: float

    def __post_init__(self):
        require_positive("beta", self.beta)
        require_positive("alpha", self.alpha)
        require_interior("p", self.p)

    def to_ortho(self):
        return BggParamsOrtho(mu=self.alpha / self.beta, alpha=self.alpha, p=self.p)

    def as_tuple(self):
        return (self.beta, self.alpha, self.p)


@dataclass(frozen=True)
class BggParamsOrtho:
    """Orthogonal parametrization with mu = alpha / beta."""

    mu: float
    alpha: float
    p: float

    def __post_init__(self):
        require_positive("mu", self.mu)
        require_positive("alpha", self.alpha)
        require_interior("p", self.p)

    def to_rate(self):
        return BggParams(beta=self.alpha / self.mu, alpha=self.alpha, p=self.p)

    def as_tuple(self):
        return (self.mu, self.alpha, self.p)


def rate_to_ortho(params):
    return params.to_ortho()


def ortho_to_rate(params):
    return params.to_rate()


@dataclass(frozen=True)
class CovarianceMatrix:
    var_x: float
    var_n: float
    cov_xn: float

    def as_array(self):
        return np.array([[self.var_x, self.cov_xn], [self.cov_xn, self.var_n]])

    def scaled(self, factor):
        return CovarianceMatrix(self.var_x * factor, self.var_n * factor, self.cov_xn * factor)


# --- HELPERS ---

def _positive_array(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return arr


def _count_array(name, value, minimum):
    arr = np.asarray(value)
    as_float = arr.astype(float)
    if not np.all(np.isfinite(as_float)) or not np.all(as_float == np.round(as_float)) or not np.all(as_float >= minimum):
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return as_float


def _single_count(name, value, minimum):
    return int(_count_array(name, value, minimum))


def _unwrap(arr):
    arr = np.asarray(arr)
    return float(arr) if arr.ndim == 0 else arr


def _map_scalar(fn, x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return fn(float(arr))
    return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def _log_mixture_weights(params, x, start=1):
    """Log terms n*log a(x) - log Gamma(n*alpha), n >= start."""
    log_a = math.log1p(-params.p) + params.alpha * math.log(params.beta * x)
    n = start
    while True:
        yield n * log_a - math.lgamma(n * params.alpha)
        n += 1


def _log_cdf_series(params, x, ctl, upto=None):
    """log of sum_{j>=1}^{upto} (1-p)^{j-1} P(j*alpha, beta*x)."""
    log_q = math.log1p(-params.p)
    bx = params.beta * x
    if upto is not None:
        j = np.arange(1, upto + 1, dtype=float)
        logs = (j - 1.0) * log_q + log_reg_inc_gamma(j * params.alpha, bx)
        return float(sc.logsumexp(logs))

    # shifted by the first term so the absolute floor cannot end a tiny sum early
    first = log_reg_inc_gamma(params.alpha, bx)

    def terms():
        j = 1
        while True:
            yield (j - 1) * log_q + log_reg_inc_gamma(j * params.alpha, bx) - first
            j += 1

    return first + log_sum_series(terms(), ctl)


# --- DENSITIES ---

def joint_pdf(params, x, n, log_scale=False):
    x = _positive_array("x", x)
    n = _count_array("n", n, 1)
    shape = n * params.alpha
    out = (
        shape * math.log(params.beta)
        - sc.gammaln(shape)
        + (shape - 1.0) * np.log(x)
        - params.beta * x
        + math.log(params.p)
        + (n - 1.0) * math.log1p(-params.p)
    )
    return _unwrap(out if log_scale else np.exp(out))


def joint_cdf(params, x, n):
    x = float(_positive_array("x", x))
    n = _single_count("n", n, 1)
    return math.exp(math.log(params.p) + _log_cdf_series(params, x, None, upto=n))


def marginal_pdf_x(params, x, ctl=DEFAULT_CONTROL, log_scale=False):
    """Infinite gamma mixture density of X."""
    _positive_array("x", x)

    def one(xv):
        log_sum = log_sum_series(_log_mixture_weights(params, xv), ctl)
        out = math.log(params.p) - math.log(xv) - params.beta * xv - math.log1p(-params.p) + log_sum
        return out if log_scale else math.exp(out)

    return _map_scalar(one, x)


def marginal_pdf_x_closed(params, x):
    """Closed forms of the X-marginal for alpha in {1/2, 1, 2, 3, 4}."""
    alpha = params.alpha
    if alpha not in CLOSED_FORM_ALPHAS:
        raise UnsupportedParameterError(f"no closed form for alpha={alpha}; supported: {CLOSED_FORM_ALPHAS}")
    x = _positive_array("x", x)
    beta, p = params.beta, params.p
    a = (1.0 - p) * (beta * x) ** alpha
    if alpha == 1.0:
        out = p * beta * np.exp(-p * beta * x)
    elif alpha == 0.5:
        # the stated erf convention disagrees with the series; the standard one matches
        bracket = a * np.exp(a * a) * (1.0 + erf(a, convention="standard")) + 1.0 / math.sqrt(math.pi)
        out = p * math.sqrt(beta) / np.sqrt(x) * np.exp(-beta * x) * bracket
    elif alpha == 2.0:
        root = math.sqrt(1.0 - p)
        out = p * beta * np.exp(-beta * x) * np.sinh(beta * x * root) / root
    elif alpha == 3.0:
        u = np.cbrt(a)
        bracket = np.exp(1.5 * u) - 2.0 * np.sin((3.0 * math.sqrt(3.0) * u + math.pi) / 6.0)
        out = p / x * np.exp(-beta * x) / (3.0 * (1.0 - p)) * u * np.exp(-u / 2.0) * bracket
    else:
        u = a ** 0.25
        out = p / x * np.exp(-beta * x) / (2.0 * (1.0 - p)) * u * (np.sinh(u) - np.sin(u))
    return _unwrap(out)


def marginal_cdf_x(params, x, ctl=DEFAULT_CONTROL):
    _positive_array("x", x)
    return _map_scalar(lambda xv: math.exp(math.log(params.p) + _log_cdf_series(params, xv, ctl)), x)


def marginal_survival_x(params, x, ctl=DEFAULT_CONTROL):
    return 1.0 - np.asarray(marginal_cdf_x(params, x, ctl))


def conditional_pdf_x_given_n(params, x, n):
    """X | N = n is Gamma(n*alpha, beta)."""
    n = _single_count("n", n, 1)
    return _unwrap(np.exp(gamma_log_pdf(x, n * params.alpha, params.beta)))


def geometric_pmf(p, n):
    require_interior("p", p)
    n = _count_array("n", n, 1)
    return _unwrap(p * np.exp((n - 1.0) * math.log1p(-p)))


def duration_probabilities(p, cells):
    """Geometric cell probabilities for 1..cells-1 and a tail cell >= cells."""
    require_interior("p", p)
    if cells < 2:
        raise DomainError(f"need at least two cells, got {cells}")
    head = np.asarray(geometric_pmf(p, np.arange(1, cells)), dtype=float)
    tail = math.exp((cells - 1) * math.log1p(-p))
    return np.append(head, tail)


# --- CONDITIONALS ---

def conditional_pmf_n_given_x(params, x, n, ctl=DEFAULT_CONTROL):
    x = float(_positive_array("x", x))
    n = _single_count("n", n, 1)
    log_norm = log_sum_series(_log_mixture_weights(params, x), ctl)
    log_a = math.log1p(-params.p) + params.alpha * math.log(params.beta * x)
    return math.exp(n * log_a - math.lgamma(n * params.alpha) - log_norm)


def conditional_cdf_given_n_le(params, x, m, n):
    x = float(_positive_array("x", x))
    m = _single_count("m", m, 1)
    n = _single_count("n", n, 1)
    if m > n:
        raise DomainError(f"m must not exceed n, got m={m}, n={n}")
    log_mass = math.log(-math.expm1(n * math.log1p(-params.p)))
    return math.exp(math.log(params.p) - log_mass + _log_cdf_series(params, x, None, upto=m))


def x_le_denominator(params, y, ctl=DEFAULT_CONTROL):
    """sum_{j>=1} (1-p)^{j-1} P(j*alpha, beta*y); independent of x, cache per y."""
    y = float(_positive_array("y", y))
    return math.exp(_log_cdf_series(params, y, ctl))


def conditional_cdf_given_x_le(params, x, n, y, ctl=DEFAULT_CONTROL, denominator=None):
    x = float(_positive_array("x", x))
    y = float(_positive_array("y", y))
    n = _single_count("n", n, 1)
    if x > y:
        raise DomainError(f"x must not exceed y, got x={x}, y={y}")
    # a cached denominator of 0.0 has underflowed; redo it in log-space
    log_den = math.log(denominator) if denominator else _log_cdf_series(params, y, ctl)
    return math.exp(_log_cdf_series(params, x, None, upto=n) - log_den)


# --- GENERATING FUNCTIONS ---

def mgf_bound(params, s):
    return params.beta * (1.0 - ((1.0 - params.p) * math.exp(s)) ** (1.0 / params.alpha))


def mgf(params, t, s):
    bound = mgf_bound(params, s)
    if not t < bound:
        raise DomainError(f"mgf needs t < {bound:.17g} at s={s}, got t={t}")
    denom = (1.0 - t / params.beta) ** params.alpha - math.exp(s) * (1.0 - params.p)
    return params.p * math.exp(s) / denom


def mgf_marginal_x(params, t):
    return mgf(params, t, 0.0)


def log_cf_core(beta, alpha, p, t, s):
    """Continuous log of p*beta^a / ((beta - i t)^a - e^{is} beta^a (1-p)).

    (1 - i t/beta) lies in the right half-plane, and the second factor is
    1 - u with |u| <= 1 - p < 1, so both principal logs are continuous.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    base = 1.0 - 1j * t / beta
    log_w = alpha * np.log(base)
    log_rest = np.log(1.0 - (1.0 - p) * np.exp(1j * s - log_w))
    return math.log(p) - log_w - log_rest


def _unwrap_complex(arr):
    arr = np.asarray(arr)
    return complex(arr) if arr.ndim == 0 else arr


def cf(params, t, s):
    s_arr = np.asarray(s, dtype=float)
    core = log_cf_core(params.beta, params.alpha, params.p, t, s_arr)
    return _unwrap_complex(np.exp(1j * s_arr + core))


def cf_power(params, t, s, r):
    """Phi(t, s)^r, the characteristic function of the r-th convolution root/power."""
    require_positive("r", r)
    s_arr = np.asarray(s, dtype=float)
    core = log_cf_core(params.beta, params.alpha, params.p, t, s_arr)
    return _unwrap_complex(np.exp(r * (1j * s_arr + core)))


# --- MOMENTS ---

def product_moment(params, m, k, ctl=DEFAULT_CONTROL):
    """E(X^m N^k)."""
    m = _single_count("m", m, 1)
    k = _single_count("k", k, 0)
    log_q = math.log1p(-params.p)

    def terms():
        n = 1
        while True:
            yield k * math.log(n) + (n - 1) * log_q - float(sc.betaln(params.alpha * n, m))
            n += 1

    log_sum = log_sum_series(terms(), ctl)
    return math.exp(math.log(params.p) + math.lgamma(m) - m * math.log(params.beta) + log_sum)


def marginal_moment_x(params, r, ctl=DEFAULT_CONTROL):
    """E(X^r) for any real r > 0."""
    r = require_positive("r", r)
    log_q = math.log1p(-params.p)

    def terms():
        n = 1
        while True:
            yield (n - 1) * log_q - float(sc.betaln(params.alpha * n, r))
            n += 1

    log_sum = log_sum_series(terms(), ctl)
    return math.exp(math.log(params.p) + math.lgamma(r) - r * math.log(params.beta) + log_sum)


def mean(params):
    return np.array([params.alpha / (params.p * params.beta), 1.0 / params.p])


def covariance(params):
    beta, alpha, p = params.as_tuple()
    return CovarianceMatrix(
        var_x=(1.0 - p) * alpha ** 2 / (p ** 2 * beta ** 2) + alpha / (beta ** 2 * p),
        var_n=(1.0 - p) / p ** 2,
        cov_xn=(1.0 - p) * alpha / (beta * p ** 2),
    )


def correlation(params):
    return math.sqrt((1.0 - params.p) / (1.0 - params.p + params.p / params.alpha))
