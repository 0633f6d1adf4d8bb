"""BMixGNB(beta, alpha, p, r): the BGG Lévy motion observed at a fixed time r.

(Y, M) with M ~ NB(r, p) on {0, 1, ...} and Y | M ~ Gamma(alpha*(r+M), beta).
At r = 1 the law is BGG with the count shifted down by one.
"""
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special as sc

from .bgg import (
    BggParams,
    _count_array,
    _map_scalar,
    _positive_array,
    _single_count,
    _unwrap,
    covariance,
    log_cf_core,
    require_interior,
    require_positive,
)
from .errors import DomainError
from .special import DEFAULT_CONTROL, log_reg_inc_gamma, log_sum_series

# --- CONFIG ---
PATH_CSV_FORMAT = "%.17g"


@dataclass(frozen=True)
class BmixgnbParams:
    beta: float
    alpha: float
    p: float
    r: float

    def __post_init__(self):
        require_positive("beta", self.beta)
        require_positive("alpha", self.alpha)
        require_interior("p", self.p)
        require_positive("r", self.r)

    @property
    def tau(self):
        return self.r

    @property
    def mu(self):
        return self.alpha / self.beta

    def bgg(self):
        return BggParams(self.beta, self.alpha, self.p)

    def as_tuple(self):
        return (self.beta, self.alpha, self.p, self.r)


@dataclass
class ProcessPath:
    times: np.ndarray
    x_values: np.ndarray
    n_values: np.ndarray

    def to_frame(self):
        return pd.DataFrame({"t": self.times, "x": self.x_values, "n": self.n_values.astype(int)})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format=PATH_CSV_FORMAT)


# --- HELPERS ---

def _log_nb_weights(params, start=0):
    """log[Gamma(j+r)/j! (1-p)^j], j >= start (the NB pmf without p^r/Gamma(r))."""
    log_q = math.log1p(-params.p)
    j = start
    while True:
        yield math.lgamma(j + params.r) - math.lgamma(j + 1) + j * log_q
        j += 1


def _log_nb_norm(params):
    return params.r * math.log(params.p) - math.lgamma(params.r)


def _log_weighted_cdf(params, x, upto=None, ctl=DEFAULT_CONTROL):
    """log sum_j Gamma(j+r)/j! (1-p)^j P(alpha(r+j), beta x), j = 0..upto (or to convergence)."""
    bx = params.beta * x
    if upto is not None:
        j = np.arange(0, upto + 1, dtype=float)
        logs = (
            sc.gammaln(j + params.r)
            - sc.gammaln(j + 1.0)
            + j * math.log1p(-params.p)
            + log_reg_inc_gamma(params.alpha * (params.r + j), bx)
        )
        return float(sc.logsumexp(logs))

    first = log_reg_inc_gamma(params.alpha * params.r, bx)

    def terms():
        for j, log_w in enumerate(_log_nb_weights(params)):
            yield log_w + log_reg_inc_gamma(params.alpha * (params.r + j), bx) - first

    return first + log_sum_series(terms(), ctl)


# --- LAW ---

def nb_pmf(r, p, k):
    r = require_positive("r", r)
    p = require_interior("p", p)
    k = _count_array("k", k, 0)
    out = sc.gammaln(k + r) - sc.gammaln(k + 1.0) - math.lgamma(r) + r * math.log(p) + k * math.log1p(-p)
    return _unwrap(np.exp(out))


def joint_pdf_ym(params, y, n, log_scale=False):
    y = _positive_array("y", y)
    n = _count_array("n", n, 0)
    shape = params.alpha * (params.r + n)
    out = (
        sc.gammaln(n + params.r)
        - sc.gammaln(n + 1.0)
        + _log_nb_norm(params)
        + n * math.log1p(-params.p)
        - sc.gammaln(shape)
        + shape * math.log(params.beta)
        + (shape - 1.0) * np.log(y)
        - params.beta * y
    )
    return _unwrap(out if log_scale else np.exp(out))


def joint_cdf_ym(params, y, n):
    y = float(_positive_array("y", y))
    n = _single_count("n", n, 0)
    return math.exp(_log_nb_norm(params) + _log_weighted_cdf(params, y, upto=n))


def marginal_pdf_y(params, y, ctl=DEFAULT_CONTROL):
    """Gamma mixture with negative binomial weights."""
    _positive_array("y", y)

    def one(yv):
        log_y = math.log(yv)
        log_beta = math.log(params.beta)

        def terms():
            for j, log_w in enumerate(_log_nb_weights(params)):
                shape = params.alpha * (params.r + j)
                yield log_w + shape * log_beta - math.lgamma(shape) + (shape - 1.0) * log_y - params.beta * yv

        return math.exp(_log_nb_norm(params) + log_sum_series(terms(), ctl))

    return _map_scalar(one, y)


def marginal_cdf_y(params, y, ctl=DEFAULT_CONTROL):
    _positive_array("y", y)
    return _map_scalar(lambda yv: math.exp(_log_nb_norm(params) + _log_weighted_cdf(params, yv, ctl=ctl)), y)


def conditional_pdf_y_given_m(params, y, k):
    """Y | M = k is Gamma(alpha*(r+k), beta)."""
    k = _single_count("k", k, 0)
    y = _positive_array("y", y)
    shape = params.alpha * (params.r + k)
    out = shape * math.log(params.beta) - math.lgamma(shape) + (shape - 1.0) * np.log(y) - params.beta * y
    return _unwrap(np.exp(out))


def _log_power_series_term(params, n, log_a):
    return math.lgamma(n + params.r) - math.lgamma(n + 1) - math.lgamma(params.alpha * (n + params.r)) + n * log_a


def conditional_pmf_m_given_y(params, y, n, ctl=DEFAULT_CONTROL):
    y = float(_positive_array("y", y))
    n = _single_count("n", n, 0)
    log_a = math.log1p(-params.p) + params.alpha * math.log(params.beta * y)

    def terms():
        j = 0
        while True:
            yield _log_power_series_term(params, j, log_a)
            j += 1

    log_norm = log_sum_series(terms(), ctl)
    return math.exp(_log_power_series_term(params, n, log_a) - log_norm)


def conditional_cdf_ym_given_m_le(params, y, m, n):
    y = float(_positive_array("y", y))
    m = _single_count("m", m, 0)
    n = _single_count("n", n, 0)
    if m > n:
        raise DomainError(f"m must not exceed n, got m={m}, n={n}")
    j = np.arange(0, n + 1, dtype=float)
    log_w = sc.gammaln(j + params.r) - sc.gammaln(j + 1.0) + j * math.log1p(-params.p)
    return math.exp(_log_weighted_cdf(params, y, upto=m) - float(sc.logsumexp(log_w)))


def y_le_denominator(params, y, ctl=DEFAULT_CONTROL):
    """Full weighted series at y; independent of x, cache per y."""
    y = float(_positive_array("y", y))
    return math.exp(_log_weighted_cdf(params, y, ctl=ctl))


def conditional_cdf_ym_given_y_le(params, x, n, y, ctl=DEFAULT_CONTROL, denominator=None):
    x = float(_positive_array("x", x))
    y = float(_positive_array("y", y))
    n = _single_count("n", n, 0)
    if x > y:
        raise DomainError(f"x must not exceed y, got x={x}, y={y}")
    log_den = math.log(denominator) if denominator else _log_weighted_cdf(params, y, ctl=ctl)
    return math.exp(_log_weighted_cdf(params, x, upto=n) - log_den)


def cf_process(params, t, s):
    core = log_cf_core(params.beta, params.alpha, params.p, t, s)
    out = np.exp(params.r * core)
    return complex(out) if np.ndim(out) == 0 else out


def product_moment_ym(params, n, k, ctl=DEFAULT_CONTROL):
    """E(Y^n M^k)."""
    n = _single_count("n", n, 1)
    k = _single_count("k", k, 0)
    start = 0 if k == 0 else 1

    def terms():
        for m, log_w in enumerate(_log_nb_weights(params, start), start=start):
            log_mk = k * math.log(m) if k else 0.0
            yield log_mk + log_w - float(sc.betaln(params.alpha * (params.r + m), n))

    log_sum = log_sum_series(terms(), ctl)
    return math.exp(_log_nb_norm(params) + math.lgamma(n) - n * math.log(params.beta) + log_sum)


def covariance_ym(params):
    return covariance(params.bgg()).scaled(params.r)


def compose_time_change(p, q):
    """Parameter of NB(r + NB~(r)) when NB has p and the clock NB~ has q."""
    p = require_interior("p", p)
    q = require_interior("q", q)
    return p * q / (1.0 - p + p * q)


# --- PATHS ---

def _check_grid(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("time grid must be a non-empty one-dimensional sequence")
    if times[0] < 0 or not np.all(np.isfinite(times)):
        raise DomainError(f"time grid must start at t >= 0, got {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise DomainError("time grid must be strictly increasing")
    return times


def simulate_paths(params, times, rng, n_paths):
    """Grid values of (G(t + NB(t)), NB(t)) for n_paths independent paths.

    Only beta, alpha and p are used; the grid plays the role of r.
    Returns (x, n) arrays of shape (n_paths, len(times)).
    """
    times = _check_grid(times)
    gen = rng.gen
    steps = np.diff(times, prepend=0.0)
    dx = np.zeros((n_paths, times.size))
    dn = np.zeros((n_paths, times.size), dtype=np.int64)
    for i, step in enumerate(steps):
        if step == 0.0:
            continue
        jumps = gen.negative_binomial(step, params.p, size=n_paths)
        dn[:, i] = jumps
        dx[:, i] = gen.gamma(params.alpha * (step + jumps), 1.0 / params.beta)
    return np.cumsum(dx, axis=1), np.cumsum(dn, axis=1)


def simulate_path(params, times, rng):
    times = _check_grid(times)
    x, n = simulate_paths(params, times, rng, 1)
    return ProcessPath(times=times, x_values=x[0], n_values=n[0])
