"""Special functions and the series engine behind every density and moment.

The gamma family comes from ``scipy.special``; this module adds the strict
domain checks the rest of bggkit relies on and a log-space summation engine
for the infinite gamma-mixture series.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import DomainError, NonConvergenceError

# --- CONFIG ---
DEFAULT_REL_TOL = 1e-12
DEFAULT_ABS_TOL = 1e-300
DEFAULT_MAX_TERMS = 100000
SQRT2 = math.sqrt(2.0)
INC_GAMMA_FLOOR = 1e-280


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for every infinite series in the package."""

    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be > 0, got {self.abs_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms}")

    @property
    def log_abs_tol(self):
        return math.log(self.abs_tol)

    @property
    def log_rel_tol(self):
        return math.log(self.rel_tol)


DEFAULT_CONTROL = SeriesControl()


# --- HELPERS ---

def _as_positive(name, value):
    arr = np.asarray(value, dtype=float)
    # NaN fails the comparison too
    if not np.all(arr > 0):
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return arr


def _as_nonnegative(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(arr >= 0):
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return arr


def _unwrap(arr):
    arr = np.asarray(arr)
    return float(arr) if arr.ndim == 0 else arr


# --- GAMMA FAMILY ---

def log_gamma(x):
    return _unwrap(sc.gammaln(_as_positive("x", x)))


def digamma(x):
    return _unwrap(sc.psi(_as_positive("x", x)))


def trigamma(x):
    return _unwrap(sc.polygamma(1, _as_positive("x", x)))


def reg_inc_gamma(a, x):
    """Regularized lower incomplete gamma P(a, x) = Γ_x(a)/Γ(a)."""
    a = _as_positive("a", a)
    x = _as_nonnegative("x", x)
    return _unwrap(sc.gammainc(a, x))


def log_reg_inc_gamma(a, x):
    """log P(a, x), finite where P(a, x) itself underflows.

    Below the floor P is rebuilt as x^a e^{-x} M(1, a+1, x) / Gamma(a+1).
    """
    a = _as_positive("a", a)
    x = _as_nonnegative("x", x)
    direct = sc.gammainc(a, x)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        rebuilt = a * np.log(x) - x - sc.gammaln(a + 1.0) + np.log(sc.hyp1f1(1.0, a + 1.0, x))
        return _unwrap(np.where(direct > INC_GAMMA_FLOOR, np.log(direct), rebuilt))


def log_beta(a, b):
    return _unwrap(sc.betaln(_as_positive("a", a), _as_positive("b", b)))


def erf(x, convention="stated"):
    """Error function.

    ``"stated"`` is 2/sqrt(pi) * int_0^x exp(-t^2/2) dt, which equals
    sqrt(2) * erf(x / sqrt(2)) and ranges over (-sqrt(2), sqrt(2)).
    ``"standard"`` is the usual erf with integrand exp(-t^2).
    """
    x = np.asarray(x, dtype=float)
    if convention == "stated":
        return _unwrap(SQRT2 * sc.erf(x / SQRT2))
    if convention == "standard":
        return _unwrap(sc.erf(x))
    raise DomainError(f"unknown erf convention {convention!r}")


def gamma_log_pdf(x, shape, rate):
    """log g(x; shape, rate) for the shape/rate gamma density."""
    x = _as_positive("x", x)
    shape = _as_positive("shape", shape)
    rate = _as_positive("rate", rate)
    out = shape * np.log(rate) - sc.gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x
    return _unwrap(out)


# --- SERIES ENGINE ---

def log_sum_series(log_terms, ctl=DEFAULT_CONTROL):
    """Logarithm of a series of nonnegative terms given by their logs.

    Summation stops on the first term that is smaller than its predecessor
    and below max(abs_tol, rel_tol * partial sum), so series whose terms
    rise before they decay are not cut short.
    """
    total = -math.inf
    previous = math.inf
    count = 0
    for log_term in log_terms:
        count += 1
        log_term = float(log_term)
        total = np.logaddexp(total, log_term)
        threshold = max(ctl.log_abs_tol, ctl.log_rel_tol + total)
        if log_term < previous and log_term < threshold:
            return float(total)
        if count >= ctl.max_terms:
            raise NonConvergenceError(
                f"series did not converge within {ctl.max_terms} terms",
                partial=float(np.exp(total)),
                iterations=count,
            )
        previous = log_term
    return float(total)


def sum_series(terms, ctl=DEFAULT_CONTROL):
    """Sum a series given as (log|term|, sign) pairs.

    Positive and negative parts accumulate separately in log-space; the
    result is exponentiated once at the end.
    """
    log_pos = -math.inf
    log_neg = -math.inf
    previous = math.inf
    count = 0

    def partial():
        return float(np.exp(log_pos) - np.exp(log_neg))

    for log_mag, sign in terms:
        count += 1
        log_mag = float(log_mag)
        if sign > 0:
            log_pos = np.logaddexp(log_pos, log_mag)
        elif sign < 0:
            log_neg = np.logaddexp(log_neg, log_mag)
        current = abs(partial())
        threshold = max(ctl.log_abs_tol, ctl.log_rel_tol + math.log(current)) if current > 0 else ctl.log_abs_tol
        if log_mag < previous and log_mag < threshold:
            return partial()
        if count >= ctl.max_terms:
            raise NonConvergenceError(
                f"series did not converge within {ctl.max_terms} terms",
                partial=partial(),
                iterations=count,
            )
        previous = log_mag
    return partial()
