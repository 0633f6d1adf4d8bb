"""Goodness of fit: empirical distributions, KS, Pearson chi-square, QQ points."""
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special as sc
from scipy import stats

from .bgg import duration_probabilities
from .errors import DegenerateCellError, DomainError, OracleError

# --- CONFIG ---
PROB_SUM_TOL = 1e-9
MIN_EXPECTED = 1e-12
ORACLE_SLACK = 1e-12
DEFAULT_DURATION_CELLS = 7


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    p_value: float
    df_or_n: float

    def __iter__(self):
        # unpacks as (statistic, p_value)
        yield self.statistic
        yield self.p_value

    def to_dict(self):
        return {"statistic": self.statistic, "p_value": self.p_value, "df_or_n": self.df_or_n}


def _sample(values, name="sample"):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def _kolmogorov_sf(lam):
    return float(min(1.0, max(0.0, stats.kstwobign.sf(lam))))


# --- EMPIRICAL ---

def empirical_cdf(sample):
    """Right-continuous step function with jumps of 1/n at the order statistics."""
    return stats.ecdf(_sample(sample)).cdf.evaluate


def empirical_survival(sample):
    return stats.ecdf(_sample(sample)).sf.evaluate


# --- KOLMOGOROV-SMIRNOV ---

def _evaluate_cdf(cdf, xs):
    try:
        values = np.asarray(cdf(xs), dtype=float)
        if values.shape != xs.shape:
            raise ValueError
    except (TypeError, ValueError):
        values = np.array([float(cdf(float(v))) for v in xs])
    return values


def ks_one_sample(sample, cdf):
    """D = sup |F_n - F| at the order statistics; plain asymptotic Kolmogorov p-value."""
    xs = np.sort(_sample(sample))
    n = xs.size
    f = _evaluate_cdf(cdf, xs)
    if not np.all(np.isfinite(f)) or np.any(f < -ORACLE_SLACK) or np.any(f > 1.0 + ORACLE_SLACK):
        raise OracleError("cdf returned values outside [0, 1]")
    if np.any(np.diff(f) < -ORACLE_SLACK):
        raise OracleError("cdf decreases on the sample points")
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n), 0.0))
    return TestResult(statistic=d, p_value=_kolmogorov_sf(math.sqrt(n) * d), df_or_n=n)


def ks_two_sample(a, b):
    a = np.sort(_sample(a, "a"))
    b = np.sort(_sample(b, "b"))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return TestResult(statistic=d, p_value=_kolmogorov_sf(math.sqrt(n_eff) * d), df_or_n=n_eff)


# --- CHI-SQUARE ---

def chi_square_survival(x, df):
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x}")
    if int(df) != df or df < 1:
        raise DomainError(f"df must be a positive integer, got {df}")
    return float(sc.gammaincc(df / 2.0, x / 2.0))


def pearson_chi_square(observed_counts, expected_probs, df_adjust=0):
    observed = np.asarray(observed_counts, dtype=float).ravel()
    probs = np.asarray(expected_probs, dtype=float).ravel()
    if observed.size != probs.size:
        raise DomainError(f"{observed.size} counts but {probs.size} probabilities")
    if np.any(observed < 0) or not np.all(observed == np.round(observed)):
        raise DomainError("observed counts must be nonnegative integers")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_SUM_TOL:
        raise DomainError(f"expected probabilities must be >= 0 and sum to 1, got sum {probs.sum()!r}")
    df = observed.size - 1 - df_adjust
    if df < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {df}")
    expected = observed.sum() * probs
    empty = np.flatnonzero(expected < MIN_EXPECTED)
    if empty.size:
        raise DegenerateCellError(f"cells {empty.tolist()} have expected count < {MIN_EXPECTED}; merge them with neighbours")
    stat = float(np.sum((observed - expected) ** 2 / expected))
    return TestResult(statistic=stat, p_value=chi_square_survival(stat, df), df_or_n=df)


# --- QQ ---

def qq_points(sample, reference):
    """Quantile pairs at plotting positions k/(n+1).

    ``x`` holds the reference quantiles (an array, or a quantile function
    called on the positions) and ``y`` the sample quantiles.
    """
    ys = _sample(sample)
    n = ys.size
    positions = np.arange(1, n + 1) / (n + 1.0)
    if callable(reference):
        xs = np.asarray(reference(positions), dtype=float)
    else:
        xs = np.quantile(_sample(reference, "reference"), positions)
    return pd.DataFrame({"x": xs, "y": np.quantile(ys, positions)})


# --- DURATIONS ---

def duration_table(ns, p_hat, cells=DEFAULT_DURATION_CELLS):
    """Observed and fitted geometric duration frequencies, last cell open."""
    ns = np.asarray(ns)
    if ns.size == 0:
        raise DomainError("no durations")
    capped = np.minimum(ns.astype(np.int64), cells)
    absolute = np.bincount(capped, minlength=cells + 1)[1:]
    labels = [str(k) for k in range(1, cells)] + [f">={cells}"]
    return pd.DataFrame({
        "duration": labels,
        "absolute": absolute,
        "relative": absolute / ns.size,
        "fitted": duration_probabilities(p_hat, cells),
    })
