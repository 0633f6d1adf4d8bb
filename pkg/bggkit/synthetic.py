"""BGG-structured return and rate series for running the analysis without real data.

Positive runs have Geom(p) lengths and Gamma(alpha, beta) daily values; every
run is closed by a single negative return.
"""
import math

import numpy as np
import pandas as pd

from .errors import DomainError
from .pipeline import RateSeries
from .sample import RandomStream

# --- CONFIG ---
START_DATE = "2000-01-03"
START_RATE = 1.0
RATE_CSV_FORMAT = "%.17g"


def synthetic_returns(params, n_pairs, rng):
    """Returns (returns, xs, ns); xs[i] is the exact float sum of run i."""
    if int(n_pairs) != n_pairs or n_pairs < 1:
        raise DomainError(f"n_pairs must be a positive integer, got {n_pairs}")
    gen = rng.gen
    scale = 1.0 / params.beta
    ns = gen.geometric(params.p, int(n_pairs))
    returns = []
    xs = np.empty(ns.size)
    for i, length in enumerate(ns):
        run = gen.gamma(params.alpha, scale, int(length))
        returns.extend(run.tolist())
        xs[i] = math.fsum(run)
        returns.append(-gen.gamma(params.alpha, scale))
    return np.array(returns), xs, ns


def synthetic_rate_series(params, n_pairs, rng, start_rate=START_RATE, start_date=START_DATE):
    returns, _, _ = synthetic_returns(params, n_pairs, rng)
    log_levels = np.concatenate([[0.0], np.cumsum(returns)])
    dates = pd.bdate_range(start=start_date, periods=log_levels.size)
    return RateSeries(dates=dates.to_numpy(), rates=start_rate * np.exp(log_levels))


def config_rate_series(config, seed=None):
    """Synthetic series sized and seeded by an AnalysisConfig; ``seed`` overrides ``config.seed``."""
    rng = RandomStream(config.seed if seed is None else seed)
    return synthetic_rate_series(config.synthetic_params(), config.synthetic_pairs, rng)


def write_rates_csv(series, path):
    frame = pd.DataFrame({"date": pd.DatetimeIndex(series.dates).strftime("%Y-%m-%d"), "rate": series.rates})
    frame.to_csv(path, index=False, float_format=RATE_CSV_FORMAT)
    return path
