"""Random variates for every law, built from the stochastic representations.

Each BGG construction (geometric sum, compound Poisson, geometric sum of BGG
copies) is kept as its own sampler so they can be checked against each other.
All samplers take ``size`` and return numpy arrays; ``size=None`` gives
scalars.
"""
import math

import numpy as np
import pandas as pd

from .bgg import require_interior, require_positive
from .bmixgnb import compose_time_change
from .errors import DomainError

# --- CONFIG ---
SAMPLE_CSV_FORMAT = "%.17g"
MAX_SEED = 2 ** 64


class RandomStream:
    """Seeded generator; the same (seed, stream_id) replays the same draws."""

    def __init__(self, seed, stream_id=0):
        for name, value in (("seed", seed), ("stream_id", stream_id)):
            if int(value) != value or not 0 <= value < MAX_SEED:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {value!r}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.gen = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))

    def spawn(self, stream_id):
        return RandomStream(self.seed, stream_id)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


def _flat(size):
    return 1 if size is None else int(np.prod(size))


def _shape(values, size):
    if size is None:
        return values[0].item()
    return values.reshape(size)


def _sum_by_owner(counts, values):
    """Sum consecutive blocks of `values`, block i holding counts[i] entries."""
    owners = np.repeat(np.arange(counts.size), counts)
    return np.bincount(owners, weights=values, minlength=counts.size)


# --- BUILDING BLOCKS ---

def sample_gamma(shape, rate, rng, size=None):
    require_positive("shape", shape)
    require_positive("rate", rate)
    return rng.gen.gamma(shape, 1.0 / rate, size)


def sample_geometric(p, rng, size=None):
    """Geometric on {1, 2, ...}."""
    require_interior("p", p)
    return rng.gen.geometric(p, size)


def sample_nb(r, p, rng, size=None):
    """NB(r, p) on {0, 1, ...} for real r > 0."""
    require_positive("r", r)
    require_interior("p", p)
    return rng.gen.negative_binomial(r, p, size)


def sample_poisson(lam, rng, size=None):
    require_positive("lambda", lam)
    return rng.gen.poisson(lam, size)


def sample_logarithmic(p, rng, size=None):
    """P(Z = k) = (1-p)^k / (k * (-log p)), k >= 1."""
    require_interior("p", p)
    return rng.gen.logseries(1.0 - p, size)


# --- BGG ---

def sample_bgg(params, rng, size=None, literal_sum=False):
    """N ~ Geom(p), X the sum of N iid Gamma(alpha, beta) draws.

    By default X is one Gamma(N*alpha, beta) draw; ``literal_sum`` adds the
    N summands one by one.
    """
    k = _flat(size)
    n = rng.gen.geometric(params.p, k)
    if literal_sum:
        parts = rng.gen.gamma(params.alpha, 1.0 / params.beta, int(n.sum()))
        x = _sum_by_owner(n, parts)
    else:
        x = rng.gen.gamma(params.alpha * n, 1.0 / params.beta)
    return _shape(x, size), _shape(n, size)


def sample_bgg_compound_poisson(params, rng, size=None):
    """(G, 1) plus Q iid (G_i, Z_i), Q ~ Poisson(-log p), Z_i logarithmic."""
    k = _flat(size)
    scale = 1.0 / params.beta
    base = rng.gen.gamma(params.alpha, scale, k)
    q = rng.gen.poisson(-math.log(params.p), k)
    z = rng.gen.logseries(1.0 - params.p, int(q.sum()))
    g = rng.gen.gamma(params.alpha * z, scale) if z.size else np.zeros(0)
    x = base + _sum_by_owner(q, g)
    n = 1 + _sum_by_owner(q, z.astype(float)).astype(np.int64)
    return _shape(x, size), _shape(n, size)


def sample_bgg_geometric_sum(q, inner, rng, size=None):
    """Sum of M ~ Geom(q) iid BGG(inner) pairs; the law is BGG(beta, alpha, p*q)."""
    require_interior("q", q)
    k = _flat(size)
    m = rng.gen.geometric(q, k)
    xs, ns = sample_bgg(inner, rng, int(m.sum()))
    x = _sum_by_owner(m, xs)
    n = _sum_by_owner(m, ns.astype(float)).astype(np.int64)
    return _shape(x, size), _shape(n, size)


# --- BMIXGNB ---

def sample_bmixgnb(params, rng, size=None):
    """M ~ NB(r, p), Y | M ~ Gamma(alpha*(r+M), beta)."""
    k = _flat(size)
    m = rng.gen.negative_binomial(params.r, params.p, k)
    y = rng.gen.gamma(params.alpha * (params.r + m), 1.0 / params.beta)
    return _shape(y, size), _shape(m, size)


def sample_bmixgnb_flp(params, rng, size=None):
    """NB(r) iid Gamma(alpha, beta) summands plus the drift part Gamma(r*alpha, beta)."""
    k = _flat(size)
    scale = 1.0 / params.beta
    m = rng.gen.negative_binomial(params.r, params.p, k)
    jumps = rng.gen.gamma(params.alpha, scale, int(m.sum()))
    y = rng.gen.gamma(params.r * params.alpha, scale, k) + _sum_by_owner(m, jumps)
    return _shape(y, size), _shape(m, size)


def sample_bmixgnb_compound_poisson(params, rng, size=None):
    """(G, 0) plus Q iid (G_i, Z_i), G ~ Gamma(alpha*r, beta), Q ~ Poisson(-r log p)."""
    k = _flat(size)
    scale = 1.0 / params.beta
    base = rng.gen.gamma(params.alpha * params.r, scale, k)
    q = rng.gen.poisson(-params.r * math.log(params.p), k)
    z = rng.gen.logseries(1.0 - params.p, int(q.sum()))
    g = rng.gen.gamma(params.alpha * z, scale) if z.size else np.zeros(0)
    y = base + _sum_by_owner(q, g)
    m = _sum_by_owner(q, z.astype(float)).astype(np.int64)
    return _shape(y, size), _shape(m, size)


def sample_bmixgnb_time_changed(params, q, rng, size=None):
    """Counts NB(r + T) with T ~ NB(r, q); the law is BMixGNB(beta, alpha, p*, r).

    p* is ``compose_time_change(p, q)``.
    """
    require_interior("q", q)
    compose_time_change(params.p, q)
    k = _flat(size)
    clock = rng.gen.negative_binomial(params.r, q, k)
    m = rng.gen.negative_binomial(params.r + clock, params.p)
    y = rng.gen.gamma(params.alpha * (params.r + m), 1.0 / params.beta)
    return _shape(y, size), _shape(m, size)


def write_sample_csv(path, x, n):
    frame = pd.DataFrame({"x": np.atleast_1d(x), "n": np.atleast_1d(n).astype(int)})
    frame.to_csv(path, index=False, float_format=SAMPLE_CSV_FORMAT)
    return path
