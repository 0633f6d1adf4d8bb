"""Exchange-rate pipeline: rates -> log-returns -> positive runs -> fits, tests and tables.

``run_full_analysis`` writes every table of the application into one output
folder and a ``manifest.json`` listing what was written and what failed.
"""
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
import toml
from scipy import stats

from .bgg import BggParams, correlation, marginal_pdf_x, marginal_survival_x
from .errors import BggError, DomainError, ParseError, ValidationError
from .gof import duration_table, ks_one_sample, ks_two_sample, pearson_chi_square, qq_points
from .infer import PairSample, SolverOptions, bgg_fit, bgg_fit_ortho, lr_test, wald_test

# --- CONFIG ---
DATE_COLUMN = "date"
RATE_COLUMN = "rate"
CSV_FORMAT = "%.17g"
CSV_FLOAT_PRECISION = "round_trip"
CAVEATS = (
    "a positive run still open at the end of the series is counted as a complete pair",
    "zero log-returns end a run and are not counted as positive",
    "weekends and holidays are not treated specially; only row order matters",
)


# --- TYPES ---

@dataclass
class RateSeries:
    dates: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[ns]")
        self.rates = np.asarray(self.rates, dtype=float)
        if self.dates.size != self.rates.size:
            raise ValidationError(f"{self.dates.size} dates but {self.rates.size} rates")
        bad = np.flatnonzero(~(self.rates > 0))
        if bad.size:
            raise ValidationError(f"rates must be > 0; offending rows {bad[:10].tolist()}", rows=bad.tolist())
        unsorted = np.flatnonzero(np.diff(self.dates) <= np.timedelta64(0, "ns")) + 1
        if unsorted.size:
            raise ValidationError(f"dates must be strictly increasing; offending rows {unsorted[:10].tolist()}", rows=unsorted.tolist())

    def __len__(self):
        return int(self.rates.size)


@dataclass
class RunExtraction:
    pairs: PairSample
    one_day_positive: np.ndarray
    n_returns: int = 0
    n_nonpositive: int = 0

    @property
    def empty(self):
        return self.pairs is None


@dataclass
class StabilityResult:
    test: object
    qq: pd.DataFrame
    slope: float


@dataclass
class AnalysisConfig:
    confidence: float = 0.95
    hist_bins: int = 30
    max_duration_cell: int = 7
    conditional_durations: int = 5
    seed: int = 2011
    synthetic_pairs: int = 549
    synthetic_mu: float = 0.0082
    synthetic_alpha: float = 0.8805
    synthetic_p: float = 0.5093

    @classmethod
    def from_toml(cls, path):
        """Read the ``[analysis]`` table of a TOML file; unknown keys are rejected."""
        try:
            section = toml.load(path).get("analysis", {})
        except toml.TomlDecodeError as exc:
            raise ParseError(f"bad TOML in {path}: {exc}")
        unknown = sorted(set(section) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValidationError(f"unknown analysis settings: {unknown}")
        return cls(**section)

    def synthetic_params(self):
        return BggParams(self.synthetic_alpha / self.synthetic_mu, self.synthetic_alpha, self.synthetic_p)


@dataclass
class AnalysisBundle:
    outdir: str
    artifacts: dict = field(default_factory=dict)
    failed_stages: list = field(default_factory=list)
    caveats: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.failed_stages


# --- INGEST ---

def load_rates_csv(path, date_column=DATE_COLUMN, rate_column=RATE_COLUMN, date_format=None):
    """Read a ``date,rate`` CSV; line numbers in errors count the header as line 1."""
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot parse {path}: {exc}")
    missing = [c for c in (date_column, rate_column) if c not in frame.columns]
    if missing:
        raise ParseError(f"{path}: missing columns {missing}, found {list(frame.columns)}", lines=[1])
    line_numbers = frame.index.to_numpy() + 2
    dates = pd.to_datetime(frame[date_column], format=date_format, errors="coerce")
    rates = pd.to_numeric(frame[rate_column], errors="coerce")
    broken = line_numbers[(dates.isna() | rates.isna()).to_numpy()]
    if broken.size:
        raise ParseError(f"{path}: unreadable date or rate on lines {broken[:10].tolist()}", lines=broken.tolist())
    nonpositive = line_numbers[(rates <= 0).to_numpy()]
    if nonpositive.size:
        raise ValidationError(f"{path}: non-positive rate on lines {nonpositive[:10].tolist()}", rows=nonpositive.tolist())
    unsorted = line_numbers[1:][(np.diff(dates.to_numpy()) <= np.timedelta64(0, "ns"))]
    if unsorted.size:
        raise ValidationError(f"{path}: dates not strictly increasing at lines {unsorted[:10].tolist()}", rows=unsorted.tolist())
    return RateSeries(dates=dates.to_numpy(), rates=rates.to_numpy(dtype=float))


def log_returns(series):
    if len(series) < 2:
        raise DomainError(f"need at least two rates, got {len(series)}")
    rates = series.rates
    return np.log(rates[1:] / rates[:-1])


def extract_positive_runs(returns):
    """Maximal runs of strictly positive returns become (sum, length) pairs."""
    returns = np.asarray(returns, dtype=float).ravel()
    if returns.size == 0:
        raise DomainError("no returns to extract from")
    xs, ns = [], []
    run = []
    for r in returns:
        if r > 0:
            run.append(r)
        elif run:
            xs.append(math.fsum(run))
            ns.append(len(run))
            run = []
    if run:
        xs.append(math.fsum(run))
        ns.append(len(run))
    positive = returns[returns > 0]
    pairs = PairSample.from_arrays(xs, ns) if xs else None
    return RunExtraction(
        pairs=pairs,
        one_day_positive=positive,
        n_returns=int(returns.size),
        n_nonpositive=int(returns.size - positive.size),
    )


def stability_check(extraction, p_hat):
    """KS of the run magnitudes against daily positives scaled by 1/p_hat, plus QQ points."""
    if extraction.empty or extraction.one_day_positive.size == 0:
        raise DomainError("stability check needs pairs and positive daily returns")
    if not 0 < p_hat < 1:
        raise DomainError(f"p_hat must lie in (0, 1), got {p_hat}")
    scaled = extraction.one_day_positive / p_hat
    test = ks_two_sample(extraction.pairs.xs, scaled)
    qq = qq_points(extraction.pairs.xs, extraction.one_day_positive)
    return StabilityResult(test=test, qq=qq, slope=1.0 / p_hat)


def write_pairs_csv(pairs, path):
    frame = pd.DataFrame({"x": pairs.xs, "n": pairs.ns})
    frame.to_csv(path, index=False, float_format=CSV_FORMAT)
    return path


def load_pairs_csv(path, model_kind="BGG"):
    try:
        frame = pd.read_csv(path, float_precision=CSV_FLOAT_PRECISION)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"cannot parse {path}: {exc}")
    if not {"x", "n"} <= set(frame.columns):
        raise ParseError(f"{path}: expected columns x,n, found {list(frame.columns)}", lines=[1])
    return PairSample.from_arrays(frame["x"].to_numpy(), frame["n"].to_numpy(), model_kind=model_kind)


# --- ANALYSIS TABLES ---

def _density_table(pairs, rate_params, beg_params, bins):
    counts, edges = np.histogram(pairs.xs, bins=bins, density=True)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return pd.DataFrame({
        "bin_left": edges[:-1],
        "bin_right": edges[1:],
        "midpoint": mids,
        "empirical_density": counts,
        "bgg_density": marginal_pdf_x(rate_params, mids),
        "beg_density": marginal_pdf_x(beg_params, mids),
    })


def _survival_table(pairs, rate_params, beg_params):
    xs = np.sort(pairs.xs)
    n = xs.size
    return pd.DataFrame({
        "x": xs,
        "empirical_survival": 1.0 - np.arange(1, n + 1) / n,
        "bgg_survival": marginal_survival_x(rate_params, xs),
        "beg_survival": np.exp(-beg_params.p * beg_params.beta * xs),
    })


def _conditional_ks_table(pairs, rate_params, beg_params, durations):
    rows = []
    for k in range(1, durations + 1):
        subset = pairs.xs[pairs.ns == k]
        row = {"duration": k, "count": int(subset.size)}
        if subset.size:
            for label, params in (("bgg", rate_params), ("beg", beg_params)):
                law = stats.gamma(a=k * params.alpha, scale=1.0 / params.beta)
                result = ks_one_sample(subset, law.cdf)
                row[f"{label}_statistic"] = result.statistic
                row[f"{label}_p_value"] = result.p_value
        rows.append(row)
    return pd.DataFrame(rows)


def _daily_gamma(extraction):
    shape, _, scale = stats.gamma.fit(extraction.one_day_positive, floc=0)
    result = ks_one_sample(extraction.one_day_positive, stats.gamma(a=shape, scale=scale).cdf)
    return {"alpha": float(shape), "beta": float(1.0 / scale), "ks": result.to_dict()}


class _Stages:
    """Runs named stages, recording failures instead of stopping."""

    def __init__(self, bundle):
        self.bundle = bundle
        self.results = {}

    def run(self, name, fn, needs=()):
        missing = [dep for dep in needs if dep not in self.results]
        if missing:
            self.bundle.failed_stages.append({"stage": name, "error": f"skipped: needs {missing}"})
            return None
        try:
            result = fn()
        except BggError as exc:
            self.bundle.failed_stages.append({"stage": name, "error": f"{type(exc).__name__}: {exc}"})
            return None
        self.results[name] = result
        return result


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
    return path


def run_full_analysis(source, outdir, config=None):
    """Fit, test and tabulate; ``source`` is a RateSeries or a RunExtraction."""
    config = config or AnalysisConfig()
    bundle = AnalysisBundle(outdir=str(outdir), caveats=list(CAVEATS))

    if isinstance(source, RateSeries):
        extraction = extract_positive_runs(log_returns(source))
    else:
        extraction = source
    if extraction.empty:
        bundle.failed_stages.append({"stage": "extract", "error": "no positive runs in the input"})
        return bundle

    os.makedirs(outdir, exist_ok=True)
    pairs = extraction.pairs
    stages = _Stages(bundle)

    def out(name):
        path = os.path.join(outdir, name)
        bundle.artifacts[name] = path
        return path

    opts = SolverOptions(confidence=config.confidence)
    rate = stages.run("fit_bgg_rate", lambda: bgg_fit(pairs, opts))
    ortho = stages.run("fit_bgg_ortho", lambda: bgg_fit_ortho(pairs, opts))
    beg = stages.run("fit_beg", lambda: bgg_fit(pairs, opts, fixed_alpha=1.0))
    for name, report in (("fit_bgg_rate", rate), ("fit_bgg_ortho", ortho), ("fit_beg", beg)):
        if report is not None:
            _write_json(out(f"{name}.json"), report.to_dict())

    tests = {}
    lr = stages.run("lr_alpha_one", lambda: lr_test(rate.loglik, beg.loglik, 1), needs=("fit_bgg_rate", "fit_beg"))
    if lr is not None:
        tests["lr_alpha_one"] = lr.to_dict()
    wald = stages.run("wald_alpha_one", lambda: wald_test(rate, "alpha", 1.0), needs=("fit_bgg_rate",))
    if wald is not None:
        tests["wald_alpha_one"] = wald.to_dict()

    cells = config.max_duration_cell
    table = stages.run("duration_table", lambda: duration_table(pairs.ns, rate.estimates["p"], cells), needs=("fit_bgg_rate",))
    if table is not None:
        table.to_csv(out("duration_table.csv"), index=False, float_format=CSV_FORMAT)
        chi2 = stages.run(
            "chi_square_durations",
            lambda: pearson_chi_square(table["absolute"].to_numpy(), table["fitted"].to_numpy(), df_adjust=1),
        )
        if chi2 is not None:
            tests["chi_square_durations"] = chi2.to_dict()

    stability = stages.run("stability", lambda: stability_check(extraction, rate.estimates["p"]), needs=("fit_bgg_rate",))
    if stability is not None:
        stability.qq.to_csv(out("stability_qq.csv"), index=False, float_format=CSV_FORMAT)
        tests["stability_ks"] = stability.test.to_dict()
        tests["stability_slope"] = stability.slope

    if rate is not None:
        empirical = float(np.corrcoef(pairs.xs, pairs.ns)[0, 1]) if pairs.size > 1 else float("nan")
        tests["correlation"] = {"empirical": empirical, "bgg": correlation(rate.params()), "beg": math.sqrt(1.0 - rate.estimates["p"])}

    daily = stages.run("daily_gamma", lambda: _daily_gamma(extraction))
    if daily is not None:
        tests["daily_gamma"] = daily

    if rate is not None and beg is not None:
        rate_params, beg_params = rate.params(), beg.params()
        density = stages.run("marginal_x_density", lambda: _density_table(pairs, rate_params, beg_params, config.hist_bins))
        if density is not None:
            density.to_csv(out("marginal_x_density.csv"), index=False, float_format=CSV_FORMAT)
        survival = stages.run("survival_x", lambda: _survival_table(pairs, rate_params, beg_params))
        if survival is not None:
            survival.to_csv(out("survival_x.csv"), index=False, float_format=CSV_FORMAT)
        conditional = stages.run(
            "conditional_ks",
            lambda: _conditional_ks_table(pairs, rate_params, beg_params, config.conditional_durations),
        )
        if conditional is not None:
            conditional.to_csv(out("conditional_ks.csv"), index=False, float_format=CSV_FORMAT)

    _write_json(out("tests.json"), tests)
    bundle.summary = {
        "n_returns": extraction.n_returns,
        "n_pairs": pairs.size,
        "n_positive_days": int(extraction.one_day_positive.size),
        "magnitude_total": math.fsum(pairs.xs),
        "positive_total": math.fsum(extraction.one_day_positive),
    }
    manifest_path = out("manifest.json")
    _write_json(manifest_path, {
        "artifacts": bundle.artifacts,
        "failed_stages": bundle.failed_stages,
        "caveats": bundle.caveats,
        "summary": bundle.summary,
        "config": asdict(config),
    })
    return bundle
