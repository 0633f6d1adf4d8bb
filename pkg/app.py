import functools
import json
import os
import sys
import warnings

import click
import numpy as np
import pandas as pd

from bggkit import bgg, bmixgnb, sample
from bggkit.bgg import duration_probabilities
from bggkit.errors import BggError, NonConvergenceError
from bggkit.gof import ks_one_sample, ks_two_sample, pearson_chi_square
from bggkit.infer import (
    BMIXGNB,
    FitReport,
    SolverOptions,
    bgg_fit,
    bgg_fit_ortho,
    bmixgnb_fit,
    lr_test,
    wald_test,
)
from bggkit.ledger import get_db_count, list_fits, record_fit
from bggkit.pipeline import (
    CSV_FLOAT_PRECISION,
    AnalysisConfig,
    extract_positive_runs,
    load_pairs_csv,
    load_rates_csv,
    log_returns,
    run_full_analysis,
    write_pairs_csv,
)
from bggkit.replicate import run_study, summarize
from bggkit.synthetic import config_rate_series, synthetic_rate_series, write_rates_csv

# --- SILENCE NOISE ---
warnings.filterwarnings("ignore", category=RuntimeWarning)

# --- CONFIG ---
LEDGER_FILE = "fit_ledger.db"
WORKERS = 4
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3
MODELS = ("bgg", "beg", "bmixgnb")
SAMPLE_METHODS = ("standard", "literal", "compound-poisson", "geometric-sum", "flp", "time-changed")


# --- HELPERS ---

def guarded(fn):
    """Map library errors to exit codes: 3 for non-convergence, 2 for everything else."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NonConvergenceError as exc:
            click.echo(f"❌ No convergence: {exc}", err=True)
            sys.exit(EXIT_NONCONVERGED)
        except BggError as exc:
            click.echo(f"❌ {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_INVALID)
    return wrapper


def parse_params(text):
    """'beta=1,alpha=2,p=0.5' -> {'beta': 1.0, 'alpha': 2.0, 'p': 0.5}"""
    values = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise click.BadParameter(f"expected key=value, got {part!r}")
        try:
            values[key.strip()] = float(value)
        except ValueError:
            raise click.BadParameter(f"{key.strip()} is not a number: {value!r}")
    return values


def parse_floats(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma separated numbers, got {text!r}")


def bgg_params_from(values):
    if "beta" not in values and "mu" in values and "alpha" in values:
        values = dict(values, beta=values["alpha"] / values["mu"])
    missing = [k for k in ("beta", "alpha", "p") if k not in values]
    if missing:
        raise click.BadParameter(f"missing {missing}; give beta (or mu), alpha and p")
    return bgg.BggParams(values["beta"], values["alpha"], values["p"])


def bmixgnb_params_from(values):
    base = bgg_params_from(values)
    r = values.get("r", values.get("tau"))
    if r is None:
        raise click.BadParameter("missing r (or tau)")
    return bmixgnb.BmixgnbParams(base.beta, base.alpha, base.p, r)


def print_report(report):
    click.echo(f"\n📊 {report.model} FIT ({report.parametrization}), n={report.n}, loglik={report.loglik:.6f}")
    click.echo("=" * 72)
    click.echo(f"{'PARAMETER':<12} | {'ESTIMATE':<14} | {'STD ERROR':<12} | {int(report.confidence * 100)}% INTERVAL")
    click.echo("-" * 72)
    for name, value in report.estimates.items():
        if name in report.std_errors:
            ci = f"[{report.ci_lower[name]:.6g}, {report.ci_upper[name]:.6g}]"
            click.echo(f"{name:<12} | {value:<14.6g} | {report.std_errors[name]:<12.4g} | {ci}")
        else:
            click.echo(f"{name:<12} | {value:<14.6g} | {'fixed':<12} |")
    click.echo("-" * 72)
    click.echo(f"Iterations: {report.iterations}   Information: {report.information}")


def read_column(path, column):
    frame = pd.read_csv(path, float_precision=CSV_FLOAT_PRECISION)
    if column not in frame.columns:
        raise click.BadParameter(f"{path} has no column {column!r}; found {list(frame.columns)}", param_hint="--column")
    return frame[column].to_numpy(dtype=float)


def write_json(payload, out_path):
    text = json.dumps(payload, indent=2)
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
        click.echo(f"✅ Saved: {out_path}")
    else:
        click.echo(text)


# --- CLI ---

@click.group()
def cli():
    """Bivariate gamma-geometric toolkit."""


@cli.command()
@click.option("--model", type=click.Choice(MODELS), default="bgg", show_default=True)
@click.option("--parametrization", type=click.Choice(["rate", "ortho"]), default="rate", show_default=True)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False), help="CSV with columns x,n")
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@click.option("--information", type=click.Choice(["expected", "observed"]), default="expected", show_default=True)
@click.option("--confidence", type=float, default=0.95, show_default=True)
@click.option("--fixed-alpha", type=float)
@click.option("--fixed-tau", type=float)
@click.option("--ledger", default=LEDGER_FILE, show_default=True)
@click.option("--no-ledger", is_flag=True)
@guarded
def fit(model, parametrization, input_path, out_path, information, confidence, fixed_alpha, fixed_tau, ledger, no_ledger):
    """Maximum likelihood fit of a pairs file."""
    opts = SolverOptions(confidence=confidence, information=information)
    click.echo(f"🕵️ Fitting {model.upper()} to {input_path}...")
    if model == "bmixgnb":
        data = load_pairs_csv(input_path, model_kind=BMIXGNB)
        report = bmixgnb_fit(data, opts, fixed_alpha=fixed_alpha, fixed_tau=fixed_tau, parametrization=parametrization)
    else:
        data = load_pairs_csv(input_path)
        alpha = 1.0 if model == "beg" else fixed_alpha
        fitter = bgg_fit_ortho if parametrization == "ortho" else bgg_fit
        report = fitter(data, opts, fixed_alpha=alpha)
    print_report(report)
    if not no_ledger:
        fit_id = record_fit(report, source=input_path, db_file=ledger)
        click.echo(f"📚 Ledger entry #{fit_id} ({get_db_count(ledger)} fits stored)")
    write_json(report.to_dict(), out_path)


@cli.command("sample")
@click.option("--model", type=click.Choice(["bgg", "bmixgnb"]), default="bgg", show_default=True)
@click.option("--params", "params_text", required=True, help="e.g. beta=1,alpha=2,p=0.5[,r=1.5]")
@click.option("--n", "size", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--stream", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--method", type=click.Choice(SAMPLE_METHODS), default="standard", show_default=True)
@click.option("--q", type=float, help="outer geometric / clock parameter")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@guarded
def sample_cmd(model, params_text, size, seed, stream, method, q, out_path):
    """Draw (x, n) pairs to a CSV."""
    values = parse_params(params_text)
    rng = sample.RandomStream(seed, stream)
    if model == "bgg":
        params = bgg_params_from(values)
        samplers = {
            "standard": lambda: sample.sample_bgg(params, rng, size),
            "literal": lambda: sample.sample_bgg(params, rng, size, literal_sum=True),
            "compound-poisson": lambda: sample.sample_bgg_compound_poisson(params, rng, size),
            "geometric-sum": lambda: sample.sample_bgg_geometric_sum(q, params, rng, size),
        }
    else:
        params = bmixgnb_params_from(values)
        samplers = {
            "standard": lambda: sample.sample_bmixgnb(params, rng, size),
            "flp": lambda: sample.sample_bmixgnb_flp(params, rng, size),
            "compound-poisson": lambda: sample.sample_bmixgnb_compound_poisson(params, rng, size),
            "time-changed": lambda: sample.sample_bmixgnb_time_changed(params, q, rng, size),
        }
    if method not in samplers:
        raise click.BadParameter(f"method {method!r} is not available for {model}")
    if method in ("geometric-sum", "time-changed") and q is None:
        raise click.BadParameter(f"method {method!r} needs --q")
    xs, ns = samplers[method]()
    sample.write_sample_csv(out_path, xs, ns)
    click.echo(f"✅ {size} draws from {model.upper()} ({method}) saved to {out_path}")


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False), help="CSV with columns date,rate")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--daily", "daily_path", type=click.Path(dir_okay=False), help="also write the positive daily returns")
@guarded
def extract(input_path, out_path, daily_path):
    """Turn a rate series into (magnitude, duration) pairs of positive runs."""
    series = load_rates_csv(input_path)
    extraction = extract_positive_runs(log_returns(series))
    if extraction.empty:
        click.echo("⚠️ No positive runs found; nothing written.")
        sys.exit(EXIT_INVALID)
    write_pairs_csv(extraction.pairs, out_path)
    if daily_path:
        pd.DataFrame({"d": extraction.one_day_positive}).to_csv(daily_path, index=False, float_format="%.17g")
    click.echo(f"✅ {extraction.pairs.size} pairs from {extraction.n_returns} returns saved to {out_path}")


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--outdir", required=True, type=click.Path(file_okay=False))
@click.option("--synthetic", is_flag=True, help="analyse a generated series instead of --input")
@click.option("--seed", type=click.IntRange(min=0), help="seed for --synthetic (default: the config seed)")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="TOML file with an [analysis] table")
@click.option("--ledger", default=LEDGER_FILE, show_default=True)
@click.option("--no-ledger", is_flag=True)
@guarded
def analyze(input_path, outdir, synthetic, seed, config_path, ledger, no_ledger):
    """Full run analysis: fits, tests and tables written to OUTDIR."""
    if (input_path is None) != synthetic:
        raise click.UsageError("give exactly one of --input or --synthetic")
    config = AnalysisConfig.from_toml(config_path) if config_path else AnalysisConfig()
    if input_path:
        series = load_rates_csv(input_path)
        source = input_path
    else:
        series = config_rate_series(config, seed)
        source = f"synthetic:{config.seed if seed is None else seed}"
    click.echo(f"🕵️ Analysing {len(series)} rates from {source}...")
    bundle = run_full_analysis(series, outdir, config)
    if not bundle.artifacts:
        for failure in bundle.failed_stages:
            click.echo(f"❌ {failure['stage']}: {failure['error']}", err=True)
        sys.exit(EXIT_INVALID)

    click.echo(f"\n📊 ANALYSIS SUMMARY ({outdir})")
    click.echo("=" * 50)
    for key, value in bundle.summary.items():
        click.echo(f"{key:<30} | {value:<10}")
    click.echo("-" * 50)
    for name in bundle.artifacts:
        click.echo(f"   wrote {name}")
    if not no_ledger:
        for name in ("fit_bgg_rate", "fit_bgg_ortho", "fit_beg"):
            path = bundle.artifacts.get(f"{name}.json")
            if path:
                with open(path) as f:
                    record_fit(FitReport.from_dict(json.load(f)), source=source, db_file=ledger)
    if bundle.failed_stages:
        for failure in bundle.failed_stages:
            click.echo(f"⚠️ {failure['stage']}: {failure['error']}", err=True)
        nonconverged = any(f["error"].startswith("NonConvergenceError") for f in bundle.failed_stages)
        sys.exit(EXIT_NONCONVERGED if nonconverged else EXIT_INVALID)
    click.echo("✅ Analysis complete.")


@cli.command("test")
@click.option("--lr", "lr_values", type=float, nargs=2, help="FULL_LOGLIK RESTRICTED_LOGLIK")
@click.option("--df", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--wald", "wald_path", type=click.Path(exists=True, dir_okay=False), help="FitReport JSON")
@click.option("--component", default="alpha", show_default=True)
@click.option("--null", "null_value", type=float, default=1.0, show_default=True)
@guarded
def test_cmd(lr_values, df, wald_path, component, null_value):
    """Likelihood-ratio or Wald test."""
    if (lr_values is None) == (wald_path is None):
        raise click.UsageError("give exactly one of --lr or --wald")
    if lr_values is not None:
        result = lr_test(lr_values[0], lr_values[1], df)
    else:
        with open(wald_path) as f:
            report = FitReport.from_dict(json.load(f))
        result = wald_test(report, component, null_value)
    write_json(result.to_dict(), None)


@cli.command("simulate-path")
@click.option("--params", "params_text", required=True, help="beta=..,alpha=..,p=..")
@click.option("--grid", required=True, help="increasing times, e.g. 0,0.5,1,2")
@click.option("--paths", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@guarded
def simulate_path_cmd(params_text, grid, paths, seed, out_path):
    """Simulate the gamma / negative binomial Levy motion on a time grid."""
    params = bgg_params_from(parse_params(params_text))
    times = parse_floats(grid)
    rng = sample.RandomStream(seed)
    if paths == 1:
        bmixgnb.simulate_path(params, times, rng).to_csv(out_path)
    else:
        x, n = bmixgnb.simulate_paths(params, times, rng, paths)
        frame = pd.DataFrame({
            "path": np.repeat(np.arange(paths), len(times)),
            "t": np.tile(times, paths),
            "x": x.ravel(),
            "n": n.ravel(),
        })
        frame.to_csv(out_path, index=False, float_format="%.17g")
    click.echo(f"✅ {paths} path(s) on {len(times)} grid points saved to {out_path}")


@cli.command()
@click.option("--ks", is_flag=True, help="Kolmogorov-Smirnov test")
@click.option("--chi2", is_flag=True, help="Pearson chi-square test")
@click.option("--sample", "sample_path", type=click.Path(exists=True, dir_okay=False), help="CSV holding the sample")
@click.option("--column", default="x", show_default=True)
@click.option("--params", "params_text", help="BGG parameters for the marginal X cdf")
@click.option("--against", "against_path", type=click.Path(exists=True, dir_okay=False), help="second sample CSV (two-sample KS)")
@click.option("--observed", help="comma separated cell counts")
@click.option("--probs", help="comma separated cell probabilities")
@click.option("--p-hat", type=float, help="geometric duration probabilities instead of --probs")
@click.option("--df-adjust", type=click.IntRange(min=0), default=0, show_default=True)
@guarded
def gof(ks, chi2, sample_path, column, params_text, against_path, observed, probs, p_hat, df_adjust):
    """Goodness-of-fit tests."""
    if ks == chi2:
        raise click.UsageError("give exactly one of --ks or --chi2")
    if ks:
        if not sample_path:
            raise click.UsageError("--ks needs --sample")
        xs = read_column(sample_path, column)
        if against_path:
            result = ks_two_sample(xs, read_column(against_path, column))
        elif params_text:
            params = bgg_params_from(parse_params(params_text))
            result = ks_one_sample(xs, lambda v: bgg.marginal_cdf_x(params, v))
        else:
            raise click.UsageError("--ks needs --params or --against")
    else:
        if not observed:
            raise click.UsageError("--chi2 needs --observed")
        counts = parse_floats(observed)
        if p_hat is not None:
            cell_probs = duration_probabilities(p_hat, len(counts))
        elif probs:
            cell_probs = parse_floats(probs)
        else:
            raise click.UsageError("--chi2 needs --probs or --p-hat")
        result = pearson_chi_square(counts, cell_probs, df_adjust=df_adjust)
    write_json(result.to_dict(), None)


@cli.command()
@click.option("--params", "params_text", help="mu=..,alpha=..,p=.. (default: the analysis defaults)")
@click.option("--pairs", type=click.IntRange(min=1), default=549, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@guarded
def synth(params_text, pairs, seed, out_path):
    """Write a BGG-structured synthetic rate series."""
    params = bgg_params_from(parse_params(params_text)) if params_text else AnalysisConfig().synthetic_params()
    series = synthetic_rate_series(params, pairs, sample.RandomStream(seed))
    write_rates_csv(series, out_path)
    click.echo(f"✅ {len(series)} rates ({pairs} runs) saved to {out_path}")


@cli.command()
@click.option("--study", type=click.Choice(["coverage", "power"]), default="coverage", show_default=True)
@click.option("--params", "params_text", required=True, help="beta (or mu), alpha, p")
@click.option("--pairs", type=click.IntRange(min=2), default=500, show_default=True)
@click.option("--reps", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=WORKERS, show_default=True)
@click.option("--ledger", default=LEDGER_FILE, show_default=True)
@click.option("--no-ledger", is_flag=True)
@guarded
def replicate(study, params_text, pairs, reps, seed, workers, ledger, no_ledger):
    """Seeded coverage or power study."""
    params = bgg_params_from(parse_params(params_text))
    frame, failures = run_study(study, params, pairs, reps, seed, workers=workers, db_file=None if no_ledger else ledger)
    label = "COVERAGE" if study == "coverage" else "REJECTION RATE"
    click.echo(f"\n📊 {study.upper()} STUDY: {reps} replications of n={pairs}")
    click.echo("=" * 40)
    click.echo(f"{'PARAMETER':<15} | {label:<15}")
    click.echo("-" * 40)
    for name, rate in summarize(frame).items():
        click.echo(f"{name:<15} | {rate:<15.3f}")
    if failures:
        click.echo(f"⚠️ {len(failures)} replications failed")


@cli.command()
@click.option("--ledger", default=LEDGER_FILE, show_default=True)
@click.option("--limit", type=click.IntRange(min=1), default=20, show_default=True)
def history(ledger, limit):
    """List stored fits."""
    if not os.path.exists(ledger):
        click.echo("Ledger empty.")
        return
    fits = list_fits(ledger, limit)
    click.echo(f"\n📚 FIT LEDGER ({get_db_count(ledger)} fits)")
    click.echo("=" * 90)
    click.echo(f"{'ID':<5} | {'CREATED':<20} | {'MODEL':<8} | {'PARAM':<6} | {'N':<6} | {'LOGLIK':<14} | SOURCE")
    click.echo("-" * 90)
    for row in fits.itertuples():
        click.echo(f"{row.id:<5} | {row.created:<20} | {row.model:<8} | {row.parametrization:<6} | {row.n:<6} | {row.loglik:<14.6f} | {row.source}")


if __name__ == "__main__":
    cli()
