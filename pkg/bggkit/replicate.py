"""Seeded replication studies run on a thread pool.

Replication k draws from ``RandomStream(seed, stream_id=k)``, so any single
replication can be re-run on its own.
"""
import concurrent.futures

import pandas as pd
from tqdm import tqdm

from .errors import BggError, DomainError
from .infer import DEFAULT_OPTIONS, PairSample, bgg_fit, bgg_fit_ortho, lr_test, wald_test
from .ledger import save_replications
from .sample import RandomStream, sample_bgg

# --- CONFIG ---
WORKERS = 4
CHUNK_SIZE = 50
COVERAGE = "coverage"
POWER = "power"


def coverage_replication(theta, n_pairs, seed, stream_id, opts=DEFAULT_OPTIONS):
    """Fit one simulated sample in (mu, alpha, p) and check which intervals cover the truth."""
    rng = RandomStream(seed, stream_id)
    xs, ns = sample_bgg(theta, rng, n_pairs)
    report = bgg_fit_ortho(PairSample.from_arrays(xs, ns), opts)
    truth = dict(zip(("mu", "alpha", "p"), theta.to_ortho().as_tuple()))
    rows = []
    for name, value in truth.items():
        covered = report.ci_lower[name] <= value <= report.ci_upper[name]
        rows.append((COVERAGE, seed, stream_id, name, report.estimates[name], report.std_errors[name], covered, None, None))
    return rows


def power_replication(theta, n_pairs, seed, stream_id, opts=DEFAULT_OPTIONS, level=0.05):
    """LR and Wald tests of alpha = 1 on one simulated sample."""
    rng = RandomStream(seed, stream_id)
    xs, ns = sample_bgg(theta, rng, n_pairs)
    data = PairSample.from_arrays(xs, ns)
    full = bgg_fit(data, opts)
    restricted = bgg_fit(data, opts, fixed_alpha=1.0)
    lr = lr_test(full.loglik, restricted.loglik, 1)
    wald = wald_test(full, "alpha", 1.0)
    alpha_hat, se = full.estimates["alpha"], full.std_errors["alpha"]
    return [
        (POWER, seed, stream_id, "lr", alpha_hat, se, lr.p_value < level, lr.statistic, lr.p_value),
        (POWER, seed, stream_id, "wald", alpha_hat, se, wald.p_value < level, wald.statistic, wald.p_value),
    ]


def run_study(study, theta, n_pairs, replications, seed, workers=WORKERS, opts=DEFAULT_OPTIONS, db_file=None, progress=True):
    """Run ``replications`` seeded replications; returns (frame, failures).

    With ``db_file`` rows are saved to the ledger every CHUNK_SIZE replications.
    """
    worker = {COVERAGE: coverage_replication, POWER: power_replication}.get(study)
    if worker is None:
        raise DomainError(f"unknown study {study!r}")
    rows, failures, chunk_buffer = [], [], []
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_stream = {
            executor.submit(worker, theta, n_pairs, seed, k, opts): k for k in range(replications)
        }
        bar = tqdm(total=replications, desc=study, disable=not progress)
        for future in concurrent.futures.as_completed(future_to_stream):
            k = future_to_stream[future]
            try:
                res = future.result()
            except BggError as exc:
                failures.append({"stream_id": k, "error": str(exc)})
                res = []
            chunk_buffer.extend(res)
            rows.extend(res)
            bar.update(1)
            if db_file and len(chunk_buffer) >= CHUNK_SIZE:
                save_replications(chunk_buffer, db_file)
                chunk_buffer = []
        bar.close()
    if db_file and chunk_buffer:
        save_replications(chunk_buffer, db_file)
    columns = ["study", "seed", "stream_id", "parameter", "estimate", "std_error", "covered", "statistic", "p_value"]
    frame = pd.DataFrame(rows, columns=columns).sort_values(["stream_id", "parameter"], ignore_index=True)
    return frame, failures


def summarize(frame):
    """Share of replications with ``covered`` true, per parameter (coverage rate or rejection rate)."""
    if frame.empty:
        return {}
    return frame.groupby("parameter")["covered"].mean().astype(float).to_dict()
