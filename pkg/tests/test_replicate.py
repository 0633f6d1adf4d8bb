import pandas as pd
import pytest

from bggkit import ledger, replicate
from bggkit.bgg import BggParams
from bggkit.errors import DomainError

THETA = BggParams(2.0, 1.5, 0.4)


def test_coverage_study_is_reproducible(tmp_path):
    db = str(tmp_path / "ledger.db")
    frame, failures = replicate.run_study("coverage", THETA, 200, 8, seed=5, workers=2, db_file=db, progress=False)
    assert failures == []
    assert len(frame) == 24
    assert set(frame["parameter"]) == {"mu", "alpha", "p"}
    assert ledger.get_db_count(db, "replications") == 24
    again, _ = replicate.run_study("coverage", THETA, 200, 8, seed=5, workers=1, progress=False)
    pd.testing.assert_frame_equal(frame, again)


def test_single_replication_reruns_alone():
    rows = replicate.coverage_replication(THETA, 200, 5, 3)
    frame, _ = replicate.run_study("coverage", THETA, 200, 4, seed=5, workers=2, progress=False)
    alone = frame[frame["stream_id"] == 3].set_index("parameter")["estimate"]
    for row in rows:
        assert alone[row[3]] == row[4]


def test_power_study_summary():
    frame, failures = replicate.run_study("power", THETA, 200, 4, seed=6, workers=2, progress=False)
    assert failures == []
    summary = replicate.summarize(frame)
    assert set(summary) == {"lr", "wald"}
    assert all(0.0 <= v <= 1.0 for v in summary.values())
    assert replicate.summarize(frame.iloc[0:0]) == {}


def test_unknown_study():
    with pytest.raises(DomainError):
        replicate.run_study("bias", THETA, 200, 2, seed=1, progress=False)


@pytest.mark.slow
def test_interval_coverage_near_nominal(application_params):
    frame, failures = replicate.run_study("coverage", application_params, 500, 200, seed=2011, progress=False)
    assert len(failures) <= 2
    for name, rate in replicate.summarize(frame).items():
        assert 0.90 <= rate <= 0.99, name


@pytest.mark.slow
def test_alpha_one_power(application_params):
    frame, _ = replicate.run_study("power", application_params, 549, 200, seed=2012, progress=False)
    summary = replicate.summarize(frame)
    assert summary["lr"] > 0.5
    assert summary["wald"] > 0.5
