import pytest
from numpy.testing import assert_allclose

from bggkit import infer, ledger
from bggkit.errors import DomainError


def test_record_list_and_load(tmp_path, small_pairs):
    db = str(tmp_path / "ledger.db")
    assert ledger.get_db_count(db) == 0
    rate = infer.bgg_fit(small_pairs)
    ortho = infer.bgg_fit_ortho(small_pairs)
    first = ledger.record_fit(rate, "small.csv", db)
    second = ledger.record_fit(ortho, "small.csv", db)
    assert second == first + 1
    assert ledger.get_db_count(db) == 2

    fits = ledger.list_fits(db)
    assert fits["id"].tolist() == [second, first]
    assert fits["parametrization"].tolist() == [ortho.parametrization, rate.parametrization]
    assert (fits["n"] == small_pairs.size).all()

    back = ledger.load_report(first, db)
    assert back.estimates == rate.estimates
    assert back.params() == rate.params()
    assert_allclose(back.information_matrix, rate.information_matrix)


def test_list_fits_limit(tmp_path, small_pairs):
    db = str(tmp_path / "ledger.db")
    report = infer.bgg_fit(small_pairs, fixed_alpha=1.0)
    for _ in range(3):
        ledger.record_fit(report, db_file=db)
    assert len(ledger.list_fits(db, limit=2)) == 2


def test_missing_report(tmp_path):
    db = str(tmp_path / "ledger.db")
    ledger.init_db(db)
    with pytest.raises(DomainError):
        ledger.load_report(7, db)


def test_replication_rows(tmp_path):
    db = str(tmp_path / "ledger.db")
    rows = [("coverage", 1, k, "mu", 1.0, 0.1, True, None, None) for k in range(4)]
    ledger.save_replications(rows, db)
    ledger.save_replications([], db)
    assert ledger.get_db_count(db, "replications") == 4
    with pytest.raises(DomainError):
        ledger.get_db_count(db, "photos")
