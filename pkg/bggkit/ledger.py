"""sqlite ledger of fit reports and replication rows."""
import json
import sqlite3
from datetime import datetime

import pandas as pd

from .errors import DomainError
from .infer import FitReport

# --- CONFIG ---
DB_FILE = "fit_ledger.db"


def get_db_connection(db_file=DB_FILE):
    return sqlite3.connect(db_file)


def init_db(db_file=DB_FILE):
    conn = get_db_connection(db_file)
    c = conn.cursor()
    c.execute('''CREATE TABLE IF NOT EXISTS fits
                 (id INTEGER PRIMARY KEY,
                  created TEXT,
                  model TEXT,
                  parametrization TEXT,
                  source TEXT,
                  n INTEGER,
                  loglik REAL,
                  converged BOOLEAN,
                  report_json TEXT)''')
    c.execute('''CREATE TABLE IF NOT EXISTS replications
                 (study TEXT,
                  seed INTEGER,
                  stream_id INTEGER,
                  parameter TEXT,
                  estimate REAL,
                  std_error REAL,
                  covered BOOLEAN,
                  statistic REAL,
                  p_value REAL)''')
    conn.commit()
    conn.close()


def get_db_count(db_file=DB_FILE, table="fits"):
    if table not in ("fits", "replications"):
        raise DomainError(f"unknown ledger table {table!r}")
    try:
        conn = get_db_connection(db_file)
        count = conn.execute(f"SELECT count(*) FROM {table}").fetchone()[0]
        conn.close()
        return count
    except sqlite3.Error:
        return 0


def record_fit(report, source="", db_file=DB_FILE):
    """Store a FitReport; returns the new row id."""
    init_db(db_file)
    conn = get_db_connection(db_file)
    c = conn.cursor()
    c.execute(
        "INSERT INTO fits (created, model, parametrization, source, n, loglik, converged, report_json) VALUES (?,?,?,?,?,?,?,?)",
        (
            datetime.now().isoformat(timespec="seconds"),
            report.model,
            report.parametrization,
            str(source),
            report.n,
            report.loglik,
            report.converged,
            report.to_json(indent=None),
        ),
    )
    fit_id = c.lastrowid
    conn.commit()
    conn.close()
    return fit_id


def list_fits(db_file=DB_FILE, limit=20):
    init_db(db_file)
    conn = get_db_connection(db_file)
    try:
        return pd.read_sql_query(
            "SELECT id, created, model, parametrization, source, n, loglik, converged FROM fits ORDER BY id DESC LIMIT ?",
            conn,
            params=(int(limit),),
        )
    finally:
        conn.close()


def load_report(fit_id, db_file=DB_FILE):
    conn = get_db_connection(db_file)
    try:
        row = conn.execute("SELECT report_json FROM fits WHERE id = ?", (int(fit_id),)).fetchone()
    finally:
        conn.close()
    if row is None:
        raise DomainError(f"no fit with id {fit_id} in {db_file}")
    return FitReport.from_dict(json.loads(row[0]))


def save_replications(rows, db_file=DB_FILE):
    """rows: tuples (study, seed, stream_id, parameter, estimate, std_error, covered, statistic, p_value)."""
    if not rows:
        return
    init_db(db_file)
    conn = get_db_connection(db_file)
    conn.executemany("INSERT INTO replications VALUES (?,?,?,?,?,?,?,?,?)", rows)
    conn.commit()
    conn.close()
