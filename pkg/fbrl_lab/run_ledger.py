"""
SQLite ledger of experiment runs with provenance: which config (by
fingerprint), which seed, where the results went, and how it ended.
"""

import hashlib
import logging
import sqlite3
from datetime import datetime, timezone
from pathlib import Path

from .config import dump_config

logger = logging.getLogger(__name__)

LEDGER_FILE = "runs.db"

RUNNING = "running"
FINISHED = "finished"
FAILED = "failed"


def get_utc_timestamp():
    return datetime.now(timezone.utc).isoformat()


def config_fingerprint(config):
    """Short SHA-256 of the rendered config."""
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()[:16]


def init_ledger(db_path=LEDGER_FILE):
    db = sqlite3.connect(db_path)
    db.execute("""
    CREATE TABLE IF NOT EXISTS runs (
        run_id TEXT PRIMARY KEY,
        config_hash TEXT NOT NULL,
        method TEXT NOT NULL,
        environment TEXT NOT NULL,
        size INTEGER NOT NULL,
        seed INTEGER NOT NULL,
        trials INTEGER NOT NULL,
        output_dir TEXT,
        status TEXT DEFAULT 'running',
        started_ts TEXT NOT NULL,
        finished_ts TEXT,
        final_mean_return REAL
    )""")
    db.execute("CREATE INDEX IF NOT EXISTS idx_runs_env ON runs(environment, method)")
    db.commit()
    return db


def open_ledger(db_path=LEDGER_FILE):
    """Open an existing ledger; fails if no run has been recorded there yet."""
    path = Path(db_path).resolve()
    if not path.exists():
        raise FileNotFoundError(f"No run ledger at {path}. Run an experiment first.")
    return init_ledger(str(path))


def record_run_start(db, config, output_dir):
    started = get_utc_timestamp()
    fingerprint = config_fingerprint(config)
    run_id = f"{fingerprint}-{config.seed}-{started}"
    env = config.environment
    db.execute(
        "INSERT INTO runs (run_id, config_hash, method, environment, size, seed, trials, output_dir, status, started_ts) "
        "VALUES (?,?,?,?,?,?,?,?,?,?)",
        (run_id, fingerprint, config.method, env.kind, env.size, config.seed, config.trials,
         str(output_dir), RUNNING, started),
    )
    db.commit()
    logger.debug("ledger: started run %s", run_id)
    return run_id


def record_run_finish(db, run_id, status, final_mean_return=None):
    cur = db.execute(
        "UPDATE runs SET status=?, finished_ts=?, final_mean_return=? WHERE run_id=?",
        (status, get_utc_timestamp(), final_mean_return, run_id),
    )
    if cur.rowcount == 0:
        raise ValueError(f"Run {run_id} not found in ledger.")
    db.commit()


def query_runs(db, environment=None, method=None):
    sql = "SELECT run_id, method, environment, size, seed, trials, status, final_mean_return, output_dir FROM runs WHERE 1=1"
    params = []
    if environment:
        sql += " AND environment = ?"
        params.append(environment)
    if method:
        sql += " AND method = ?"
        params.append(method)
    sql += " ORDER BY started_ts, rowid"
    return db.execute(sql, params).fetchall()
