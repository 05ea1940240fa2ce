"""SQLite run ledger."""
import sqlite3
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path

LAB_DIR = ".levylab"
DB_NAME = "levylab.db"

SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY,
    experiment TEXT NOT NULL,
    config_path TEXT,
    seed TEXT NOT NULL,
    replicates INTEGER NOT NULL,
    row_count INTEGER DEFAULT 0,
    failed_rows INTEGER DEFAULT 0,
    csv_path TEXT,
    status TEXT DEFAULT 'finished',
    error TEXT,
    started_at TEXT DEFAULT CURRENT_TIMESTAMP
);
"""


def get_lab_dir(project_path: Path = None) -> Path:
    """Get .levylab directory path."""
    base = project_path or Path.cwd()
    return base / LAB_DIR


def get_db_path(project_path: Path = None) -> Path:
    return get_lab_dir(project_path) / DB_NAME


@contextmanager
def get_db(project_path: Path = None):
    """Get database connection."""
    conn = sqlite3.connect(str(get_db_path(project_path)))
    conn.row_factory = sqlite3.Row
    try:
        yield conn
        conn.commit()
    finally:
        conn.close()


def init_db(project_path: Path = None):
    """Create the ledger if missing."""
    get_lab_dir(project_path).mkdir(exist_ok=True)
    with get_db(project_path) as conn:
        conn.executescript(SCHEMA)


def record_run(experiment: str, config_path: str, seed: int, replicates: int,
               row_count: int = 0, failed_rows: int = 0, csv_path: str = None,
               status: str = "finished", error: str = None,
               project_path: Path = None) -> int:
    """Store one run."""
    init_db(project_path)
    with get_db(project_path) as conn:
        cur = conn.execute("""
            INSERT INTO runs (experiment, config_path, seed, replicates, row_count,
                              failed_rows, csv_path, status, error, started_at)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        """, (experiment, config_path, str(seed), replicates, row_count, failed_rows,
              csv_path, status, error, datetime.now().isoformat(timespec="seconds")))
        return cur.lastrowid


def get_runs(limit: int = 20, experiment: str = None, project_path: Path = None) -> list[dict]:
    """Most recent runs first."""
    if not get_db_path(project_path).exists():
        return []
    with get_db(project_path) as conn:
        if experiment:
            rows = conn.execute(
                "SELECT * FROM runs WHERE experiment = ? ORDER BY id DESC LIMIT ?",
                (experiment, limit)).fetchall()
        else:
            rows = conn.execute("SELECT * FROM runs ORDER BY id DESC LIMIT ?",
                                (limit,)).fetchall()
        return [dict(r) for r in rows]
