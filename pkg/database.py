"""
Run Ledger
sqlite record of every toolkit run and the artifacts it wrote, kept next to the results
"""

import logging
import os
import sqlite3
from contextlib import contextmanager
from datetime import datetime, timezone

from config import DEFAULT_OUTPUT_DIR, LEDGER_FILENAME, TOOLKIT_VERSION

logger = logging.getLogger(__name__)

CONNECTION_TIMEOUT = 30
DEFAULT_LEDGER_PATH = os.path.join(DEFAULT_OUTPUT_DIR, LEDGER_FILENAME)


def ledger_path(output_dir=DEFAULT_OUTPUT_DIR):
    return os.path.join(output_dir, LEDGER_FILENAME)


@contextmanager
def get_db(path=DEFAULT_LEDGER_PATH):
    """Connection with Row access; closed on exit"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    conn = sqlite3.connect(path, timeout=CONNECTION_TIMEOUT)
    conn.row_factory = sqlite3.Row
    try:
        yield conn
    finally:
        conn.close()


def init_db(path=DEFAULT_LEDGER_PATH):
    """Create the runs and artifacts tables if they do not exist"""
    with get_db(path) as conn:
        try:
            conn.execute('''
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    subcommand TEXT NOT NULL,
                    config_hash TEXT NOT NULL,
                    status TEXT NOT NULL,
                    exit_code INTEGER NOT NULL,
                    wall_time_s REAL,
                    started_at TEXT NOT NULL,
                    toolkit_version TEXT NOT NULL
                )
            ''')
            conn.execute('''
                CREATE TABLE IF NOT EXISTS artifacts (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    path TEXT NOT NULL,
                    kind TEXT NOT NULL,
                    rows INTEGER,
                    FOREIGN KEY (run_id) REFERENCES runs (id)
                )
            ''')
            create_indexes(conn)
            conn.commit()
        except sqlite3.Error as e:
            logger.error(f"❌ ledger initialization failed at {path}: {e}")
            conn.rollback()
            raise
    logger.debug(f"ledger ready at {path}")
    return path


def create_indexes(conn):
    indexes = [
        'CREATE INDEX IF NOT EXISTS idx_runs_config ON runs(config_hash)',
        'CREATE INDEX IF NOT EXISTS idx_runs_subcommand ON runs(subcommand)',
        'CREATE INDEX IF NOT EXISTS idx_runs_started ON runs(started_at)',
        'CREATE INDEX IF NOT EXISTS idx_artifacts_run ON artifacts(run_id)',
    ]
    for index_sql in indexes:
        try:
            conn.execute(index_sql)
        except sqlite3.Error as e:
            logger.warning(f"⚠️ could not create index: {e}")


def record_run(subcommand, config_hash, status, exit_code, wall_time_s, path=DEFAULT_LEDGER_PATH,
               started_at=None):
    """Insert one run and return its id"""
    started_at = started_at or datetime.now(timezone.utc).isoformat(timespec='seconds')
    with get_db(path) as conn:
        cursor = conn.execute('''
            INSERT INTO runs (subcommand, config_hash, status, exit_code, wall_time_s, started_at,
                              toolkit_version)
            VALUES (?, ?, ?, ?, ?, ?, ?)
        ''', (subcommand, config_hash, status, exit_code, wall_time_s, started_at, TOOLKIT_VERSION))
        conn.commit()
        return cursor.lastrowid


def record_artifact(run_id, artifact_path, kind, rows=None, path=DEFAULT_LEDGER_PATH):
    with get_db(path) as conn:
        cursor = conn.execute('''
            INSERT INTO artifacts (run_id, path, kind, rows)
            VALUES (?, ?, ?, ?)
        ''', (run_id, artifact_path, kind, rows))
        conn.commit()
        return cursor.lastrowid


def recent_runs(limit=20, path=DEFAULT_LEDGER_PATH):
    """Newest first, each with its artifact count"""
    with get_db(path) as conn:
        runs = conn.execute('''
            SELECT r.id, r.subcommand, r.config_hash, r.status, r.exit_code, r.wall_time_s,
                   r.started_at, r.toolkit_version, COUNT(a.id) AS artifacts
            FROM runs r
            LEFT JOIN artifacts a ON a.run_id = r.id
            GROUP BY r.id
            ORDER BY r.id DESC
            LIMIT ?
        ''', (limit,)).fetchall()
        return [dict(run) for run in runs]


def runs_for_config(config_hash, path=DEFAULT_LEDGER_PATH):
    with get_db(path) as conn:
        runs = conn.execute('''
            SELECT id, subcommand, status, exit_code, wall_time_s, started_at
            FROM runs
            WHERE config_hash = ?
            ORDER BY id
        ''', (config_hash,)).fetchall()
        return [dict(run) for run in runs]


def artifacts_for_run(run_id, path=DEFAULT_LEDGER_PATH):
    with get_db(path) as conn:
        rows = conn.execute('SELECT path, kind, rows FROM artifacts WHERE run_id = ? ORDER BY id',
                            (run_id,)).fetchall()
        return [dict(row) for row in rows]


def print_ledger_summary(path=DEFAULT_LEDGER_PATH, limit=10):
    """Table counts and the latest runs"""
    print("\n" + "=" * 50)
    print("RUN LEDGER SUMMARY")
    print("=" * 50)
    with get_db(path) as conn:
        for table in ('runs', 'artifacts'):
            try:
                count = conn.execute(f'SELECT COUNT(*) FROM {table}').fetchone()[0]
                print(f"  - {table.capitalize()}: {count} records")
            except sqlite3.Error:
                print(f"  - {table.capitalize()}: Table not found")
    for run in recent_runs(limit, path):
        marker = '✅' if run['exit_code'] == 0 else '❌'
        print(f"  {marker} #{run['id']} {run['subcommand']:<16} {run['config_hash']} "
              f"exit={run['exit_code']} {run['wall_time_s'] or 0.0:.2f}s {run['started_at']}")
    print("=" * 50 + "\n")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    init_db()
    print_ledger_summary()
