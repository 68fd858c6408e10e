import sqlite3
import json
from contextlib import contextmanager
import os


class RunLedger:
    """sqlite record of experiment runs, keyed by config hash"""

    def __init__(self, db_path):
        self.db_path = db_path
        self.init_database()

    @contextmanager
    def get_connection(self):
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    def init_database(self):
        """Initialize database with required tables"""
        db_dir = os.path.dirname(self.db_path)
        if db_dir:
            os.makedirs(db_dir, exist_ok=True)

        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute('''
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    config_hash TEXT NOT NULL,
                    experiment TEXT NOT NULL,
                    seed INTEGER,
                    passed BOOLEAN NOT NULL,
                    exit_code INTEGER NOT NULL,
                    report_path TEXT,
                    properties TEXT,
                    error TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            ''')
            cursor.execute('CREATE INDEX IF NOT EXISTS idx_runs_hash ON runs (config_hash)')
            conn.commit()

    def record_run(self, run, exit_code, report_path=None):
        """Insert one finished run; returns its row id"""
        summary = {p['property']: bool(p['pass']) for p in run.get('properties', [])}
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute('''
                INSERT INTO runs
                (config_hash, experiment, seed, passed, exit_code, report_path, properties, error)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            ''', (
                run['config_hash'], run['experiment'], run.get('seed'),
                bool(run.get('pass')), int(exit_code), report_path,
                json.dumps(summary, sort_keys=True),
                json.dumps(run['error']) if run.get('error') else None
            ))
            conn.commit()
            return cursor.lastrowid

    def get_runs(self, limit=100, offset=0):
        """Most recent runs first"""
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute('''
                SELECT * FROM runs
                ORDER BY id DESC
                LIMIT ? OFFSET ?
            ''', (limit, offset))
            return [self._row(row) for row in cursor.fetchall()]

    def get_runs_by_hash(self, config_hash):
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT * FROM runs WHERE config_hash = ? ORDER BY id", (config_hash,))
            return [self._row(row) for row in cursor.fetchall()]

    def get_statistics(self):
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT COUNT(*) AS total, COALESCE(SUM(passed), 0) AS passed FROM runs")
            row = cursor.fetchone()
            return {'total': row['total'], 'passed': row['passed'], 'failed': row['total'] - row['passed']}

    @staticmethod
    def _row(row):
        data = dict(row)
        data['passed'] = bool(data['passed'])
        data['properties'] = json.loads(data['properties'] or '{}')
        data['error'] = json.loads(data['error']) if data['error'] else None
        return data
