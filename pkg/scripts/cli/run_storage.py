"""
DuckDB run history

Schema:
    - runs table: one row per CLI invocation (scenario, exit code, counts)
    - task_results table: one row per task record
    - scan_stats table: pass rates of genericity scans

Usage:
    from cli.run_storage import RunStorage

    storage = RunStorage('data/subrq_runs.duckdb')
    run_id = storage.record_run(report)
    storage.recent_runs(10)
    storage.close()
"""

import json
import os
import uuid
from typing import Dict, List, Optional

import duckdb
import pandas as pd


class RunStorage:
    """Store and retrieve subrq runs from DuckDB"""

    def __init__(self, db_path=None, verbose: bool = False):
        if db_path is None:
            db_path = os.path.join(os.getcwd(), 'data', 'subrq_runs.duckdb')
        directory = os.path.dirname(db_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        self.db_path = db_path
        self.verbose = verbose
        self.conn = duckdb.connect(db_path)
        self._init_schema()

    def _init_schema(self):
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id VARCHAR PRIMARY KEY,
                command VARCHAR NOT NULL,
                scenario VARCHAR,
                seed BIGINT,
                total INTEGER,
                passed INTEGER,
                failed INTEGER,
                errors INTEGER,
                exit_code INTEGER,
                generated_at VARCHAR,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)

        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS task_results (
                run_id VARCHAR NOT NULL,
                task_index INTEGER NOT NULL,
                task_id VARCHAR NOT NULL,
                task_type VARCHAR NOT NULL,
                status VARCHAR NOT NULL,
                verdict VARCHAR,
                expected VARCHAR,
                error VARCHAR,
                numbers VARCHAR,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,

                PRIMARY KEY (run_id, task_index)
            )
        """)

        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS scan_stats (
                run_id VARCHAR NOT NULL,
                task_id VARCHAR NOT NULL,
                d INTEGER NOT NULL,
                seed BIGINT,
                samples INTEGER,
                passes INTEGER,
                pass_rate DOUBLE,
                median_sigma_ratio DOUBLE,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,

                PRIMARY KEY (run_id, task_id)
            )
        """)

        if self.verbose:
            print('✅ Database schema initialized')

    def record_run(self, report: Dict, run_id: Optional[str] = None) -> str:
        run_id = run_id or uuid.uuid4().hex
        summary = report['summary']
        scenario = report.get('scenario') or {}
        self.conn.execute("""
            INSERT INTO runs VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, CURRENT_TIMESTAMP)
        """, [
            run_id, report.get('command', 'run'), scenario.get('name'), scenario.get('seed'),
            summary['total'], summary['passed'], summary['failed'], summary['errors'],
            summary['exit_code'], report['metadata']['generated_at'],
        ])
        for r in report['tasks']:
            self.conn.execute("""
                INSERT INTO task_results VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, CURRENT_TIMESTAMP)
            """, [
                run_id, r['index'], r['id'], r['type'], r['status'], r.get('verdict'),
                r.get('expected'), r.get('error'), json.dumps(r.get('numbers') or {}, sort_keys=True),
            ])
        if self.verbose:
            print(f'  ✅ Stored run {run_id[:8]} in DuckDB ({summary["total"]} tasks)')
        return run_id

    def record_scan(self, run_id: str, task_id: str, stats: Dict):
        median = (stats.get('sigma_min_quantiles') or {}).get('q50')
        self.conn.execute("""
            INSERT OR REPLACE INTO scan_stats VALUES (?, ?, ?, ?, ?, ?, ?, ?, CURRENT_TIMESTAMP)
        """, [run_id, task_id, stats['d'], stats['seed'], stats['samples'], stats['passes'],
              stats['pass_rate'], median])

    def recent_runs(self, limit: int = 10) -> pd.DataFrame:
        return self.conn.execute("""
            SELECT run_id, command, scenario, seed, total, passed, failed, errors, exit_code, created_at
            FROM runs
            ORDER BY created_at DESC
            LIMIT ?
        """, [limit]).df()

    def task_results(self, run_id: str) -> List[Dict]:
        result = self.conn.execute("""
            SELECT * FROM task_results
            WHERE run_id = ?
            ORDER BY task_index
        """, [run_id]).fetchall()

        if not result:
            return []

        columns = [desc[0] for desc in self.conn.description]
        return [dict(zip(columns, row)) for row in result]

    def scan_history(self, d: Optional[int] = None) -> pd.DataFrame:
        if d is None:
            return self.conn.execute('SELECT * FROM scan_stats ORDER BY created_at DESC').df()
        return self.conn.execute(
            'SELECT * FROM scan_stats WHERE d = ? ORDER BY created_at DESC', [d]).df()

    def close(self):
        self.conn.close()
