"""
report.json and report.txt for a scenario run

report.json is sorted-key JSON under schema subrq-report/v1. Everything
outside metadata is a function of the scenario and its seeds; the wall
clock lives only in metadata.generated_at.

Usage:
    from cli.report_writer import build_report, write_reports

    report = build_report(scenario, records)
    write_reports(report, 'reports/heisenberg')
"""

import json
import math
import os
from datetime import datetime
from typing import Dict, List

import numpy as np
import pandas as pd

SCHEMA = 'subrq-report/v1'
TEXT_NUMBERS = 3


def clean(value):
    """numpy scalars and arrays to plain Python, non-finite floats to None"""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def summarize(records: List[Dict]) -> Dict:
    counts = {status: sum(r['status'] == status for r in records) for status in ('pass', 'fail', 'error')}
    return {
        'total': len(records),
        'passed': counts['pass'],
        'failed': counts['fail'],
        'errors': counts['error'],
        'exit_code': 0 if counts['pass'] == len(records) else 1,
    }


def build_report(scenario, records: List[Dict], command: str = 'run') -> Dict:
    return clean({
        'schema': SCHEMA,
        'command': command,
        'scenario': {
            'name': scenario.name,
            'file': os.path.basename(scenario.path) if scenario.path else None,
            'seed': scenario.seed,
            'names': list(scenario.names),
            'n': scenario.n,
            'd': scenario.d,
            'hamiltonian': scenario.hamiltonian.kind,
        },
        'tasks': records,
        'summary': summarize(records),
        'metadata': {'generated_at': datetime.now().isoformat()},
    })


def _format(value) -> str:
    if isinstance(value, float):
        return f'{value:.3g}'
    return str(value)


def report_table(report: Dict) -> pd.DataFrame:
    rows = []
    for r in report['tasks']:
        numbers = r.get('numbers') or {}
        shown = ', '.join(f'{k}={_format(v)}' for k, v in list(numbers.items())[:TEXT_NUMBERS])
        rows.append({
            'task': r['id'],
            'type': r['type'],
            'status': r['status'],
            'verdict': r.get('verdict') or '-',
            'expected': r.get('expected') or '-',
            'numbers': shown if r['status'] != 'error' else f'{r["error_type"]}: {r["error"]}',
        })
    return pd.DataFrame(rows, columns=['task', 'type', 'status', 'verdict', 'expected', 'numbers'])


def report_text(report: Dict) -> str:
    summary = report['summary']
    lines = [
        f'subrq report: {report["scenario"]["name"]} ({report["schema"]})',
        f'Generated: {report["metadata"]["generated_at"]}',
        '',
        report_table(report).to_string(index=False),
        '',
        f'Passed {summary["passed"]}/{summary["total"]}, failed {summary["failed"]}, errors {summary["errors"]}',
    ]
    return '\n'.join(lines) + '\n'


def report_json(report: Dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + '\n'


def write_reports(report: Dict, out_dir: str) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {'json': os.path.join(out_dir, 'report.json'), 'text': os.path.join(out_dir, 'report.txt')}
    with open(paths['json'], 'w') as f:
        f.write(report_json(report))
    with open(paths['text'], 'w') as f:
        f.write(report_text(report))
    return paths


def deterministic_part(report: Dict) -> Dict:
    """The report without metadata, for run-to-run comparison"""
    return {k: v for k, v in report.items() if k != 'metadata'}
