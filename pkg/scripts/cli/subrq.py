#!/usr/bin/env python3
"""
subrq command line

Subcommands:
    run             execute the tasks of a scenario file, write report.json and report.txt
    scan            Monte-Carlo genericity scan of the bracket span test
    formula-verify  closed forms against brute force, as a pass/fail table
    history         recent runs from the DuckDB history

Exit codes: 0 all tasks pass, 1 a task failed, 2 usage or schema error
(nothing is written in that case).
"""

import argparse
import os
import sys
from datetime import datetime
from typing import Dict, List, Optional

import duckdb

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from cli.report_writer import build_report, clean, summarize, write_reports
from cli.run_storage import RunStorage
from cli.scenario import load_scenario
from cli.tasks import TaskRunner
from formulas import formula_verify
from mane import default_null_direction, genericity_scan, static_null_direction, statistics_json
from shared.errors import PreconditionError, ScenarioError, SubrqError
from shared.load_env import get_setting, load_dotenv

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='subrq',
        description='Sub-Riemannian co-rank-1 Hamiltonian dynamics: scenarios, scans and formula checks',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run every task of a bundled scenario
  %(prog)s run scenarios/heisenberg.scn

  # Same, with 4 scan workers and a custom report folder
  %(prog)s run scenarios/martinet.scn --threads 4 --out /tmp/martinet

  # Genericity scan in dimension 3, reproducible with the seed
  %(prog)s scan --dim 3 --samples 200 --seed 1

  # Closed-form battery for d = 2 and d = 4
  %(prog)s formula-verify --dim 2 --dim 4

  # Last 20 runs stored with --db
  %(prog)s history --limit 20
        """
    )
    parser.add_argument('--quiet', action='store_true', help='Suppress progress output')
    parser.add_argument('--db', type=str, help='DuckDB run history file (default: SUBRQ_DB)')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Execute a scenario file')
    run.add_argument('file', help='Scenario file (*.scn, TOML)')
    run.add_argument('--threads', type=int, help='Worker cap (default: SUBRQ_THREADS)')
    run.add_argument('--out', type=str, help='Report folder (default: SUBRQ_OUT_DIR/<scenario name>)')

    scan = sub.add_parser('scan', help='Genericity scan of the span test')
    scan.add_argument('--dim', type=int, required=True, help='Dimension d >= 2')
    scan.add_argument('--samples', type=int, default=100, help='Number of random curves (default: 100)')
    scan.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    scan.add_argument('--null', choices=['default', 'static'], default='default',
                      help='Null direction n(t) of the sampled curves (default: default)')
    scan.add_argument('--depth', type=int, default=5, help='Bracket depth L (default: 5)')
    scan.add_argument('--endpoint-checks', type=int, default=0,
                      help='Cross-check this many samples against the end-point rank (default: 0)')
    scan.add_argument('--threads', type=int, help='Worker cap (default: SUBRQ_THREADS)')
    scan.add_argument('--out', type=str, help='Output folder (default: SUBRQ_OUT_DIR)')

    verify = sub.add_parser('formula-verify', help='Closed forms vs brute force')
    verify.add_argument('--dim', type=int, action='append',
                        help='Dimension to check, repeatable (default: 2 to 6)')
    verify.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    verify.add_argument('--out', type=str, help='Output folder (default: SUBRQ_OUT_DIR)')

    history = sub.add_parser('history', help='Recent runs from the DuckDB history')
    history.add_argument('--limit', type=int, default=10, help='Number of runs (default: 10)')
    return parser


def _store(db_path: Optional[str], report: Dict, scans: Optional[Dict] = None, verbose: bool = True):
    if not db_path:
        return None
    try:
        storage = RunStorage(db_path)
        run_id = storage.record_run(report)
        for task_id, stats in (scans or {}).items():
            storage.record_scan(run_id, task_id, stats)
        storage.close()
    except duckdb.Error as e:
        print(f'⚠️  run history not stored: {e}')
        return None
    if verbose:
        print(f'📊 Stored run {run_id[:8]} in {db_path}')
    return run_id


def command_run(args, db_path: Optional[str], verbose: bool) -> int:
    scenario = load_scenario(args.file)
    out_dir = args.out or os.path.join(get_setting('SUBRQ_OUT_DIR', 'reports'), scenario.name)
    threads = args.threads or get_setting('SUBRQ_THREADS', 1, int)

    runner = TaskRunner(scenario, out_dir, threads=threads, verbose=verbose)
    records = runner.run()
    report = build_report(scenario, records)
    paths = write_reports(report, out_dir)
    _store(db_path, report, runner.scan_stats, verbose)
    if verbose:
        print(f'\n✅ Reports written: {paths["json"]}, {paths["text"]}')
    return report['summary']['exit_code']


def command_scan(args, db_path: Optional[str], verbose: bool) -> int:
    if args.dim < 2:
        raise ScenarioError('dimension must be at least 2', '--dim')
    if args.samples < 0:
        raise ScenarioError('samples must be non-negative', '--samples')
    null = default_null_direction if args.null == 'default' else static_null_direction
    threads = args.threads or get_setting('SUBRQ_THREADS', 1, int)
    stats = genericity_scan(null(args.dim), args.samples, seed=args.seed, threads=threads,
                            depth=args.depth, endpoint_checks=args.endpoint_checks, verbose=verbose)

    out_dir = args.out or get_setting('SUBRQ_OUT_DIR', 'reports')
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, 'scan_stats.json')
    with open(path, 'w') as f:
        f.write(statistics_json(stats))
    if verbose:
        print(f'✅ Statistics written: {path}')

    task_id = f'scan-d{args.dim}'
    record = {'index': 0, 'id': task_id, 'type': 'scan', 'status': 'pass', 'verdict': None,
              'expected': None, 'numbers': {'samples': stats['samples'], 'pass_rate': stats['pass_rate']},
              'files': ['scan_stats.json']}
    report = clean({'command': 'scan', 'scenario': {'name': task_id, 'seed': args.seed},
                    'tasks': [record], 'summary': summarize([record]),
                    'metadata': {'generated_at': datetime.now().isoformat()}})
    _store(db_path, report, {task_id: stats}, verbose)
    return EXIT_PASS


def command_formula_verify(args, db_path: Optional[str], verbose: bool) -> int:
    dims = args.dim or list(range(2, 7))
    result = formula_verify(dims, seed=args.seed, verbose=verbose)
    table = result['table']
    print(table.to_string(index=False))

    out_dir = args.out or get_setting('SUBRQ_OUT_DIR', 'reports')
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, 'formula_battery.csv')
    table.to_csv(path, index=False)
    if verbose:
        print(f'✅ Table written: {path}')

    status = 'pass' if result['passed'] else 'fail'
    record = {'index': 0, 'id': 'formula-verify', 'type': 'formula-verify', 'status': status,
              'verdict': status, 'expected': None, 'numbers': {'checks': len(table)},
              'files': ['formula_battery.csv']}
    report = clean({'command': 'formula-verify', 'scenario': {'name': 'formula-verify', 'seed': args.seed},
                    'tasks': [record], 'summary': summarize([record]),
                    'metadata': {'generated_at': datetime.now().isoformat()}})
    _store(db_path, report, None, verbose)
    return EXIT_PASS if result['passed'] else EXIT_FAIL


def command_history(args, db_path: Optional[str], verbose: bool) -> int:
    storage = RunStorage(db_path or None)
    runs = storage.recent_runs(args.limit)
    storage.close()
    if runs.empty:
        print('⚠️  No runs stored yet')
    else:
        print(runs.to_string(index=False))
    return EXIT_PASS


COMMANDS = {
    'run': command_run,
    'scan': command_scan,
    'formula-verify': command_formula_verify,
    'history': command_history,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS

    db_path = args.db or get_setting('SUBRQ_DB')
    verbose = not args.quiet
    try:
        return COMMANDS[args.command](args, db_path, verbose)
    except ScenarioError as e:
        print(f'❌ Scenario error: {e}', file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as e:
        print(f'❌ {e}', file=sys.stderr)
        return EXIT_USAGE
    except SubrqError as e:
        print(f'❌ {type(e).__name__}: {e}', file=sys.stderr)
        return EXIT_FAIL


if __name__ == '__main__':
    sys.exit(main())
