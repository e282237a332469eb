#!/usr/bin/env python3
"""
Test scenario validation, the task runner and the subrq command

Run with pytest, or directly: python scripts/cli/test_cli.py
"""

import sys
import os
import json
import inspect
import tempfile
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import pandas as pd

# Add scripts directory to path for cross-folder imports
current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from cli.report_writer import SCHEMA, deterministic_part
from cli.run_storage import RunStorage
from cli.scenario import load_scenario, parse_scenario
from cli.subrq import main
from shared.errors import ScenarioError

SCENARIOS = os.path.join(os.path.dirname(scripts_dir), 'scenarios')

HEADER = """
name = "probe"
seed = 3

[chart]
names = ["x", "y", "z"]

[frame]
fields = [["1", "0", "y^2/2"], ["0", "1", "0"]]
eta = ["-y^2/2", "0", "1"]

[hamiltonian]
kind = "frame"
k = 0.5
"""


def expect(error, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except error as e:
        return e
    raise AssertionError(f'{error.__name__} not raised')


def scenario_file(tmp_path, body: str, header: str = HEADER) -> str:
    path = os.path.join(str(tmp_path), 'probe.scn')
    with open(path, 'w') as f:
        f.write(header + body)
    return path


def run(tmp_path, scenario: str, folder: str = 'out', *extra):
    out = os.path.join(str(tmp_path), folder)
    code = main(['--quiet', 'run', scenario, '--out', out, *extra])
    report_path = os.path.join(out, 'report.json')
    report = json.load(open(report_path)) if os.path.exists(report_path) else None
    return code, report, out


def by_id(report):
    return {t['id']: t for t in report['tasks']}


# Scenario validation

def test_bundled_scenarios_load():
    for name in ('heisenberg', 'martinet', 'potential', 'vertical_potential'):
        scenario = load_scenario(os.path.join(SCENARIOS, f'{name}.scn'))
        assert scenario.name == name
        assert scenario.n == 3 and scenario.d == 2
        assert all(t['id'] for t in scenario.tasks)


def test_schema_errors_carry_pointers():
    doc = tomllib.loads(HEADER + '[[tasks]]\ntype = "normal-form"\nq0 = [0, 0, 0]\np0 = [1, 0, 0]\nT = 1.0\ndelta = -1.0\n')
    assert expect(ScenarioError, parse_scenario, doc).pointer == 'tasks[0].delta'

    doc = tomllib.loads(HEADER + '[[tasks]]\ntype = "flow"\nq0 = [0, 0]\np0 = [1, 0, 0]\nT = 1.0\n')
    assert expect(ScenarioError, parse_scenario, doc).pointer == 'tasks[0].q0'

    bad_field = HEADER.replace('"y^2/2"]', '"y^^2"]')
    doc = tomllib.loads(bad_field + '[[tasks]]\ntype = "formula-verify"\n')
    assert expect(ScenarioError, parse_scenario, doc).pointer == 'frame.fields[0][2]'

    doc = tomllib.loads(HEADER + '[[tasks]]\ntype = "teleport"\n')
    assert expect(ScenarioError, parse_scenario, doc).pointer == 'tasks[0].type'

    doc = tomllib.loads(HEADER + '[[tasks]]\ntype = "scan"\ndim = 2\nsample = 4\n')
    assert expect(ScenarioError, parse_scenario, doc).pointer == 'tasks[0].sample'


def test_frame_must_be_annihilated_by_eta():
    wrong = HEADER.replace('eta = ["-y^2/2", "0", "1"]', 'eta = ["0", "0", "1"]')
    doc = tomllib.loads(wrong + '[[tasks]]\ntype = "formula-verify"\n')
    assert expect(ScenarioError, parse_scenario, doc).pointer == 'frame'


def test_task_defaults_and_seed_inheritance():
    doc = tomllib.loads(HEADER + '[[tasks]]\ntype = "scan"\ndim = 3\n')
    task = parse_scenario(doc).tasks[0]
    assert task['seed'] == 3
    assert task['samples'] == 100 and task['null'] == 'default'
    assert task['id'] == '0-scan'


# Runs

def test_heisenberg_scenario_passes(tmp_path):
    code, report, out = run(tmp_path, os.path.join(SCENARIOS, 'heisenberg.scn'))
    assert code == 0
    assert report['schema'] == SCHEMA
    tasks = by_id(report)
    assert all(t['status'] == 'pass' for t in tasks.values())
    assert tasks['polynomial-curve']['verdict'] == 'regular_everywhere'
    assert tasks['open-orbit']['verdict'] == 'open'
    assert tasks['open-orbit']['numbers']['symplectic_defect'] < 1e-7
    assert tasks['bracket-span']['verdict'] == 'pass'
    assert tasks['bracket-span']['numbers']['rank'] == 10
    assert tasks['helix-lift']['numbers']['abnormal_covector'] is False
    assert tasks['helix']['numbers']['maupertuis_distance'] < 1e-6

    orbit = pd.read_csv(os.path.join(out, 'orbits', 'helix.csv'))
    assert {'t', 'q_x', 'p_z', 'H'} <= set(orbit.columns)
    assert os.path.exists(os.path.join(out, 'covectors', 'helix-lift.csv'))
    text = open(os.path.join(out, 'report.txt')).read()
    assert 'bracket-span' in text and 'Passed 5/5' in text


def test_vertical_potential_orbits_match_their_maupertuis_rescaling(tmp_path):
    code, report, _ = run(tmp_path, os.path.join(SCENARIOS, 'vertical_potential.scn'))
    assert code == 0
    task = by_id(report)['vertical-orbit']
    assert task['verdict'] == 'conserved'
    assert task['numbers']['maupertuis_distance'] < 1e-6


def test_potential_scenario_passes(tmp_path):
    code, report, _ = run(tmp_path, os.path.join(SCENARIOS, 'potential.scn'))
    assert code == 0
    tasks = by_id(report)
    assert tasks['shell-orbit']['verdict'] == 'conserved'
    assert tasks['shell-orbit']['numbers']['maupertuis_distance'] < 1e-6
    assert tasks['shell-normal-form']['verdict'] == 'regular'
    assert tasks['shell-normal-form']['numbers']['max_certificate'] <= 1e-7
    assert tasks['shell-normal-form']['numbers']['n_dot0'] > 1e-6


def test_martinet_negative_cases_count_as_passes(tmp_path):
    code, report, _ = run(tmp_path, os.path.join(SCENARIOS, 'martinet.scn'))
    assert code == 0
    tasks = by_id(report)
    assert tasks['abnormal-line']['verdict'] == 'singular_curve'
    assert tasks['abnormal-line']['numbers']['abnormal_covector'] is True
    assert tasks['line-normal-form']['verdict'] == 'singular'
    assert tasks['line-normal-form']['numbers']['max_certificate'] <= 1e-7
    assert tasks['line-span']['verdict'] == 'fail'
    assert tasks['line-lifts']['verdict'] == 'non_unique'
    assert tasks['line-lifts']['numbers']['singular'] is True


def test_report_is_deterministic(tmp_path):
    path = os.path.join(SCENARIOS, 'martinet.scn')
    _, first, _ = run(tmp_path, path, 'a')
    _, second, _ = run(tmp_path, path, 'b')
    assert json.dumps(deterministic_part(first), sort_keys=True) == \
        json.dumps(deterministic_part(second), sort_keys=True)
    assert set(first['metadata']) == {'generated_at'}


def test_malformed_file_writes_nothing(tmp_path):
    path = scenario_file(tmp_path, '[[tasks]\ntype = "flow"\n')
    code, report, out = run(tmp_path, path)
    assert code == 2
    assert report is None and not os.path.exists(out)

    path = scenario_file(tmp_path, '[[tasks]]\ntype = "flow"\nq0 = [0, 0, 0]\n')
    code, _, out = run(tmp_path, path)
    assert code == 2 and not os.path.exists(out)


def test_missing_file_is_a_usage_error(tmp_path):
    code, _, out = run(tmp_path, os.path.join(str(tmp_path), 'nowhere.scn'))
    assert code == 2 and not os.path.exists(out)


def test_wrong_expectation_fails_the_run(tmp_path):
    body = """
[[tasks]]
type = "regularity"
q0 = [0.0, 0.0, 0.0]
T = 1.0
control = { constant = [1.0, 0.0] }
expect = { verdict = "regular_everywhere" }
"""
    code, report, _ = run(tmp_path, scenario_file(tmp_path, body))
    assert code == 1
    task = report['tasks'][0]
    assert task['status'] == 'fail'
    assert task['verdict'] == 'singular_curve' and task['expected'] == 'regular_everywhere'
    assert report['summary'] == {'total': 1, 'passed': 0, 'failed': 1, 'errors': 0, 'exit_code': 1}


def test_task_errors_are_recorded_and_the_run_continues(tmp_path):
    header = HEADER.replace('kind = "frame"', 'kind = "matrix"\nB = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "0"]]')
    body = """
[[tasks]]
type = "lifts"
q0 = [0.0, 0.0, 0.0]
p0 = [1.0, 0.0, 0.0]
T = 1.0

[[tasks]]
type = "regularity"
q0 = [0.0, 0.3, 0.0]
T = 1.0
control = { piecewise = [[1.0, 0.0], [0.0, 1.0]], breaks = [0.0, 0.5, 1.0] }
"""
    code, report, _ = run(tmp_path, scenario_file(tmp_path, body, header))
    assert code == 1
    first, second = report['tasks']
    assert first['status'] == 'error' and first['error_type'] == 'PreconditionError'
    assert second['status'] == 'pass'


def test_overflowing_potential_is_a_task_error(tmp_path):
    header = HEADER.replace('k = 0.5', 'k = 0.5\npotential = "exp(1000*x)"')
    body = """
[[tasks]]
type = "flow"
q0 = [1.0, 0.0, 0.0]
p0 = [1.0, 0.0, 0.0]
T = 1.0

[[tasks]]
type = "regularity"
q0 = [0.0, 0.3, 0.0]
T = 1.0
control = { constant = [0.0, 1.0] }
"""
    code, report, _ = run(tmp_path, scenario_file(tmp_path, body, header))
    assert code == 1
    first, second = report['tasks']
    assert first['status'] == 'error' and first['error_type'] == 'ExprDomainError'
    assert 'overflows' in first['error']
    assert second['status'] == 'pass'
    assert report['summary']['errors'] == 1


def test_scan_task_respects_min_pass_rate(tmp_path):
    body = """
[[tasks]]
id = "static"
type = "scan"
dim = 2
samples = 10
null = "static"
expect = { min_pass_rate = 0.5 }
"""
    code, report, out = run(tmp_path, scenario_file(tmp_path, body))
    assert code == 1
    task = report['tasks'][0]
    assert task['numbers']['pass_rate'] == 0.0 and task['verdict'] == 'none_pass'
    stats = json.load(open(os.path.join(out, 'scans', 'static.json')))
    assert stats['samples'] == 10 and 'metadata' not in stats


# Subcommands

def test_scan_command_is_deterministic(tmp_path):
    outs = []
    for folder in ('a', 'b'):
        out = os.path.join(str(tmp_path), folder)
        assert main(['--quiet', 'scan', '--dim', '2', '--samples', '5', '--seed', '1', '--out', out]) == 0
        stats = json.load(open(os.path.join(out, 'scan_stats.json')))
        stats.pop('metadata')
        outs.append(stats)
    assert outs[0] == outs[1]


def test_scan_with_zero_samples_is_empty(tmp_path):
    out = os.path.join(str(tmp_path), 'empty')
    assert main(['--quiet', 'scan', '--dim', '2', '--samples', '0', '--out', out]) == 0
    stats = json.load(open(os.path.join(out, 'scan_stats.json')))
    assert stats['samples'] == 0 and stats['pass_rate'] is None and stats['witnesses'] == []


def test_formula_verify_writes_the_table(tmp_path):
    out = os.path.join(str(tmp_path), 'battery')
    assert main(['--quiet', 'formula-verify', '--dim', '2', '--dim', '3', '--out', out]) == 0
    table = pd.read_csv(os.path.join(out, 'formula_battery.csv'))
    assert list(table.columns) == ['check', 'd', 'max_error', 'tolerance', 'passed']
    assert set(table['d']) == {2, 3}
    assert table['passed'].all()


def test_usage_errors_exit_two(tmp_path):
    assert main(['run']) == 2
    assert main(['teleport']) == 2
    assert main(['--quiet', 'scan', '--dim', '1', '--out', str(tmp_path)]) == 2
    assert main(['--quiet', 'formula-verify', '--dim', '1', '--out', str(tmp_path)]) == 2


def test_history_is_stored_in_duckdb(tmp_path):
    db = os.path.join(str(tmp_path), 'runs.duckdb')
    body = """
[[tasks]]
type = "scan"
dim = 2
samples = 3
"""
    out = os.path.join(str(tmp_path), 'out')
    assert main(['--quiet', '--db', db, 'run', scenario_file(tmp_path, body), '--out', out]) == 0
    assert main(['--quiet', '--db', db, 'history']) == 0

    storage = RunStorage(db)
    runs = storage.recent_runs()
    assert len(runs) == 1 and runs.iloc[0]['scenario'] == 'probe'
    results = storage.task_results(runs.iloc[0]['run_id'])
    assert [r['task_type'] for r in results] == ['scan']
    assert len(storage.scan_history(d=2)) == 1
    storage.close()


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 CLI TEST')
    print('=' * 70)
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith('test_') and callable(fn):
            try:
                if inspect.signature(fn).parameters:
                    fn(Path(tempfile.mkdtemp()))
                else:
                    fn()
                print(f'✅ {name}')
            except Exception as e:
                failures += 1
                print(f'❌ {name}: {e}')
    print('=' * 70)
    sys.exit(1 if failures else 0)
