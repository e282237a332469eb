"""
Task runner for scenario files

Each task becomes one record:

    {'index': 0, 'id': '0-regularity', 'type': 'regularity', 'status': 'pass',
     'verdict': 'regular_everywhere', 'expected': None, 'numbers': {...}, 'files': [...]}

status is 'pass' or 'fail' from the task's own criterion, overridden by an
expect = { verdict = ... } block, and 'error' when a SubrqError was raised.

Usage:
    from cli.tasks import TaskRunner

    runner = TaskRunner(scenario, out_dir='reports', threads=2)
    records = runner.run()
"""

import os
import sys
from datetime import datetime
from typing import Callable, Dict, List, Optional

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import annotate_neat_times, flow, maupertuis_comparison
from formulas import formula_verify
from geometry import Control, classify_curve, integrate_horizontal
from lifts import ControlLagrangian, abnormal_search, lift_normal, unique_lift_check
from mane import (bracket_family, default_null_direction, genericity_scan, span_test,
                  static_null_direction, statistics_json)
from normal_form import NormalFormPipeline, normal_form
from shared.errors import PreconditionError, SubrqError
from variational import linearized_transition, nondegeneracy

from .scenario import Scenario, build_control


def on_shell(H, q0, p0) -> np.ndarray:
    """Rescale p0 onto H = k along its ray (the kinetic part is 2-homogeneous)"""
    q0, p0 = np.asarray(q0, float), np.asarray(p0, float)
    K = H.kinetic_value(q0, p0)
    room = H.k - H.potential_value(q0)
    if K <= 0.0 or room <= 0.0:
        raise PreconditionError(f'cannot scale p0 onto H = {H.k}: K = {K:.4g}, k - U = {room:.4g}')
    return p0 * np.sqrt(room / K)


class TaskRunner:
    """Runs the tasks of a Scenario in order and collects their records"""

    ORBIT_DIR = 'orbits'
    COVECTOR_DIR = 'covectors'
    TABLE_DIR = 'tables'
    SCAN_DIR = 'scans'
    LIFT_SAMPLES = 21

    def __init__(self, scenario: Scenario, out_dir: str, threads: int = 1, verbose: bool = True):
        self.scenario = scenario
        self.out_dir = out_dir
        self.threads = max(1, int(threads))
        self.verbose = verbose
        self.scan_stats: Dict[str, Dict] = {}
        self.handlers: Dict[str, Callable[[Dict], Dict]] = {
            'flow': self.run_flow,
            'regularity': self.run_regularity,
            'normal-form': self.run_normal_form,
            'poincare': self.run_poincare,
            'mane-check': self.run_mane_check,
            'formula-verify': self.run_formula_verify,
            'lifts': self.run_lifts,
            'scan': self.run_scan,
        }

    def _log(self, message: str):
        if self.verbose:
            print(message)

    def _path(self, folder: str, name: str) -> str:
        os.makedirs(os.path.join(self.out_dir, folder), exist_ok=True)
        return os.path.join(folder, name)

    def _write_frame(self, folder: str, task: Dict, df) -> str:
        rel = self._path(folder, f'{task["id"]}.csv')
        df.to_csv(os.path.join(self.out_dir, rel), index=False)
        return rel

    def _x0(self, task: Dict) -> np.ndarray:
        H = self.scenario.hamiltonian
        p0 = on_shell(H, task['q0'], task['p0']) if task['on_shell'] else np.asarray(task['p0'], float)
        return np.concatenate([np.asarray(task['q0'], float), p0])

    def _orbit(self, task: Dict):
        return flow(self.scenario.hamiltonian, self._x0(task), task['T'])

    def _normal_form(self, task: Dict):
        return normal_form(self.scenario.hamiltonian, self._orbit(task), task['delta'],
                           cert_tolerance=task.get('cert_tolerance'), jet_degree=task.get('jet_degree'))

    # Handlers return {'verdict', 'passed', 'numbers', 'files'}

    def run_flow(self, task: Dict) -> Dict:
        H = self.scenario.hamiltonian
        orbit = self._orbit(task)
        drift = orbit.energy_drift()
        numbers = {'energy_drift': drift, 'energy': float(orbit.energy[0]), 'steps': len(orbit.t)}
        verdict = 'conserved' if drift <= task['drift_tolerance'] else 'drift'
        if task['neat_times']:
            annotate_neat_times(orbit)
            numbers['neat_fraction'] = orbit.flags['neat_fraction']
            numbers['self_intersections'] = len(orbit.flags['self_intersections'])
        if task['maupertuis']:
            comparison = maupertuis_comparison(H, orbit.state(0.0), task['T'])
            numbers['maupertuis_distance'] = comparison['max_distance']
            numbers['arc_length'] = comparison['arc_length']
            if comparison['max_distance'] > task['maupertuis_tolerance'] and verdict == 'conserved':
                verdict = 'maupertuis_mismatch'
        files = [self._write_frame(self.ORBIT_DIR, task, orbit.to_frame())] if task['dump'] else []
        return {'verdict': verdict, 'passed': verdict == 'conserved', 'numbers': numbers, 'files': files}

    def run_regularity(self, task: Dict) -> Dict:
        frame = self.scenario.frame
        control = build_control(task['control'], task['T'])
        curve = integrate_horizontal(frame, task['q0'], control, task['T'])
        report = classify_curve(frame, curve, samples=task['samples'], threshold=task['threshold'])
        numbers = {
            'regular_fraction': report.regular_fraction,
            'non_regular_times': len(report.non_regular_times),
            'endpoint_rank': report.endpoint_rank,
            'endpoint_target': report.endpoint_target,
        }
        if task['abnormal']:
            numbers['abnormal_covector'] = abnormal_search(frame, curve) is not None
        return {'verdict': report.verdict, 'passed': True, 'numbers': numbers, 'files': []}

    def run_normal_form(self, task: Dict) -> Dict:
        data = self._normal_form(task)
        residuals = NormalFormPipeline.RESIDUAL_KEYS + ('null_residual',)
        certs = [float(data.certificates[k]) for k in residuals if k in data.certificates]
        n_dot = float(np.linalg.norm(data.n_dot0))
        numbers = {
            'delta': data.delta,
            'max_certificate': max(certs) if certs else 0.0,
            'n_dot0': n_dot,
        }
        verdict = 'regular' if n_dot > task['n_dot_threshold'] else 'singular'
        return {'verdict': verdict, 'passed': True, 'numbers': numbers, 'files': []}

    def run_poincare(self, task: Dict) -> Dict:
        lt = linearized_transition(self.scenario.hamiltonian, self._x0(task), task['T'],
                                   close_tolerance=task['close_tolerance'])
        numbers = {
            'symplectic_defect': lt.symplectic_defect,
            'closing_error': lt.closing_error,
            'closes': lt.closes,
        }
        symplectic = lt.symplectic_defect <= task['defect_tolerance']
        verdict = 'open'
        if lt.closes and symplectic:
            nd = nondegeneracy(lt.matrix, N_max=task['N_max'], tol=task['tol'],
                               defect_tolerance=task['defect_tolerance'])
            numbers.update({'min_distance': nd['min_distance'], 'n': nd['n'],
                            'elliptic': nd['elliptic'], 'hyperbolic': nd['hyperbolic']})
            verdict = nd['verdict']
        elif not symplectic:
            verdict = 'not_symplectic'
        return {'verdict': verdict, 'passed': symplectic, 'numbers': numbers, 'files': []}

    def run_mane_check(self, task: Dict) -> Dict:
        data = self._normal_form(task)
        if task['t_bar'] > data.delta:
            raise PreconditionError(f't_bar = {task["t_bar"]} lies beyond the certified delta = {data.delta:.4g}')
        cert = span_test(bracket_family(data.curve, L=task['depth'], t0=task['t_bar']),
                         rank_threshold=task['rank_threshold'])
        numbers = {
            'rank': cert.rank,
            'target': cert.target,
            'sigma_min_ratio': cert.sigma_min_ratio,
            'n_dot0': float(np.linalg.norm(data.n_dot0)),
            'delta': data.delta,
        }
        return {'verdict': cert.verdict, 'passed': cert.passed, 'numbers': numbers, 'files': []}

    def run_formula_verify(self, task: Dict) -> Dict:
        result = formula_verify(task['dims'], seed=task['seed'], tolerance=task['tolerance'])
        table = result['table']
        numbers = {
            'checks': len(table),
            'failed': int((~table['passed']).sum()),
            'max_error': float(table['max_error'].max()) if len(table) else 0.0,
        }
        files = [self._write_frame(self.TABLE_DIR, task, table)]
        verdict = 'pass' if result['passed'] else 'fail'
        return {'verdict': verdict, 'passed': result['passed'], 'numbers': numbers, 'files': files}

    def run_lifts(self, task: Dict) -> Dict:
        H = self.scenario.hamiltonian
        frame = H.frame
        x0 = self._x0(task)
        n = H.n
        orbit = flow(H, x0, task['T'])
        lag = ControlLagrangian(H)
        control = Control.from_function(lambda t: lag.maximizer(orbit.q(t), orbit.p(t)), frame.d)
        curve = integrate_horizontal(frame, x0[:n], control, task['T'])

        lift = lift_normal(H, curve, x0[n:])
        gap = max(float(np.max(np.abs(lift.P_at(s) - orbit.p(s))))
                  for s in np.linspace(0.0, task['T'], self.LIFT_SAMPLES))
        abnormal = abnormal_search(frame, curve)
        numbers = {
            'flow_covector_gap': gap,
            'drift_rate': lift.drift_rate(),
            'normal_residual': lift.normal_residual,
            'abnormal_covector': abnormal is not None,
        }
        passed = gap <= task['tolerance']
        verdict = 'singular' if abnormal is not None else 'regular'
        if task['p0b'] is not None:
            result = unique_lift_check(H, curve, x0[n:], task['p0b'])
            numbers['max_difference'] = result['max_difference']
            numbers['singular'] = result['singular']
            verdict = result['verdict']
        files = [self._write_frame(self.COVECTOR_DIR, task, lift.to_frame())] if task['dump'] else []
        return {'verdict': verdict, 'passed': passed, 'numbers': numbers, 'files': files}

    def run_scan(self, task: Dict) -> Dict:
        null = default_null_direction if task['null'] == 'default' else static_null_direction
        stats = genericity_scan(null(task['dim']), task['samples'], seed=task['seed'],
                                threads=self.threads, endpoint_checks=task['endpoint_checks'],
                                depth=task['depth'])
        self.scan_stats[task['id']] = stats
        rel = self._path(self.SCAN_DIR, f'{task["id"]}.json')
        deterministic = {k: v for k, v in stats.items() if k != 'metadata'}
        with open(os.path.join(self.out_dir, rel), 'w') as f:
            f.write(statistics_json(deterministic))
        numbers = {'samples': stats['samples'], 'passes': stats['passes'], 'pass_rate': stats['pass_rate']}
        if not stats['samples']:
            verdict = 'empty'
        elif stats['passes'] == stats['samples']:
            verdict = 'all_pass'
        elif not stats['passes']:
            verdict = 'none_pass'
        else:
            verdict = 'partial'
        passed = True
        floor = task['expect'].get('min_pass_rate')
        if floor is not None and stats['pass_rate'] is not None:
            passed = stats['pass_rate'] >= floor
        return {'verdict': verdict, 'passed': passed, 'numbers': numbers, 'files': [rel]}

    def run_task(self, task: Dict) -> Dict:
        record = {
            'index': task['index'],
            'id': task['id'],
            'type': task['type'],
            'expected': task['expect'].get('verdict'),
            'verdict': None,
            'numbers': {},
            'files': [],
        }
        self._log(f'\n🔍 [{task["index"]}] {task["type"]}: {task["id"]}')
        try:
            outcome = self.handlers[task['type']](task)
        except SubrqError as e:
            record.update({'status': 'error', 'error': str(e), 'error_type': type(e).__name__})
            self._log(f'   ❌ {type(e).__name__}: {e}')
            return record

        record.update({'verdict': outcome['verdict'], 'numbers': outcome['numbers'], 'files': outcome['files']})
        if record['expected'] is not None:
            passed = outcome['verdict'] == record['expected']
        else:
            passed = outcome['passed']
        record['status'] = 'pass' if passed else 'fail'
        expected = f' (expected {record["expected"]})' if record['expected'] is not None else ''
        mark = '✓' if passed else '❌'
        self._log(f'   {mark} {record["status"]}: {outcome["verdict"]}{expected}')
        return record

    def run(self, tasks: Optional[List[Dict]] = None) -> List[Dict]:
        tasks = self.scenario.tasks if tasks is None else tasks
        os.makedirs(self.out_dir, exist_ok=True)
        self._log(f'\n{"="*70}')
        self._log(f'📊 SCENARIO {self.scenario.name}: {len(tasks)} task(s), n = {self.scenario.n}')
        self._log(f'Timestamp: {datetime.now().strftime("%Y-%m-%d %H:%M:%S")}')
        self._log(f'{"="*70}')
        records = [self.run_task(task) for task in tasks]
        bad = [r for r in records if r['status'] != 'pass']
        self._log(f'\n{"="*70}')
        if bad:
            self._log(f'❌ {len(bad)} of {len(records)} task(s) did not pass')
        else:
            self._log(f'✅ All {len(records)} task(s) passed')
        self._log(f'{"="*70}')
        return records
