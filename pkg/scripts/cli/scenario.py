"""
Scenario files: TOML documents describing a chart, a frame, a Hamiltonian and a task list

    name = "heisenberg"
    seed = 0

    [chart]
    names = ["x", "y", "z"]
    box = [[-2, 2], [-2, 2], [-2, 2]]        # optional

    [frame]
    fields = [["1", "0", "-y/2"], ["0", "1", "x/2"]]
    eta = ["y/2", "-x/2", "1"]

    [hamiltonian]
    kind = "frame"                           # frame | matrix | expression
    class = "quad"                           # quad | rf
    potential = "0"
    k = 0.5

    [[tasks]]
    type = "regularity"
    q0 = [0, 0, 0]
    T = 1.0
    control = { polynomial = [[1.0, 0.2], [0.0, 1.0]] }
    expect = { verdict = "regular_everywhere" }

Every problem is reported as a ScenarioError whose pointer names the
offending entry (e.g. tasks[2].delta, frame.fields[0][2]).

Usage:
    from cli.scenario import load_scenario

    scenario = load_scenario('scenarios/heisenberg.scn')
    scenario.frame, scenario.hamiltonian, scenario.tasks
"""

import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import HamiltonianSpec, expression_hamiltonian, frame_hamiltonian, matrix_hamiltonian
from expr import ExprParser
from geometry import Control, FrameSpec
from shared.errors import ExprError, ScenarioError, SubrqError

REQUIRED = object()

TASK_TYPES = ('flow', 'regularity', 'normal-form', 'poincare', 'mane-check',
              'formula-verify', 'lifts', 'scan')

_ORBIT = {
    'q0': ('vector_n', REQUIRED),
    'p0': ('vector_n', REQUIRED),
    'T': ('positive', REQUIRED),
    'on_shell': ('bool', False),
}

TASK_SCHEMA: Dict[str, Dict[str, Tuple[str, Any]]] = {
    'flow': {
        **_ORBIT,
        'drift_tolerance': ('positive', 1e-8),
        'neat_times': ('bool', False),
        'maupertuis': ('bool', False),
        'maupertuis_tolerance': ('positive', 1e-6),
        'dump': ('bool', True),
    },
    'regularity': {
        'q0': ('vector_n', REQUIRED),
        'control': ('control', REQUIRED),
        'T': ('nonnegative', REQUIRED),
        'samples': ('count', 201),
        'threshold': ('positive', 1e-8),
        'abnormal': ('bool', True),
    },
    'normal-form': {
        **_ORBIT,
        'delta': ('positive', 0.5),
        'cert_tolerance': ('positive', 1e-7),
        'jet_degree': ('count', 8),
        'n_dot_threshold': ('positive', 1e-6),
    },
    'poincare': {
        **_ORBIT,
        'N_max': ('count', 12),
        'tol': ('positive', 1e-6),
        'close_tolerance': ('positive', 1e-8),
        'defect_tolerance': ('positive', 1e-7),
    },
    'mane-check': {
        **_ORBIT,
        'delta': ('positive', 0.5),
        'depth': ('count', 5),
        't_bar': ('nonnegative', 0.0),
        'rank_threshold': ('positive', 1e-8),
    },
    'formula-verify': {
        'dims': ('dims', [2, 3, 4, 5, 6]),
        'seed': ('int', None),
        'tolerance': ('positive', 1e-12),
    },
    'lifts': {
        **_ORBIT,
        'p0b': ('vector_n', None),
        'tolerance': ('positive', 1e-7),
        'dump': ('bool', True),
    },
    'scan': {
        'dim': ('dim', REQUIRED),
        'samples': ('int', 100),
        'seed': ('int', None),
        'null': ('str', 'default'),
        'endpoint_checks': ('int', 0),
        'depth': ('count', 5),
    },
}

EXPECT_KEYS = ('verdict', 'min_pass_rate')
NULL_KINDS = ('default', 'static')


@dataclass
class Scenario:
    name: str
    seed: int
    names: Tuple[str, ...]
    box: Optional[Tuple[Tuple[float, float], ...]]
    frame: FrameSpec
    hamiltonian: HamiltonianSpec
    tasks: List[Dict] = field(default_factory=list)
    path: Optional[str] = None

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def d(self) -> int:
        return self.frame.d


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _vector(value, length: int, pointer: str) -> List[float]:
    if not isinstance(value, list) or len(value) != length or not all(_is_number(x) for x in value):
        raise ScenarioError(f'expected a list of {length} numbers', pointer)
    return [float(x) for x in value]


def _matrix(value, rows: int, cols: int, pointer: str) -> List[List[float]]:
    if not isinstance(value, list) or len(value) != rows:
        raise ScenarioError(f'expected {rows} rows', pointer)
    return [_vector(row, cols, f'{pointer}[{i}]') for i, row in enumerate(value)]


def _strings(value, length: int, pointer: str) -> List[str]:
    if not isinstance(value, list) or len(value) != length:
        raise ScenarioError(f'expected a list of {length} expressions', pointer)
    out = []
    for i, x in enumerate(value):
        if isinstance(x, bool) or not isinstance(x, (str, int, float)):
            raise ScenarioError('expressions must be strings or numbers', f'{pointer}[{i}]')
        out.append(str(x))
    return out


def _check_expressions(parser: ExprParser, exprs: List[str], pointer: str):
    for i, src in enumerate(exprs):
        try:
            parser.parse(src)
        except ExprError as e:
            raise ScenarioError(str(e), f'{pointer}[{i}]') from None


def _section(doc: Dict, key: str) -> Dict:
    value = doc.get(key)
    if not isinstance(value, dict):
        raise ScenarioError(f'missing [{key}] section', key)
    return value


def _control(value, d: int, pointer: str) -> Dict:
    if not isinstance(value, dict) or len({'constant', 'polynomial', 'piecewise'} & set(value)) != 1:
        raise ScenarioError('control needs exactly one of constant, polynomial, piecewise', pointer)
    if 'constant' in value:
        return {'constant': _vector(value['constant'], d, f'{pointer}.constant')}
    if 'polynomial' in value:
        coeffs = value['polynomial']
        if not isinstance(coeffs, list) or not coeffs:
            raise ScenarioError('polynomial needs at least one coefficient row', f'{pointer}.polynomial')
        return {'polynomial': _matrix(coeffs, len(coeffs), d, f'{pointer}.polynomial')}
    values = value['piecewise']
    breaks = value.get('breaks')
    if not isinstance(values, list) or not values:
        raise ScenarioError('piecewise needs at least one row', f'{pointer}.piecewise')
    rows = _matrix(values, len(values), d, f'{pointer}.piecewise')
    breaks = _vector(breaks, len(rows) + 1, f'{pointer}.breaks')
    if any(b >= a for a, b in zip(breaks[1:], breaks[:-1])):
        raise ScenarioError('breaks must increase', f'{pointer}.breaks')
    return {'piecewise': rows, 'breaks': breaks}


def build_control(spec: Dict, T: float) -> Control:
    if 'constant' in spec:
        return Control.constant(spec['constant'], T)
    if 'polynomial' in spec:
        return Control.polynomial(spec['polynomial'], T)
    return Control.piecewise_constant(spec['piecewise'], spec['breaks'])


def _parameter(kind: str, value, scenario_n: int, scenario_d: int, pointer: str):
    if kind == 'vector_n':
        return _vector(value, scenario_n, pointer)
    if kind == 'control':
        return _control(value, scenario_d, pointer)
    if kind == 'bool':
        if not isinstance(value, bool):
            raise ScenarioError('expected true or false', pointer)
        return value
    if kind == 'str':
        if not isinstance(value, str):
            raise ScenarioError('expected a string', pointer)
        return value
    if kind in ('int', 'count', 'dim'):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError('expected an integer', pointer)
        if kind == 'int' and value < 0:
            raise ScenarioError('expected a non-negative integer', pointer)
        if kind == 'count' and value < 1:
            raise ScenarioError('expected a positive integer', pointer)
        if kind == 'dim' and value < 2:
            raise ScenarioError('dimension must be at least 2', pointer)
        return value
    if kind == 'dims':
        if not isinstance(value, list) or not value or any(
                isinstance(x, bool) or not isinstance(x, int) or x < 2 for x in value):
            raise ScenarioError('expected a non-empty list of integers >= 2', pointer)
        return list(value)
    if not _is_number(value):
        raise ScenarioError('expected a number', pointer)
    if kind == 'positive' and value <= 0:
        raise ScenarioError('expected a positive number', pointer)
    if kind == 'nonnegative' and value < 0:
        raise ScenarioError('expected a non-negative number', pointer)
    return float(value)


def validate_task(raw, index: int, n: int, d: int, seed: int) -> Dict:
    pointer = f'tasks[{index}]'
    if not isinstance(raw, dict):
        raise ScenarioError('task must be a table', pointer)
    kind = raw.get('type')
    if kind not in TASK_TYPES:
        raise ScenarioError(f'unknown task type {kind!r}, expected one of {", ".join(TASK_TYPES)}',
                            f'{pointer}.type')
    schema = TASK_SCHEMA[kind]
    unknown = sorted(set(raw) - set(schema) - {'type', 'id', 'expect'})
    if unknown:
        raise ScenarioError(f'unknown parameter {unknown[0]!r} for {kind}', f'{pointer}.{unknown[0]}')

    task = {'index': index, 'type': kind}
    task_id = raw.get('id', f'{index}-{kind}')
    if not isinstance(task_id, str) or not task_id or '/' in task_id:
        raise ScenarioError('id must be a non-empty string without /', f'{pointer}.id')
    task['id'] = task_id
    for key, (ptype, default) in schema.items():
        if key in raw:
            task[key] = _parameter(ptype, raw[key], n, d, f'{pointer}.{key}')
        elif default is REQUIRED:
            raise ScenarioError(f'missing required parameter for {kind}', f'{pointer}.{key}')
        else:
            task[key] = list(default) if isinstance(default, list) else default
    if 'seed' in schema and task['seed'] is None:
        task['seed'] = seed
    if kind == 'scan' and task['null'] not in NULL_KINDS:
        raise ScenarioError(f'null must be one of {", ".join(NULL_KINDS)}', f'{pointer}.null')

    expect = raw.get('expect', {})
    if not isinstance(expect, dict) or set(expect) - set(EXPECT_KEYS):
        raise ScenarioError(f'expect takes only {", ".join(EXPECT_KEYS)}', f'{pointer}.expect')
    if 'verdict' in expect and not isinstance(expect['verdict'], str):
        raise ScenarioError('expected verdict must be a string', f'{pointer}.expect.verdict')
    if 'min_pass_rate' in expect and not (_is_number(expect['min_pass_rate'])
                                          and 0.0 <= expect['min_pass_rate'] <= 1.0):
        raise ScenarioError('min_pass_rate must be in [0, 1]', f'{pointer}.expect.min_pass_rate')
    task['expect'] = dict(expect)
    return task


def parse_scenario(doc: Dict, path: Optional[str] = None) -> Scenario:
    """
    Build a Scenario from an already-decoded TOML document

    Raises:
        ScenarioError: schema violation, with the pointer of the offending entry
    """
    name = doc.get('name', os.path.splitext(os.path.basename(path))[0] if path else 'scenario')
    if not isinstance(name, str):
        raise ScenarioError('name must be a string', 'name')
    seed = doc.get('seed', 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioError('seed must be a non-negative integer', 'seed')

    chart = _section(doc, 'chart')
    names = chart.get('names')
    if not isinstance(names, list) or len(names) < 2 or not all(isinstance(x, str) for x in names):
        raise ScenarioError('names must list at least two coordinate names', 'chart.names')
    if len(set(names)) != len(names):
        raise ScenarioError('coordinate names must be distinct', 'chart.names')
    n, d = len(names), len(names) - 1
    box = chart.get('box')
    if box is not None:
        box = _matrix(box, n, 2, 'chart.box')
        for i, (lo, hi) in enumerate(box):
            if lo >= hi:
                raise ScenarioError('box interval must have lo < hi', f'chart.box[{i}]')
        box = tuple(tuple(b) for b in box)

    parser = ExprParser(names)
    frame_doc = _section(doc, 'frame')
    fields = frame_doc.get('fields')
    if not isinstance(fields, list) or len(fields) != d:
        raise ScenarioError(f'a co-rank-1 frame on {n} coordinates needs {d} fields', 'frame.fields')
    fields = [_strings(f, n, f'frame.fields[{i}]') for i, f in enumerate(fields)]
    for i, f in enumerate(fields):
        _check_expressions(parser, f, f'frame.fields[{i}]')
    eta = _strings(frame_doc.get('eta'), n, 'frame.eta')
    _check_expressions(parser, eta, 'frame.eta')
    frame = FrameSpec.from_strings(names, fields, eta, box=box)
    check = frame.validate(seed=seed)
    if not check['valid']:
        raise ScenarioError(check['errors'][0], 'frame')

    ham = _section(doc, 'hamiltonian')
    kind = ham.get('kind', 'frame')
    cls = ham.get('class', 'quad' if kind != 'expression' else 'rf')
    if cls not in ('quad', 'rf'):
        raise ScenarioError('class must be quad or rf', 'hamiltonian.class')
    potential = ham.get('potential', '0')
    _check_expressions(parser, _strings([potential], 1, 'hamiltonian.potential'), 'hamiltonian.potential')
    k = ham.get('k', 0.5)
    if not _is_number(k):
        raise ScenarioError('k must be a number', 'hamiltonian.k')
    try:
        if kind == 'frame':
            metric = ham.get('metric')
            if metric is not None:
                if not isinstance(metric, list) or len(metric) != d:
                    raise ScenarioError(f'metric must be {d}x{d}', 'hamiltonian.metric')
                metric = [_strings(row, d, f'hamiltonian.metric[{i}]') for i, row in enumerate(metric)]
                for i, row in enumerate(metric):
                    _check_expressions(parser, row, f'hamiltonian.metric[{i}]')
            H = frame_hamiltonian(frame, str(potential), float(k), metric=metric, cls=cls, box=box)
        elif kind == 'matrix':
            B = ham.get('B')
            if not isinstance(B, list) or len(B) != n:
                raise ScenarioError(f'B must be {n}x{n}', 'hamiltonian.B')
            B = [_strings(row, n, f'hamiltonian.B[{i}]') for i, row in enumerate(B)]
            for i, row in enumerate(B):
                _check_expressions(parser, row, f'hamiltonian.B[{i}]')
            H = matrix_hamiltonian(names, B, str(potential), float(k), frame=frame, cls=cls, box=box)
        elif kind == 'expression':
            kinetic = ham.get('kinetic')
            if not isinstance(kinetic, str):
                raise ScenarioError('expression kind needs a kinetic string', 'hamiltonian.kinetic')
            try:
                H = expression_hamiltonian(names, kinetic, str(potential), float(k), frame=frame,
                                           cls=cls, box=box)
            except ExprError as e:
                raise ScenarioError(str(e), 'hamiltonian.kinetic') from None
        else:
            raise ScenarioError(f'unknown kinetic kind {kind!r}', 'hamiltonian.kind')
    except ScenarioError:
        raise
    except SubrqError as e:
        raise ScenarioError(str(e), 'hamiltonian') from None

    raw_tasks = doc.get('tasks', [])
    if not isinstance(raw_tasks, list) or not raw_tasks:
        raise ScenarioError('scenario needs at least one [[tasks]] entry', 'tasks')
    tasks = [validate_task(raw, i, n, d, seed) for i, raw in enumerate(raw_tasks)]
    ids = [t['id'] for t in tasks]
    for i, task_id in enumerate(ids):
        if task_id in ids[:i]:
            raise ScenarioError(f'duplicate task id {task_id!r}', f'tasks[{i}].id')
    return Scenario(name, seed, tuple(names), box, frame, H, tasks, path)


def load_scenario(path: str) -> Scenario:
    """
    Raises:
        ScenarioError: unreadable file, malformed TOML or schema violation
    """
    try:
        with open(path, 'rb') as f:
            doc = tomllib.load(f)
    except OSError as e:
        raise ScenarioError(f'cannot read scenario: {e.strerror}', path) from None
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f'malformed TOML: {e}', path) from None
    return parse_scenario(doc, path)
