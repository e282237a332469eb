"""
Bilinear matrix control system of the linearized transition maps

    X' = [0 A(t); W(t) 0] X,   X(0) = I,   W(t) = sum_{i<=j} w_ij(t) E_ij

A is a CurveJet on [0, delta]; a control w is a callable t -> coefficients
in sym_basis order (d(d+1)/2 entries). Every generator lies in sp(2d), so
X(t) is symplectic; the defect is certified along the whole path.

Usage:
    from variational.transition import transition_map

    op = transition_map(curve)                      # w = 0
    op.final, op.symplectic_defect
    op = transition_map(curve, lambda t: [0.3, 0.0, 0.1])
"""

import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Dict, Optional

import numpy as np
from scipy.integrate import solve_ivp

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import EscapeError, IntegrationError, PreconditionError
from shared.jets import CurveJet
from shared.load_env import integrator_tolerances
from shared.symplectic import J, sym_basis, symplectic_defect

Control = Callable[[float], np.ndarray]


@dataclass
class TransitionOperator:
    """Sampled path X(t) on [0, delta] with its dense solution"""
    t: np.ndarray
    path: np.ndarray
    final: np.ndarray
    symplectic_defect: float
    det_final: float
    solution: object
    metadata: Dict = field(default_factory=dict)

    DEFECT_TOLERANCE = 1e-7
    DET_TOLERANCE = 1e-6

    @property
    def dim(self) -> int:
        return self.final.shape[0] // 2

    def at(self, t: float) -> np.ndarray:
        m = 2 * self.dim
        return np.asarray(self.solution(t), float).reshape(m, m)

    def inverse_at(self, t: float) -> np.ndarray:
        """X^{-1} = -J X^T J for symplectic X"""
        Jd = J(self.dim)
        return -Jd @ self.at(t).T @ Jd

    def validate(self) -> Dict:
        errors, passed = [], []
        if self.symplectic_defect > self.DEFECT_TOLERANCE:
            errors.append(f'symplectic defect {self.symplectic_defect:.2e} along the path')
        else:
            passed.append('X(t) symplectic along the path')
        if abs(self.det_final - 1.0) > self.DET_TOLERANCE:
            errors.append(f'det X(delta) = {self.det_final:.10g}')
        else:
            passed.append('det X(delta) = 1')
        return {'valid': not errors, 'errors': errors, 'warnings': [], 'passed_checks': passed,
                'metadata': dict(self.metadata)}


class ControlProblem:
    """X' = Y_w(t) X for a fixed A(t)"""

    ESCAPE_BOUND = 1e8
    SAMPLES = 51

    def __init__(self, A: CurveJet, delta: Optional[float] = None):
        self.A = A
        self.d = A.dim
        self.delta = A.delta if delta is None else float(delta)
        if self.delta <= 0.0:
            raise PreconditionError('delta must be positive')
        self.basis = [E for _, E in sym_basis(self.d)]

    @property
    def control_dim(self) -> int:
        return len(self.basis)

    def lower_block(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, float)
        if coeffs.shape != (self.control_dim,):
            raise PreconditionError(f'control needs {self.control_dim} coefficients, got {coeffs.shape}')
        return np.tensordot(coeffs, np.array(self.basis), axes=1)

    def generator(self, t: float, w: Optional[Control] = None) -> np.ndarray:
        d = self.d
        Y = np.zeros((2 * d, 2 * d))
        Y[:d, d:] = self.A.A_at(t)
        if w is not None:
            Y[d:, :d] = self.lower_block(w(t))
        return Y

    def solve(self, w: Optional[Control] = None, samples: Optional[int] = None,
              rtol: Optional[float] = None, atol: Optional[float] = None,
              max_step: float = np.inf) -> TransitionOperator:
        """
        Raises:
            EscapeError: the solution blew up before delta
            IntegrationError: the integrator failed otherwise
        """
        m = 2 * self.d
        default_rtol, default_atol = integrator_tolerances()
        rtol = default_rtol if rtol is None else rtol
        atol = default_atol if atol is None else atol

        def rhs(t, y):
            return (self.generator(t, w) @ y.reshape(m, m)).ravel()

        bound = self.ESCAPE_BOUND

        def escape(t, y):
            return bound - np.max(np.abs(y))
        escape.terminal = True

        result = solve_ivp(rhs, (0.0, self.delta), np.eye(m).ravel(), method='DOP853',
                           dense_output=True, rtol=rtol, atol=atol, events=[escape],
                           max_step=max_step)
        if result.status == 1 or (result.status == -1 and np.max(np.abs(result.y[:, -1])) > np.sqrt(bound)):
            raise EscapeError(f'control escapes: solution blew up at t = {result.t[-1]:.6g}')
        if result.status != 0 or not np.all(np.isfinite(result.y)):
            raise IntegrationError(f'transition integration failed: {result.message}')

        ts = np.linspace(0.0, self.delta, samples or self.SAMPLES)
        path = np.array([result.sol(s).reshape(m, m) for s in ts])
        final = result.y[:, -1].reshape(m, m)
        defect = max(symplectic_defect(X) for X in path)
        return TransitionOperator(ts, path, final, float(defect), float(np.linalg.det(final)),
                                  result.sol, {'delta': self.delta, 'solved_at': datetime.now().isoformat()})


    def solve_stacked(self, controls, rtol: Optional[float] = None, atol: Optional[float] = None,
                      max_step: float = np.inf) -> np.ndarray:
        """
        X(delta) for several controls integrated as one system, shape (len(controls), 2d, 2d)

        All copies share one step sequence, so differences between them carry
        no step-selection noise.

        Raises:
            EscapeError: a copy blew up before delta
            IntegrationError: the integrator failed otherwise
        """
        m = 2 * self.d
        count = len(controls)
        default_rtol, default_atol = integrator_tolerances()
        rtol = default_rtol if rtol is None else rtol
        atol = default_atol if atol is None else atol

        def rhs(t, y):
            blocks = y.reshape(count, m, m)
            return np.stack([self.generator(t, w) @ X for w, X in zip(controls, blocks)]).ravel()

        result = solve_ivp(rhs, (0.0, self.delta), np.tile(np.eye(m).ravel(), count), method='DOP853',
                           rtol=rtol, atol=atol, max_step=max_step)
        finals = result.y[:, -1]
        if not np.all(np.isfinite(finals)) or np.max(np.abs(finals)) > self.ESCAPE_BOUND:
            raise EscapeError(f'control escapes: solution blew up at t = {result.t[-1]:.6g}')
        if result.status != 0:
            raise IntegrationError(f'transition integration failed: {result.message}')
        return finals.reshape(count, m, m)


def transition_map(A: CurveJet, w: Optional[Control] = None, delta: Optional[float] = None,
                   samples: Optional[int] = None) -> TransitionOperator:
    return ControlProblem(A, delta).solve(w, samples)
