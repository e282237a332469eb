"""
Hamiltonian flow, orbit segments and flow Jacobians

flow() integrates q' = H_p, p' = -H_q with DOP853 and dense output and
returns an OrbitSegment. flow_jacobian() adds the variational equation
M' = J Hess(H) M and reports the symplectic defect of the monodromy.

Usage:
    from dynamics.flow import flow

    orbit = flow(H, np.r_[q0, p0], 1.0)
    orbit.state(0.5), orbit.energy_drift()
    orbit.to_frame().to_csv('orbit.csv', index=False)
"""

import os
import sys
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import DomainExitError, IntegrationError
from shared.load_env import integrator_tolerances
from shared.symplectic import J, symplectic_defect

from .hamiltonian import HamiltonianSpec, hamiltonian_jets


@dataclass
class OrbitSegment:
    """Phase-space orbit on [t0, t1] with dense evaluation"""
    H: HamiltonianSpec
    t: np.ndarray
    states: np.ndarray
    dense: object
    energy: np.ndarray
    flags: Dict = field(default_factory=dict)
    period: Optional[float] = None

    @classmethod
    def from_samples(cls, H: HamiltonianSpec, t, states, period: Optional[float] = None) -> 'OrbitSegment':
        """Wrap sampled states with a cubic spline as the dense output"""
        t = np.asarray(t, float)
        states = np.asarray(states, float)
        spline = CubicSpline(t, states, axis=0)
        energy = np.array([H.value(s[:H.n], s[H.n:]) for s in states])
        return cls(H, t, states, lambda s: spline(s), energy, {}, period)

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def state(self, s: float) -> np.ndarray:
        return np.asarray(self.dense(s), float)

    def q(self, s: float) -> np.ndarray:
        return self.state(s)[:self.n]

    def p(self, s: float) -> np.ndarray:
        return self.state(s)[self.n:]

    def velocity(self, s: float) -> np.ndarray:
        x = self.state(s)
        return hamiltonian_jets(self.H, x[:self.n], x[self.n:], order=1).Hp

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0]))) if len(self.energy) else 0.0

    def max_step(self) -> float:
        return float(np.max(np.diff(self.t))) if len(self.t) > 1 else 0.0

    def to_frame(self) -> pd.DataFrame:
        """t, q..., p..., H"""
        qn = [f'q_{name}' for name in self.H.names]
        pn = [f'p_{name}' for name in self.H.names]
        df = pd.DataFrame(self.states, columns=qn + pn)
        df.insert(0, 't', self.t)
        df['H'] = self.energy
        return df


def _hamiltonian_rhs(H: HamiltonianSpec):
    n = H.n

    def rhs(t, x):
        j = hamiltonian_jets(H, x[:n], x[n:], order=1)
        return np.concatenate([j.Hp, -j.Hq])

    return rhs


def _box_events(H: HamiltonianSpec):
    events = []
    box = H.sample_box
    if box is None:
        return None
    for a, (lo, hi) in enumerate(box):
        for bound in (lo, hi):
            def hit(t, x, a=a, bound=bound):
                return x[a] - bound
            hit.terminal = True
            events.append(hit)
    return events


def flow(H: HamiltonianSpec, x0, T: float, rtol: Optional[float] = None,
         atol: Optional[float] = None, respect_box: bool = False,
         max_step: float = np.inf) -> OrbitSegment:
    """
    Integrate the Hamiltonian flow for time T (negative T flows backwards)

    Raises:
        DomainExitError: the q-projection leaves the sample box (respect_box=True)
        IntegrationError: step-size underflow or non-finite state
    """
    x0 = np.asarray(x0, float)
    if x0.shape != (2 * H.n,):
        raise IntegrationError(f'phase point must have {2 * H.n} entries')
    default_rtol, default_atol = integrator_tolerances()
    rtol = default_rtol if rtol is None else rtol
    atol = default_atol if atol is None else atol
    events = _box_events(H) if respect_box else None
    result = solve_ivp(_hamiltonian_rhs(H), (0.0, T), x0, method='DOP853', dense_output=True,
                       rtol=rtol, atol=atol, events=events, max_step=max_step)
    if result.status == 1:
        raise DomainExitError(f'orbit left the sample box at t = {result.t[-1]:.6g}')
    if result.status != 0 or not np.all(np.isfinite(result.y)):
        raise IntegrationError(f'Hamiltonian flow failed: {result.message}')
    states = result.y.T
    energy = np.array([H.value(s[:H.n], s[H.n:]) for s in states])
    return OrbitSegment(H, result.t, states, result.sol, energy)


def flow_jacobian(H: HamiltonianSpec, x0, T: float, rtol: Optional[float] = None,
                  atol: Optional[float] = None) -> Dict:
    """
    Monodromy M = D phi^T(x0) from the variational equation

    Returns:
        Dict with M, final state, symplectic_defect and the dense solution
    """
    x0 = np.asarray(x0, float)
    N = 2 * H.n
    Jn = J(H.n)
    default_rtol, default_atol = integrator_tolerances()
    rtol = default_rtol if rtol is None else rtol
    atol = default_atol if atol is None else atol

    def rhs(t, y):
        x = y[:N]
        M = y[N:].reshape(N, N)
        j = hamiltonian_jets(H, x[:H.n], x[H.n:], order=2)
        return np.concatenate([Jn @ j.grad, (Jn @ j.hess @ M).ravel()])

    y0 = np.concatenate([x0, np.eye(N).ravel()])
    result = solve_ivp(rhs, (0.0, T), y0, method='DOP853', dense_output=True, rtol=rtol, atol=atol)
    if result.status != 0 or not np.all(np.isfinite(result.y)):
        raise IntegrationError(f'variational integration failed: {result.message}')
    M = result.y[N:, -1].reshape(N, N)
    return {
        'M': M,
        'state': result.y[:N, -1],
        'symplectic_defect': symplectic_defect(M),
        'solution': result.sol,
        't': result.t,
    }


def reversibility_defect(H: HamiltonianSpec, x0, T: float) -> float:
    """max |R(phi^T(R x0)) - phi^-T(x0)| with R(q, p) = (q, -p)"""
    x0 = np.asarray(x0, float)
    n = H.n
    R = np.concatenate([np.ones(n), -np.ones(n)])
    forward = flow(H, R * x0, T).states[-1]
    backward = flow(H, x0, -T).states[-1]
    return float(np.max(np.abs(R * forward - backward)))
