"""
Step 2 of the normal form: transverse jets of the Hamilton-Jacobi solution

g solves H(q, dg(q)) = k with g = 0 on the section q0 + N yhat. Only its jets
along the characteristic through q0 are computed:

    q'  = H_p(q, g1)
    g1' = -H_q(q, g1)                       g1 = dg(q(t))
    S'  = -L^T Hess(H) L                    S  = d^2 g(q(t)),  L = [I; S]
    T'  = -(C + sym T W)                    T  = d^3 g(q(t))

with C = D^3H[L, L, L] and W = H_pq + H_pp S. The initial data follow from
differentiating the HJ identity on the section. The residuals of the
identity at transverse orders 0, 1, 2 are reported along the grid.
"""

import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Optional

import numpy as np
from scipy.integrate import solve_ivp

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import HamiltonianSpec, OrbitSegment, hamiltonian_jets, flow
from shared.errors import IntegrationError, NewtonFailure, PreconditionError, RiccatiBlowUp
from shared.load_env import integrator_tolerances

from .straighten import complement_basis


@dataclass
class HJJets:
    """Dense jets of g along the characteristic on [0, delta]"""
    H: HamiltonianSpec
    k: float
    delta: float
    scale: float
    N: np.ndarray
    solution: object
    t: np.ndarray
    orbit: OrbitSegment
    metadata: Dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.H.n

    def unpack(self, t: float):
        n = self.n
        y = self.solution(t)
        q = y[:n]
        g1 = y[n:2 * n]
        S = y[2 * n:2 * n + n * n].reshape(n, n)
        T = y[2 * n + n * n:].reshape(n, n, n)
        return q, g1, S, T

    def residuals(self, t: float) -> Dict:
        """HJ identity residuals at transverse orders 0, 1, 2"""
        n = self.n
        q, g1, S, T = self.unpack(t)
        j = hamiltonian_jets(self.H, q, g1, order=2)
        L = np.vstack([np.eye(n), S])
        r0 = j.value - self.k
        r1 = j.Hq + S @ j.Hp
        r2 = L.T @ j.hess @ L + np.einsum('mac,m->ac', T, j.Hp)
        return {'order0': r0, 'order1': r1, 'order2': r2}

    def max_residuals(self, samples: Optional[np.ndarray] = None) -> Dict:
        ts = self.t if samples is None else samples
        worst = {'order0': 0.0, 'order1': 0.0, 'order2': 0.0}
        for s in ts:
            r = self.residuals(s)
            for key in worst:
                worst[key] = max(worst[key], float(np.max(np.abs(r[key]))))
        return worst


class HamiltonJacobiSolver:
    """Characteristic propagation of the HJ jets up to transverse order 3"""

    BLOWUP_BOUND = 1e8
    NEWTON_TOLERANCE = 1e-14
    NEWTON_MAX_ITER = 30

    def __init__(self, H: HamiltonianSpec, k: Optional[float] = None):
        self.H = H
        self.k = H.k if k is None else float(k)

    def momentum_scale(self, q0, p0) -> float:
        """
        Newton on lam for H(q0, lam p0) = k starting at lam = 1

        Raises:
            NewtonFailure: no positive root (k below U on the section)
        """
        lam = 1.0
        for _ in range(self.NEWTON_MAX_ITER):
            j = hamiltonian_jets(self.H, q0, lam * p0, order=1)
            f = j.value - self.k
            if abs(f) < self.NEWTON_TOLERANCE * (1.0 + abs(self.k)):
                return lam
            slope = float(j.Hp @ p0)
            if abs(slope) < 1e-14:
                raise NewtonFailure('HJ momentum equation has a vanishing derivative')
            lam = lam - f / slope
            if not np.isfinite(lam) or lam <= 0.0:
                raise NewtonFailure(f'no positive momentum solves H = {self.k} on the section')
        raise NewtonFailure(f'HJ momentum Newton did not converge (last lam = {lam:.6g})')

    def initial_jets(self, q0, g1, N):
        """S(0), T(0) from the HJ identity and g = 0 on the section"""
        n = self.H.n
        j = hamiltonian_jets(self.H, q0, g1, order=2)
        X0 = j.Hp
        Bm = np.column_stack([X0, N])
        Binv = np.linalg.inv(Bm)
        St = np.zeros((n, n))
        St[0, 0] = -float(j.Hq @ X0)
        for a in range(1, n):
            St[0, a] = St[a, 0] = -float(j.Hq @ N[:, a - 1])
        S0 = Binv.T @ St @ Binv
        L = np.vstack([np.eye(n), S0])
        R = Bm.T @ (L.T @ j.hess @ L) @ Bm
        Tt = np.zeros((n, n, n))
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    if a == 0:
                        Tt[a, b, c] = -R[b, c]
                    elif b == 0:
                        Tt[a, b, c] = -R[a, c]
                    elif c == 0:
                        Tt[a, b, c] = -R[a, b]
        T0 = np.einsum('abc,ai,bj,ck->ijk', Tt, Binv, Binv, Binv)
        return S0, T0

    def _rhs(self):
        n = self.H.n
        H = self.H

        def rhs(t, y):
            q = y[:n]
            g1 = y[n:2 * n]
            S = y[2 * n:2 * n + n * n].reshape(n, n)
            T = y[2 * n + n * n:].reshape(n, n, n)
            j = hamiltonian_jets(H, q, g1, order=3)
            L = np.vstack([np.eye(n), S])
            dS = -(L.T @ j.hess @ L)
            W = j.hess[n:] @ L
            C = np.einsum('xyz,xa,yc,zf->acf', j.third, L, L, L)
            dT = -(C + np.einsum('mac,mf->acf', T, W) + np.einsum('maf,mc->acf', T, W)
                   + np.einsum('mcf,ma->acf', T, W))
            return np.concatenate([j.Hp, -j.Hq, dS.ravel(), dT.ravel()])

        return rhs

    def solve(self, orbit: OrbitSegment, delta: float) -> HJJets:
        """
        Raises:
            NewtonFailure: the momentum equation has no root on the section
            RiccatiBlowUp: |S| passed BLOWUP_BOUND before delta
            IntegrationError: the characteristic system failed
        """
        H = self.H
        n = H.n
        if delta <= 0.0:
            raise PreconditionError('delta must be positive')
        x0 = orbit.state(orbit.t0)
        q0, p0 = x0[:n], x0[n:]
        lam = self.momentum_scale(q0, p0)
        g1 = lam * p0
        if abs(lam - 1.0) > 1e-12:
            orbit = flow(H, np.concatenate([q0, g1]), max(delta, orbit.t1 - orbit.t0))
        N = complement_basis(g1)
        S0, T0 = self.initial_jets(q0, g1, N)
        y0 = np.concatenate([q0, g1, S0.ravel(), T0.ravel()])

        bound = self.BLOWUP_BOUND

        def blowup(t, y):
            return bound - np.max(np.abs(y[2 * n:2 * n + n * n]))
        blowup.terminal = True

        rtol, atol = integrator_tolerances()
        result = solve_ivp(self._rhs(), (0.0, delta), y0, method='DOP853', dense_output=True,
                           rtol=rtol, atol=atol, events=[blowup])
        last_S = np.max(np.abs(result.y[2 * n:2 * n + n * n, -1]))
        if result.status == 1 or (result.status == -1 and last_S > np.sqrt(bound)):
            raise RiccatiBlowUp(f'HJ Riccati solution blew up at t = {result.t[-1]:.6g}')
        if result.status != 0 or not np.all(np.isfinite(result.y)):
            raise IntegrationError(f'characteristic integration failed: {result.message}')
        return HJJets(H, self.k, float(delta), lam, N, result.sol, result.t, orbit,
                      {'solved_at': datetime.now().isoformat()})


def solve_hj_jets(H: HamiltonianSpec, orbit: OrbitSegment, delta: float,
                  k: Optional[float] = None) -> HJJets:
    return HamiltonJacobiSolver(H, k).solve(orbit, delta)
