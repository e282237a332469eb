"""
Step 1 of the normal form: straighten the projected orbit

psi1(y) = Q(y1) + N yhat maps the straight line y = t e1 onto the projected
orbit Q(t). N is a fixed orthonormal basis of P(0)^perp, so the lifted
covector at t = 0 is a multiple of e1. phi1 = psi1^{-1} is evaluated by
Newton's method started from the closest orbit sample.

Usage:
    from normal_form.straighten import StraighteningMap, straighten_orbit

    S = StraighteningMap(orbit)
    S.phi(orbit.q(0.3))                # ~ (0.3, 0, ..., 0)
    Psi1 = straighten_orbit(H, orbit)  # FiberedSymplecto
"""

import os
import sys
from typing import Optional

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import HamiltonianSpec, OrbitSegment, hamiltonian_jets
from shared.errors import NewtonFailure, PreconditionError
from shared.symplectic import J

from .symplecto import FiberedSymplecto, invert_jet


def complement_basis(u) -> np.ndarray:
    """
    Orthonormal basis of u^perp as columns, by Gram-Schmidt of the standard
    vectors (the one along argmax |u| skipped). u = e1 gives [e2, ..., en].
    """
    u = np.asarray(u, float)
    u = u / np.linalg.norm(u)
    n = len(u)
    skip = int(np.argmax(np.abs(u)))
    columns = []
    for k in range(n):
        if k == skip:
            continue
        e = np.zeros(n)
        e[k] = 1.0
        for c in [u] + columns:
            e = e - (c @ e) * c
        columns.append(e / np.linalg.norm(e))
    return np.array(columns).T


def orbit_derivatives(H: HamiltonianSpec, state):
    """Qdot, Qddot, Qdddot of the projected orbit through one phase point"""
    n = H.n
    state = np.asarray(state, float)
    j = hamiltonian_jets(H, state[:n], state[n:], order=3)
    F = J(n) @ j.grad
    DF_F = J(n) @ j.hess @ F
    rows = j.hess[n:]
    q1 = j.Hp
    q2 = rows @ F
    q3 = np.einsum('mab,a,b->m', j.third[n:], F, F) + rows @ DF_F
    return q1, q2, q3


class StraighteningMap:
    """psi1 and its inverse around a projected orbit"""

    SPEED_THRESHOLD = 1e-10
    CONTACT_THRESHOLD = 1e-10
    NEWTON_TOLERANCE = 1e-13
    NEWTON_MAX_ITER = 30

    def __init__(self, orbit: OrbitSegment, speed_threshold: Optional[float] = None):
        threshold = self.SPEED_THRESHOLD if speed_threshold is None else speed_threshold
        self.orbit = orbit
        self.H = orbit.H
        n = self.H.n
        x0 = orbit.state(orbit.t0)
        self.q0, self.p0 = x0[:n], x0[n:]
        qdot = orbit.velocity(orbit.t0)
        if np.linalg.norm(qdot) < threshold:
            raise PreconditionError(f'projected velocity {np.linalg.norm(qdot):.3e} vanishes at t = 0')
        if abs(float(self.p0 @ qdot)) < self.CONTACT_THRESHOLD * np.linalg.norm(self.p0) * np.linalg.norm(qdot):
            raise PreconditionError('initial covector annihilates the projected velocity')
        self.N = complement_basis(self.p0)
        self._ts = np.linspace(orbit.t0, orbit.t1, 200)
        self._Qs = np.array([orbit.q(s) for s in self._ts])

    @property
    def n(self) -> int:
        return self.H.n

    def psi(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        return self.orbit.q(y[0]) + self.N @ y[1:]

    def psi_jets(self, y):
        """D psi1, D^2 psi1, D^3 psi1 at y; only the y1 derivatives are nonzero past order 1"""
        y = np.asarray(y, float)
        n = self.n
        q1, q2, q3 = orbit_derivatives(self.H, self.orbit.state(y[0]))
        D1 = np.column_stack([q1, self.N])
        D2 = np.zeros((n, n, n))
        D2[:, 0, 0] = q2
        D3 = np.zeros((n, n, n, n))
        D3[:, 0, 0, 0] = q3
        return D1, D2, D3

    def phi(self, q) -> np.ndarray:
        """
        Raises:
            NewtonFailure: no preimage close to the orbit
        """
        q = np.asarray(q, float)
        k = int(np.argmin(np.linalg.norm(self._Qs - q, axis=1)))
        t = self._ts[k]
        y = np.concatenate([[t], self.N.T @ (q - self._Qs[k])])
        for _ in range(self.NEWTON_MAX_ITER):
            r = self.psi(y) - q
            if np.linalg.norm(r) < self.NEWTON_TOLERANCE * (1.0 + np.linalg.norm(q)):
                return y
            D = np.column_stack([self.orbit.velocity(y[0]), self.N])
            y = y - np.linalg.solve(D, r)
        if np.linalg.norm(self.psi(y) - q) < 1e3 * self.NEWTON_TOLERANCE * (1.0 + np.linalg.norm(q)):
            return y
        raise NewtonFailure(f'straightening inverse did not converge near q = {q.tolist()}')

    def phi_jets(self, q):
        """phi1(q) with its first and second derivatives"""
        y = self.phi(q)
        D1, D2, _ = self.psi_jets(y)
        A, B, _ = invert_jet(D1, D2)
        return y, A, B

    def along_orbit(self, t: float):
        """Inverse jets of phi1 to order 3 at Q(t)"""
        y = np.zeros(self.n)
        y[0] = t
        return invert_jet(*self.psi_jets(y))

    def residual(self, samples: int = 21) -> float:
        """max |phi1(Q(t)) - t e1| over the orbit"""
        worst = 0.0
        for t in np.linspace(self.orbit.t0, self.orbit.t1, samples):
            target = np.zeros(self.n)
            target[0] = t
            worst = max(worst, float(np.max(np.abs(self.phi(self.orbit.q(t)) - target))))
        return worst

    def symplecto(self) -> FiberedSymplecto:
        return FiberedSymplecto.homogeneous(self.phi_jets, self.n)


def straighten_orbit(H: HamiltonianSpec, orbit: OrbitSegment,
                     speed_threshold: Optional[float] = None) -> FiberedSymplecto:
    if orbit.H is not H and orbit.n != H.n:
        raise PreconditionError('orbit and Hamiltonian live on different spaces')
    return StraighteningMap(orbit, speed_threshold).symplecto()
