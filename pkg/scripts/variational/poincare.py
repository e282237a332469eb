"""
Linearized transition and Poincaré maps of a Hamiltonian orbit

The flow Jacobian M = D phi^T(z0) is restricted to the energy shell and the
sections {p(0).(q - q(0)) = 0}, {p(T).(q - q(T)) = 0}:

    V_s = ker dH(z_s) ∩ ker (p_s, 0),   v -> M v - tau F(z_T)

with tau chosen so the image lies in V_T again. Both sections get symplectic
bases (e_1..e_d, f_1..f_d) by symplectic Gram-Schmidt, so the result is a
2d x 2d symplectic matrix. When the orbit closes the same basis is used at
both ends and the matrix is the linearized Poincaré map.

Usage:
    from variational.poincare import linearized_transition, nondegeneracy

    lt = linearized_transition(H, orbit, 2 * np.pi)
    lt.matrix, lt.closes
    nondegeneracy(lt.matrix, N_max=12)['verdict']
"""

import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Optional

import numpy as np
from scipy.linalg import null_space

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import HamiltonianSpec, OrbitSegment, flow_jacobian, hamiltonian_jets
from shared.errors import PreconditionError
from shared.symplectic import J, symplectic_defect, symplectic_form, symplectic_gram_schmidt


@dataclass
class LinearizedTransition:
    matrix: np.ndarray
    symplectic_defect: float
    closes: bool
    closing_error: float
    monodromy: np.ndarray
    T: float
    metadata: Dict = field(default_factory=dict)

    @property
    def is_poincare(self) -> bool:
        return self.closes


class TransitionLinearizer:

    CLOSE_TOLERANCE = 1e-8
    CONTACT_THRESHOLD = 1e-10

    def __init__(self, H: HamiltonianSpec, close_tolerance: Optional[float] = None):
        self.H = H
        self.n = H.n
        self.close_tolerance = self.CLOSE_TOLERANCE if close_tolerance is None else close_tolerance

    def _field(self, z: np.ndarray) -> np.ndarray:
        j = hamiltonian_jets(self.H, z[:self.n], z[self.n:], order=1)
        return J(self.n) @ j.grad

    def section_basis(self, z: np.ndarray) -> np.ndarray:
        """
        Symplectic basis of ker dH(z) ∩ ker (p, 0) as columns e_1..e_d, f_1..f_d

        Raises:
            PreconditionError: the flow is tangent to the section at z
        """
        n = self.n
        j = hamiltonian_jets(self.H, z[:n], z[n:], order=1)
        F = J(n) @ j.grad
        p = z[n:]
        contact = float(p @ F[:n])
        if abs(contact) < self.CONTACT_THRESHOLD * max(np.linalg.norm(p) * np.linalg.norm(F[:n]), 1e-300):
            raise PreconditionError('flow is tangent to the section p.(q - q0) = 0')
        constraints = np.vstack([j.grad, np.concatenate([p, np.zeros(n)])])
        V = null_space(constraints)
        return symplectic_gram_schmidt(list(V.T))

    @staticmethod
    def coordinates(u: np.ndarray, basis: np.ndarray) -> np.ndarray:
        """(a, b) with u = sum a_j e_j + b_j f_j"""
        d = basis.shape[1] // 2
        es, fs = basis[:, :d], basis[:, d:]
        a = [symplectic_form(u, fs[:, k]) for k in range(d)]
        b = [-symplectic_form(u, es[:, k]) for k in range(d)]
        return np.array(a + b)

    def run(self, z0, T: float) -> LinearizedTransition:
        n = self.n
        z0 = np.asarray(z0, float)
        jac = flow_jacobian(self.H, z0, T)
        M, z1 = jac['M'], jac['state']
        closing = float(np.max(np.abs(z1 - z0)))
        closes = closing < self.close_tolerance

        V0 = self.section_basis(z0)
        V1 = V0 if closes else self.section_basis(z1)
        F1 = self._field(z1)
        p1 = z1[n:]
        columns = []
        for v in V0.T:
            w = M @ v
            tau = float(p1 @ w[:n]) / float(p1 @ F1[:n])
            columns.append(self.coordinates(w - tau * F1, V1))
        P = np.column_stack(columns)
        return LinearizedTransition(
            matrix=P, symplectic_defect=symplectic_defect(P), closes=closes, closing_error=closing,
            monodromy=M, T=float(T),
            metadata={'flow_symplectic_defect': jac['symplectic_defect'],
                      'computed_at': datetime.now().isoformat()})


def linearized_transition(H: HamiltonianSpec, orbit, T: Optional[float] = None,
                          close_tolerance: Optional[float] = None) -> LinearizedTransition:
    """orbit: an OrbitSegment (its start state and period or length are used) or a phase point"""
    if isinstance(orbit, OrbitSegment):
        z0 = orbit.state(orbit.t0)
        if T is None:
            T = orbit.period if orbit.period is not None else orbit.t1 - orbit.t0
    else:
        z0 = np.asarray(orbit, float)
        if T is None:
            raise PreconditionError('T is required when the orbit is given by a phase point')
    return TransitionLinearizer(H, close_tolerance).run(z0, T)


def nondegeneracy(dP: np.ndarray, N_max: int = 12, tol: float = 1e-6,
                  defect_tolerance: float = 1e-6) -> Dict:
    """
    Roots-of-unity test for a symplectic matrix

    Returns:
        Dict with eigenvalues, min_distance = min_{n <= N_max} min_lambda |lambda^n - 1|,
        the n attaining it, elliptic/hyperbolic counts and the verdict

    Raises:
        PreconditionError: dP is not symplectic within defect_tolerance
    """
    dP = np.asarray(dP, float)
    defect = symplectic_defect(dP)
    if defect > defect_tolerance:
        raise PreconditionError(f'matrix is not symplectic (defect {defect:.2e})')
    eig = np.linalg.eigvals(dP)
    dists = [float(np.min(np.abs(eig ** k - 1.0))) for k in range(1, N_max + 1)]
    best = min(dists)
    # lowest resonant order, else the closest one
    hits = [k for k, dist in enumerate(dists, start=1) if dist < tol]
    best_n = hits[0] if hits else int(np.argmin(dists)) + 1
    on_circle = np.abs(np.abs(eig) - 1.0) < tol
    elliptic = int(np.sum(on_circle & (np.abs(eig.imag) > tol)))
    hyperbolic = int(np.sum(~on_circle))
    return {
        'eigenvalues': eig,
        'min_distance': best,
        'n': best_n,
        'elliptic': elliptic,
        'hyperbolic': hyperbolic,
        'verdict': 'degenerate' if best < tol else 'non-degenerate',
        'symplectic_defect': defect,
        'N_max': N_max,
    }
