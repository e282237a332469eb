"""
Step 3 of the normal form: rectify a vector field near a base curve

Xi(s, yhat) = Flow_X^s(q0 + N yhat) straightens X to e1. Its jets at
(s, 0) come from the variational equations along the base curve:

    Y1' = DX Y1                                  (Y1(0) = N)
    Y2' = DX Y2 + D2X[Y1, Y1]                    (Y2(0) = 0)
    Y3' = DX Y3 + 3 sym D2X[Y2, Y1] + D3X[Y1, Y1, Y1]

Fields expose jets(q, t) -> (X, DX, D2X, D3X or None). The time argument
lets jet-only fields (known along the base curve) answer.

Usage:
    from normal_form.flow_box import ExpressionField, flow_box

    field = ExpressionField(['x', 'y'], ['1', 'eps*x'])
    box = flow_box(field, [0, 0], T=1.0)
    D1, D2, D3 = box.jets(0.5)
    A, B, C = box.inverse_jets(0.5)
"""

import os
import sys
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import hamiltonian_jets
from expr import ExprParser, eval_jet
from shared.errors import IntegrationError, PreconditionError
from shared.load_env import integrator_tolerances

from .straighten import complement_basis
from .symplecto import FiberedSymplecto, TaylorChart, invert_jet


class ExpressionField:
    """Vector field given by one expression per component"""

    def __init__(self, names: Sequence[str], components: Sequence[str]):
        parser = ExprParser(names)
        self.n = len(names)
        if len(components) != self.n:
            raise PreconditionError(f'field needs {self.n} components, got {len(components)}')
        self.components = [parser.parse(c) for c in components]

    def jets(self, q, t=None):
        js = [eval_jet(c, q, order=3) for c in self.components]
        return (np.array([j.value for j in js]), np.array([j.grad for j in js]),
                np.array([j.hess for j in js]), np.array([j.third for j in js]))


class HJField:
    """
    X(q) = H_p(q, dg(q)) for the HJ solution g, known through its jets along
    the characteristic. Third derivatives would need the fourth jet of g and
    are not available.
    """

    def __init__(self, hj):
        self.hj = hj
        self.n = hj.n

    def jets(self, q, t):
        n = self.n
        q_hj, g1, S, T = self.hj.unpack(t)
        j = hamiltonian_jets(self.hj.H, q_hj, g1, order=3)
        L = np.vstack([np.eye(n), S])
        X = j.Hp
        DX = j.hess[n:] @ L
        D2X = np.einsum('mxy,xa,yc->mac', j.third[n:], L, L) + np.einsum('mb,bac->mac', j.Hpp, T)
        return X, DX, D2X, None


class FlowBoxJets:
    """Dense jets of Xi along the base curve s -> Xi(s, 0)"""

    def __init__(self, field, n: int, N: np.ndarray, solution, t, third: bool):
        self.field = field
        self.n = n
        self.N = N
        self.solution = solution
        self.t = t
        self.third = third

    def unpack(self, s: float):
        n, m = self.n, self.n - 1
        y = self.solution(s)
        q = y[:n]
        offset = n
        Y1 = y[offset:offset + n * m].reshape(n, m)
        offset += n * m
        Y2 = y[offset:offset + n * m * m].reshape(n, m, m)
        offset += n * m * m
        Y3 = y[offset:].reshape(n, m, m, m) if self.third else None
        return q, Y1, Y2, Y3

    def base(self, s: float) -> np.ndarray:
        return self.solution(s)[:self.n]

    def jets(self, s: float):
        """D Xi, D^2 Xi, D^3 Xi at (s, 0); D^3 is None without third field jets"""
        n = self.n
        q, Y1, Y2, Y3 = self.unpack(s)
        X, DX, D2X, D3X = self.field.jets(q, s)
        D1 = np.column_stack([X, Y1])
        D2 = np.zeros((n, n, n))
        D2[:, 0, 0] = DX @ X
        D2[:, 0, 1:] = DX @ Y1
        D2[:, 1:, 0] = DX @ Y1
        D2[:, 1:, 1:] = Y2
        if D3X is None or Y3 is None:
            return D1, D2, None
        D3 = np.zeros((n, n, n, n))
        D3[:, 0, 0, 0] = np.einsum('mab,a,b->m', D2X, X, X) + DX @ (DX @ X)
        ssy = np.einsum('mab,aj,b->mj', D2X, Y1, X) + DX @ (DX @ Y1)
        syy = np.einsum('mab,aj,bk->mjk', D2X, Y1, Y1) + np.einsum('ma,ajk->mjk', DX, Y2)
        D3[:, 0, 0, 1:] = D3[:, 0, 1:, 0] = D3[:, 1:, 0, 0] = ssy
        D3[:, 0, 1:, 1:] = D3[:, 1:, 0, 1:] = D3[:, 1:, 1:, 0] = syy
        D3[:, 1:, 1:, 1:] = Y3
        return D1, D2, D3

    def inverse_jets(self, s: float):
        return invert_jet(*self.jets(s))

    def chart(self, s: float) -> TaylorChart:
        """Cubic model of Xi^{-1} around Xi(s, 0)"""
        A, B, C = self.inverse_jets(s)
        x0 = np.zeros(self.n)
        x0[0] = s
        return TaylorChart(self.base(s), x0, A, B, C)

    def symplecto(self, s: float) -> FiberedSymplecto:
        return FiberedSymplecto.homogeneous(self.chart(s), self.n)


class FlowBoxBuilder:
    """Integrates the base curve with its first three variational equations"""

    ZERO_FIELD_THRESHOLD = 1e-10

    def __init__(self, field, n: Optional[int] = None):
        self.field = field
        self.n = n if n is not None else field.n

    def _rhs(self, third: bool):
        n, m = self.n, self.n - 1
        field = self.field

        def rhs(s, y):
            q = y[:n]
            offset = n
            Y1 = y[offset:offset + n * m].reshape(n, m)
            offset += n * m
            Y2 = y[offset:offset + n * m * m].reshape(n, m, m)
            offset += n * m * m
            X, DX, D2X, D3X = field.jets(q, s)
            dY1 = DX @ Y1
            dY2 = np.einsum('ma,ajk->mjk', DX, Y2) + np.einsum('mab,aj,bk->mjk', D2X, Y1, Y1)
            parts = [X, dY1.ravel(), dY2.ravel()]
            if third:
                Y3 = y[offset:].reshape(n, m, m, m)
                mixed = np.einsum('mab,ajk,bl->mjkl', D2X, Y2, Y1)
                dY3 = (np.einsum('ma,ajkl->mjkl', DX, Y3) + mixed
                       + np.transpose(mixed, (0, 1, 3, 2)) + np.transpose(mixed, (0, 3, 2, 1))
                       + np.einsum('mabc,aj,bk,cl->mjkl', D3X, Y1, Y1, Y1))
                parts.append(dY3.ravel())
            return np.concatenate(parts)

        return rhs

    def build(self, q0, T: float, N: Optional[np.ndarray] = None) -> FlowBoxJets:
        """
        Raises:
            PreconditionError: X(q0) vanishes or the section contains X(q0)
            IntegrationError: variational integration failed
        """
        n, m = self.n, self.n - 1
        q0 = np.asarray(q0, float)
        X0, _, _, D3X = self.field.jets(q0, 0.0)
        if np.linalg.norm(X0) < self.ZERO_FIELD_THRESHOLD:
            raise PreconditionError('flow box needs X(0) != 0')
        N = complement_basis(X0) if N is None else np.asarray(N, float)
        if abs(np.linalg.det(np.column_stack([X0, N]))) < self.ZERO_FIELD_THRESHOLD:
            raise PreconditionError('section is tangent to the field at the base point')
        third = D3X is not None
        parts = [q0, N.ravel(), np.zeros(n * m * m)]
        if third:
            parts.append(np.zeros(n * m ** 3))
        rtol, atol = integrator_tolerances()
        result = solve_ivp(self._rhs(third), (0.0, T), np.concatenate(parts), method='DOP853',
                           dense_output=True, rtol=rtol, atol=atol)
        if result.status != 0 or not np.all(np.isfinite(result.y)):
            raise IntegrationError(f'flow-box integration failed: {result.message}')
        return FlowBoxJets(self.field, n, N, result.sol, result.t, third)


def flow_box(field, q0, T: float, N: Optional[np.ndarray] = None) -> FlowBoxJets:
    return FlowBoxBuilder(field).build(q0, T, N)
