"""
Fibered symplectomorphisms of T*R^n

Two kinds, and compositions of them:
- homogeneous Psi_phi(q, p) = (phi(q), Dphi(q)^{-T} p) for a local diffeomorphism phi
- vertical    Psi^g(q, p)  = (q, p + dg(q))               for a function g

A map only needs jets: a homogeneous part is given by q -> (phi, Dphi, D2phi),
a vertical part by q -> (dg, d2g). TaylorChart turns inverse-map jets
computed along an orbit into such a callable around one center point.

Usage:
    from normal_form.symplecto import FiberedSymplecto

    phi = FiberedSymplecto.homogeneous_from_expressions(['x', 'y'], ['x + y^2', 'y'])
    g = FiberedSymplecto.vertical_from_expression(['x', 'y'], 'x*y')
    Psi = phi.after(g)                 # Psi_phi o Psi^g
    Psi.symplectic_defect(q, p)
"""

import os
import sys
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from expr import ExprParser, eval_jet
from shared.errors import PreconditionError
from shared.symplectic import symplectic_defect


def invert_jet(D1: np.ndarray, D2: Optional[np.ndarray] = None, D3: Optional[np.ndarray] = None):
    """
    Jets of the inverse of a map with jets D1, D2, D3 at one point

    D2[i, a, b] and D3[i, a, b, c] are the second and third derivatives of
    component i. Returns (A, B, C) with the same layout for the inverse
    (B, C are None when the corresponding input is None).
    """
    A = np.linalg.inv(D1)
    if D2 is None:
        return A, None, None
    B = -np.einsum('ui,iab,ax,by->uxy', A, D2, A, A)
    if D3 is None:
        return A, B, None
    C3 = np.einsum('iabc,ax,by,cz->ixyz', D3, A, A, A)
    DB = np.einsum('iab,ax,byz->ixyz', D2, A, B)
    C3 = C3 + DB + np.transpose(DB, (0, 2, 1, 3)) + np.transpose(DB, (0, 2, 3, 1))
    C = -np.einsum('ui,ixyz->uxyz', A, C3)
    return A, B, C


@dataclass
class TaylorChart:
    """
    Cubic Taylor model x(q) = x0 + A k + B[k, k]/2 + C[k, k, k]/6 with k = q - q0
    """
    q0: np.ndarray
    x0: np.ndarray
    A: np.ndarray
    B: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None

    def __call__(self, q):
        k = np.asarray(q, float) - self.q0
        x = self.x0 + self.A @ k
        Dx = self.A.copy()
        D2x = np.zeros((len(self.x0),) + self.A.shape[1:] * 2)
        if self.B is not None:
            x = x + 0.5 * np.einsum('iab,a,b->i', self.B, k, k)
            Dx = Dx + np.einsum('iab,b->ia', self.B, k)
            D2x = D2x + self.B
        if self.C is not None:
            x = x + np.einsum('iabc,a,b,c->i', self.C, k, k, k) / 6.0
            Dx = Dx + 0.5 * np.einsum('iabc,b,c->ia', self.C, k, k)
            D2x = D2x + np.einsum('iabc,c->iab', self.C, k)
        return x, Dx, D2x


class FiberedSymplecto:
    """A composition (applied right to left) of homogeneous and vertical maps"""

    def __init__(self, kind: str, n: int, chart: Optional[Callable] = None,
                 dg: Optional[Callable] = None, parts: Optional[List['FiberedSymplecto']] = None):
        if kind not in ('homogeneous', 'vertical', 'composite'):
            raise PreconditionError(f'unknown symplectomorphism kind {kind!r}')
        self.kind = kind
        self.n = n
        self.chart = chart
        self.dg = dg
        self.parts = parts or []

    # Constructors

    @classmethod
    def homogeneous(cls, chart: Callable, n: int) -> 'FiberedSymplecto':
        """chart(q) -> (phi(q), Dphi(q), D2phi(q)) with D2phi[i, a, b] = d_a d_b phi_i"""
        return cls('homogeneous', n, chart=chart)

    @classmethod
    def vertical(cls, dg: Callable, n: int) -> 'FiberedSymplecto':
        """dg(q) -> (grad g(q), Hess g(q))"""
        return cls('vertical', n, dg=dg)

    @classmethod
    def linear(cls, M) -> 'FiberedSymplecto':
        M = np.asarray(M, float)
        n = M.shape[0]
        return cls.homogeneous(lambda q: (M @ np.asarray(q, float), M, np.zeros((n, n, n))), n)

    @classmethod
    def identity(cls, n: int) -> 'FiberedSymplecto':
        return cls.linear(np.eye(n))

    @classmethod
    def homogeneous_from_expressions(cls, names: Sequence[str], components: Sequence[str]) -> 'FiberedSymplecto':
        parser = ExprParser(names)
        comps = [parser.parse(c) for c in components]
        n = len(names)
        if len(comps) != n:
            raise PreconditionError(f'a diffeomorphism of R^{n} needs {n} components')

        def chart(q):
            jets = [eval_jet(c, q, order=2) for c in comps]
            return (np.array([j.value for j in jets]), np.array([j.grad for j in jets]),
                    np.array([j.hess for j in jets]))

        return cls.homogeneous(chart, n)

    @classmethod
    def vertical_from_expression(cls, names: Sequence[str], g: str) -> 'FiberedSymplecto':
        e = ExprParser(names).parse(g)

        def dg(q):
            j = eval_jet(e, q, order=2)
            return j.grad, j.hess

        return cls.vertical(dg, len(names))

    # Composition

    def after(self, first: 'FiberedSymplecto') -> 'FiberedSymplecto':
        """self o first"""
        if first.n != self.n:
            raise PreconditionError('cannot compose maps of different dimensions')
        left = self.parts if self.kind == 'composite' else [self]
        right = first.parts if first.kind == 'composite' else [first]
        return FiberedSymplecto('composite', self.n, parts=right + left)

    def inverse_vertical(self) -> 'FiberedSymplecto':
        """Psi^{-g} for a vertical map"""
        if self.kind != 'vertical':
            raise PreconditionError('only vertical maps invert in closed form')
        dg = self.dg
        return FiberedSymplecto.vertical(lambda q: tuple(-a for a in dg(q)), self.n)

    # Evaluation

    def _single(self, q, p):
        n = self.n
        if self.kind == 'vertical':
            grad, hess = self.dg(q)
            z = np.concatenate([q, p + grad])
            D = np.eye(2 * n)
            D[n:, :n] = hess
            return z, D
        x, Dphi, D2phi = self.chart(q)
        Dinv_T = np.linalg.inv(Dphi).T
        y = Dinv_T @ p
        D = np.zeros((2 * n, 2 * n))
        D[:n, :n] = Dphi
        D[n:, n:] = Dinv_T
        D[n:, :n] = -Dinv_T @ np.einsum('iac,i->ac', D2phi, y)
        return np.concatenate([x, y]), D

    def apply_with_jacobian(self, q, p):
        q = np.asarray(q, float)
        p = np.asarray(p, float)
        if self.kind != 'composite':
            return self._single(q, p)
        z = np.concatenate([q, p])
        D = np.eye(2 * self.n)
        for part in self.parts:
            z, Dp = part._single(z[:self.n], z[self.n:])
            D = Dp @ D
        return z, D

    def apply(self, q, p) -> np.ndarray:
        return self.apply_with_jacobian(q, p)[0]

    def jacobian(self, q, p) -> np.ndarray:
        return self.apply_with_jacobian(q, p)[1]

    def symplectic_defect(self, q, p) -> float:
        """max |DPsi^T J DPsi - J| at (q, p)"""
        return symplectic_defect(self.jacobian(q, p))


def collapse_defect(phi: FiberedSymplecto, g: FiberedSymplecto, q, p) -> float:
    """
    |Psi^g o Psi_phi - Psi_phi o Psi^{g o phi}| at (q, p)

    d(g o phi)(q) = Dphi(q)^T dg(phi(q)), so the right side never needs g o phi
    beyond its gradient and Hessian, both computed here by the chain rule.
    """
    if phi.kind != 'homogeneous' or g.kind != 'vertical':
        raise PreconditionError('collapse needs a homogeneous and a vertical map')
    q = np.asarray(q, float)
    n = phi.n
    chart, dg = phi.chart, g.dg

    def pulled_back(s):
        x, Dphi, D2phi = chart(s)
        grad, hess = dg(x)
        return Dphi.T @ grad, Dphi.T @ hess @ Dphi + np.einsum('i,iab->ab', grad, D2phi)

    left = g.after(phi).apply(q, p)
    right = phi.after(FiberedSymplecto.vertical(pulled_back, n)).apply(q, p)
    return float(np.max(np.abs(left - right)))
