"""
Parametric family of admissible curves in the normalized frame

Base data is an orthogonal jet P(t) with P(0) = I and last column n(t), and
Lambda_0(t) = diag(lambda_1(t), ..., lambda_{d-1}(t), 0) with lambda_i(0) = 1.
For G = [Gbar 0; 0 1] orthogonal, mu in R^{d-1} and alpha in S(d-1):

    P_G(t) = G P(t) G^T
    Lambda(t) = Lambda_0(t) + t Lambda_1 + 1/2 t^2 [alpha 0; 0 0]
    Lambda_1 = diag(mu_i - lambda_i'(0), 0)
    A_{G,mu,alpha}(t) = P_G(t) Lambda(t) P_G(t)^T

With alpha = alpha_of(G, mu) the derivatives at 0 take the normalized shape

    A'(0)  = [Gamma  -v; -v^T 0]           v = Gbar vbar,  n'(0) = (vbar, 0)
    A''(0) = [0 w] + [0; w^T]              w = -G n''(0) - 2 [Gamma v; 0]

Usage:
    from formulas.family import ParamFamily, random_base

    P, Lam0 = random_base(3, np.random.default_rng(0))
    fam = ParamFamily(G, mu, P, Lam0)
    fam.curve()             # CurveJet of A_{G,mu,alpha(G,mu)}
    fam.normalized()        # NormalizedData(mu, v, w)
"""

import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import PreconditionError
from shared.jets import CurveJet, MatrixJet, orthonormal_completion
from shared.symplectic import sym_basis

from .closed_forms import NormalizedData

PRECONDITION_TOLERANCE = 1e-10
DEFAULT_ORDER = 6


@dataclass(frozen=True)
class IndexSets:
    """
    0-based index sets: J1 = {i <= j} minus (d-1, d-1), J2 = {i <= j <= d-2}

    E(i, j) = F_ij + F_ji, so E(i, i) = 2 F_ii.
    """
    d: int

    @property
    def J1(self) -> List[Tuple[int, int]]:
        m = self.d - 1
        return [(i, j) for i in range(self.d) for j in range(i, self.d) if (i, j) != (m, m)]

    @property
    def J2(self) -> List[Tuple[int, int]]:
        return [(i, j) for i in range(self.d - 1) for j in range(i, self.d - 1)]

    def F(self, i: int, j: int) -> np.ndarray:
        out = np.zeros((self.d, self.d))
        out[i, j] = 1.0
        return out

    def E(self, i: int, j: int) -> np.ndarray:
        return self.F(i, j) + self.F(j, i)

    def in_s_star(self, S, tol: float = PRECONDITION_TOLERANCE) -> bool:
        S = np.asarray(S, float)
        return bool(np.max(np.abs(S - S.T)) <= tol and abs(S[-1, -1]) <= tol)

    def basis(self):
        return sym_basis(self.d)


def check_conjugation_data(P: MatrixJet, Lam: MatrixJet, tol: float = PRECONDITION_TOLERANCE):
    """
    Raises:
        PreconditionError: P is not an orthogonal jet through I to second
            order, or Lambda is not [D 0; 0 0] with D(0) = I
    """
    d = P.shape[0]
    if any(J.order is not None and J.order < 2 for J in (P, Lam)):
        raise PreconditionError('P and Lambda need jets of order >= 2')
    if np.max(np.abs(P.value(0.0) - np.eye(d))) > tol:
        raise PreconditionError('P(0) must be the identity')
    P1 = P.derivative_at(1)
    if np.max(np.abs(P1 + P1.T)) > tol:
        raise PreconditionError("P'(0) must be skew-symmetric")
    gram = (P.T @ P).truncated(2)
    if np.max(np.abs(gram.coeffs[1:3])) > tol:
        raise PreconditionError('P(t) is not orthogonal to second order')
    base = np.eye(d)
    base[-1, -1] = 0.0
    if np.max(np.abs(Lam.value(0.0) - base)) > tol:
        raise PreconditionError('Lambda(0) must be diag(I, 0)')
    for k in range(3):
        L = Lam.derivative_at(k)
        if np.max(np.abs(L - L.T)) > tol:
            raise PreconditionError('Lambda(t) must be symmetric')
        if np.max(np.abs(L[-1])) > tol:
            raise PreconditionError('Lambda(t) must vanish on the last row and column')


def derivatives_of_conjugated(P: MatrixJet, Lam: MatrixJet) -> Tuple[np.ndarray, np.ndarray]:
    """
    A'(0), A''(0) of A = P Lambda P^T from the block data of P and Lambda

    With P'(0) = [Q v; -v^T 0], P''(0) last column r, D' the top block of Lambda'(0):

        A'(0)  = [D' -v; -v^T 0]
        A''(0) = -[0 r] - [0; r^T] - 2 [v v^T 0; 0 0]
                 + 2 [Q D' - D' Q, -D' v; -v^T D', 0] + Lambda''(0)
    """
    check_conjugation_data(P, Lam)
    d = P.shape[0]
    P1, P2 = P.derivative_at(1), P.derivative_at(2)
    L1, L2 = Lam.derivative_at(1), Lam.derivative_at(2)
    Q, v = P1[:-1, :-1], P1[:-1, -1]
    D1 = L1[:-1, :-1]

    A_dot = np.zeros((d, d))
    A_dot[:-1, :-1] = D1
    A_dot[:-1, -1] = -v
    A_dot[-1, :-1] = -v

    r = P2[:, -1]
    A_ddot = L2.copy()
    A_ddot[:, -1] -= r
    A_ddot[-1, :] -= r
    A_ddot[:-1, :-1] += -2.0 * np.outer(v, v) + 2.0 * (Q @ D1 - D1 @ Q)
    A_ddot[:-1, -1] -= 2.0 * D1 @ v
    A_ddot[-1, :-1] -= 2.0 * v @ D1
    return A_dot, A_ddot


def conjugated_oracle(P: MatrixJet, Lam: MatrixJet) -> Tuple[np.ndarray, np.ndarray]:
    """Same derivatives by multiplying the jets out"""
    A = P @ Lam @ P.T
    return A.derivative_at(1), A.derivative_at(2)


def check_fixing_rotation(G, d: int) -> np.ndarray:
    G = np.asarray(G, float)
    if G.shape != (d, d):
        raise PreconditionError(f'G must be {d}x{d}')
    if np.max(np.abs(G @ G.T - np.eye(d))) > PRECONDITION_TOLERANCE:
        raise PreconditionError('G is not orthogonal')
    e_d = np.eye(d)[-1]
    if np.max(np.abs(G @ e_d - e_d)) > PRECONDITION_TOLERANCE:
        raise PreconditionError('G does not fix e_d')
    return G


def _embedded(M: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros((d, d))
    out[:-1, :-1] = M
    return out


def _times_t_power(M: np.ndarray, k: int) -> MatrixJet:
    return MatrixJet.constant(M).scale_by(MatrixJet.t_power(k))


def alpha_of(G, mu, P: MatrixJet, Lam0: MatrixJet) -> np.ndarray:
    """alpha(G, mu) = 2 v v^T - 2 (Q Gamma - Gamma Q) - D0''(0), Q the top block of P_G'(0)"""
    d = P.shape[0]
    G = check_fixing_rotation(G, d)
    Gamma = np.diag(np.asarray(mu, float))
    PG1 = G @ P.derivative_at(1) @ G.T
    Q, v = PG1[:-1, :-1], PG1[:-1, -1]
    D2 = Lam0.derivative_at(2)[:-1, :-1]
    return 2.0 * np.outer(v, v) - 2.0 * (Q @ Gamma - Gamma @ Q) - D2


@dataclass
class ParamFamily:
    G: np.ndarray
    mu: np.ndarray
    P: MatrixJet
    Lam0: MatrixJet
    alpha: Optional[np.ndarray] = None
    delta: float = 1.0
    order: int = field(init=False)

    def __post_init__(self):
        d = self.P.shape[0]
        self.G = check_fixing_rotation(self.G, d)
        self.mu = np.asarray(self.mu, float)
        if self.mu.shape != (d - 1,):
            raise PreconditionError(f'mu must have {d - 1} entries')
        check_conjugation_data(self.P, self.Lam0)
        off = self.Lam0.coeffs - np.array([np.diag(np.diag(c)) for c in self.Lam0.coeffs])
        if np.max(np.abs(off)) > PRECONDITION_TOLERANCE:
            raise PreconditionError('Lambda_0(t) must be diagonal')
        orders = [J.order for J in (self.P, self.Lam0) if J.order is not None]
        self.order = min(orders) if orders else DEFAULT_ORDER
        if self.alpha is None:
            self.alpha = alpha_of(self.G, self.mu, self.P, self.Lam0)
        self.alpha = np.asarray(self.alpha, float)

    @property
    def d(self) -> int:
        return self.P.shape[0]

    @property
    def Gamma(self) -> np.ndarray:
        return np.diag(self.mu)

    @property
    def n(self) -> MatrixJet:
        return self.P.block(slice(None), slice(self.d - 1, self.d))

    @property
    def v_bar(self) -> np.ndarray:
        return self.n.derivative_at(1)[:-1, 0]

    @property
    def v(self) -> np.ndarray:
        return self.G[:-1, :-1] @ self.v_bar

    @property
    def w(self) -> np.ndarray:
        w = -self.G @ self.n.derivative_at(2)[:, 0]
        w[:-1] -= 2.0 * self.mu * self.v
        return w

    def P_G(self) -> MatrixJet:
        return MatrixJet.constant(self.G) @ self.P @ MatrixJet.constant(self.G.T)

    def Lambda(self) -> MatrixJet:
        lam_dot = np.diag(self.Lam0.derivative_at(1))[:-1]
        L1 = _embedded(np.diag(self.mu - lam_dot), self.d)
        L2 = _embedded(0.5 * self.alpha, self.d)
        return (self.Lam0 + _times_t_power(L1, 1) + _times_t_power(L2, 2)).truncated(self.order)

    def A(self) -> MatrixJet:
        PG = self.P_G()
        A = (PG @ self.Lambda() @ PG.T).truncated(self.order)
        return MatrixJet(0.5 * (A.coeffs + np.transpose(A.coeffs, (0, 2, 1))), A.order)

    def curve(self) -> CurveJet:
        n = (MatrixJet.constant(self.G) @ self.n).truncated(self.order)
        return CurveJet(self.A(), n, self.delta)

    def normalized(self) -> NormalizedData:
        return NormalizedData(self.mu.copy(), self.v, self.w)


def random_base(d: int, rng: np.random.Generator, order: int = 6,
                scale: float = 1.0) -> Tuple[MatrixJet, MatrixJet]:
    """
    Random base data (P, Lambda_0)

    n(t) = normalize(e_d + t vbar + t^2 u) with u orthogonal to e_d, P its
    orthonormal completion; lambda_i(t) = 1 + sum_k c_ik t^k.
    """
    raw = np.zeros((3, d, 1))
    raw[0, -1, 0] = 1.0
    raw[1, :-1, 0] = rng.normal(scale=scale, size=d - 1)
    raw[2, :-1, 0] = rng.normal(scale=scale, size=d - 1)
    P = orthonormal_completion(MatrixJet(raw, order))
    coeffs = np.zeros((order + 1, d, d))
    for k in range(order + 1):
        diag = np.ones(d - 1) if k == 0 else rng.normal(scale=scale, size=d - 1)
        coeffs[k, :-1, :-1] = np.diag(diag)
    return P, MatrixJet(coeffs, order)


def random_conjugation_data(d: int, rng: np.random.Generator,
                            order: int = 4) -> Tuple[MatrixJet, MatrixJet]:
    """Orthogonal P through I and a general Lambda = [D 0; 0 0] (D not diagonal)"""
    P, _ = random_base(d, rng, order)
    coeffs = np.zeros((order + 1, d, d))
    coeffs[0, :-1, :-1] = np.eye(d - 1)
    for k in range(1, order + 1):
        S = rng.normal(size=(d - 1, d - 1))
        coeffs[k, :-1, :-1] = 0.5 * (S + S.T)
    return P, MatrixJet(coeffs, order)


def random_family(d: int, rng: np.random.Generator, order: int = 6) -> ParamFamily:
    """ParamFamily with Haar Gbar, normal mu and random base data"""
    P, Lam0 = random_base(d, rng, order)
    Q, R = np.linalg.qr(rng.normal(size=(d - 1, d - 1)))
    G = np.eye(d)
    G[:-1, :-1] = Q * np.sign(np.diag(R))
    return ParamFamily(G, rng.normal(size=d - 1), P, Lam0)
