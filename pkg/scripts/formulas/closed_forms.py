"""
Closed forms of the bracket building blocks in the normalized frame

In the frame A(0) = diag(I, 0), A'(0) = [Gamma -v; -v^T 0],
A''(0) = [0 w] + [0; w^T] the blocks of B^2, B^3, B^4 are

    xi = A E,   eta = A' E,   zeta = A'' E,   gamma = A E A,   kappa = A' E A + A E A'

    B^2 = [xi 0; 0 -xi^T],  B^3 = [eta -2 gamma; 0 -eta^T],  B^4 = [zeta -3 kappa; 0 -zeta^T]

basis_matrices writes each of them in the F/E basis; literal_matrices
multiplies them out. Indices are 0-based, m = d - 1 is the null slot.

Usage:
    from formulas.closed_forms import NormalizedData, basis_matrices, aggregate_sums

    data = NormalizedData.random(4, np.random.default_rng(0))
    basis_matrices(0, 3, data)['kappa']
    diag_block, upper_right = aggregate_sums(a, b, c, data)
"""

import os
import sys
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import PreconditionError

KINDS = ('xi', 'eta', 'zeta', 'gamma', 'kappa')


@dataclass
class NormalizedData:
    """mu, v in R^{d-1}; w in R^d (w[-1] is w_d)"""
    mu: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, float)
        self.v = np.asarray(self.v, float)
        self.w = np.asarray(self.w, float)
        if self.mu.shape != self.v.shape or self.w.shape != (self.mu.size + 1,):
            raise PreconditionError('normalized data needs mu, v of length d-1 and w of length d')

    @property
    def d(self) -> int:
        return self.w.size

    @property
    def A0(self) -> np.ndarray:
        A = np.eye(self.d)
        A[-1, -1] = 0.0
        return A

    @property
    def A_dot(self) -> np.ndarray:
        A = np.zeros((self.d, self.d))
        A[:-1, :-1] = np.diag(self.mu)
        A[:-1, -1] = -self.v
        A[-1, :-1] = -self.v
        return A

    @property
    def A_ddot(self) -> np.ndarray:
        A = np.zeros((self.d, self.d))
        A[:, -1] += self.w
        A[-1, :] += self.w
        return A

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> 'NormalizedData':
        return cls(rng.normal(size=d - 1), rng.normal(size=d - 1), rng.normal(size=d))

    @classmethod
    def from_matrices(cls, A0, A_dot, A_ddot, tol: float = 1e-10) -> 'NormalizedData':
        """
        Raises:
            PreconditionError: the matrices are not in the normalized shape
        """
        A0, A_dot, A_ddot = (np.asarray(M, float) for M in (A0, A_dot, A_ddot))
        data = cls(np.diag(A_dot)[:-1], -A_dot[:-1, -1], A_ddot[:, -1] * 1.0)
        data.w[-1] = 0.5 * A_ddot[-1, -1]
        for name, got, want in (('A(0)', A0, data.A0), ("A'(0)", A_dot, data.A_dot),
                                ("A''(0)", A_ddot, data.A_ddot)):
            if np.max(np.abs(got - want)) > tol:
                raise PreconditionError(f'{name} is not in the normalized frame')
        return data


def _F(d: int, i: int, j: int) -> np.ndarray:
    out = np.zeros((d, d))
    out[i, j] = 1.0
    return out


def _E(d: int, i: int, j: int) -> np.ndarray:
    return _F(d, i, j) + _F(d, j, i)


def _check_index(i: int, j: int, d: int) -> Tuple[int, int]:
    if not (0 <= i < d and 0 <= j < d):
        raise PreconditionError(f'index ({i}, {j}) out of range for d = {d}')
    return (i, j) if i <= j else (j, i)


def basis_matrices(i: int, j: int, data: NormalizedData) -> Dict[str, np.ndarray]:
    """xi, eta, zeta, gamma, kappa for E_ij from the F/E expansions"""
    d = data.d
    i, j = _check_index(i, j, d)
    m = d - 1
    mu, v, w = data.mu, data.v, data.w
    F = lambda a, b: _F(d, a, b)
    E = lambda a, b: _E(d, a, b)
    zero = np.zeros((d, d))

    if j < m:
        xi = E(i, j)
        eta = mu[i] * F(i, j) + mu[j] * F(j, i) - v[i] * F(m, j) - v[j] * F(m, i)
        zeta = w[i] * F(m, j) + w[j] * F(m, i)
        gamma = E(i, j)
        kappa = (mu[i] + mu[j]) * E(i, j) - v[i] * E(j, m) - v[j] * E(i, m)
    elif i < m:
        xi = F(i, m)
        eta = mu[i] * F(i, m) - v[i] * F(m, m) - sum(v[k] * F(k, i) for k in range(m))
        zeta = sum(w[k] * F(k, i) for k in range(m)) + w[i] * F(m, m) + 2 * w[m] * F(m, i)
        gamma = zero
        kappa = -sum(v[k] * E(k, i) for k in range(m))
    else:
        xi = zero
        eta = -2 * sum(v[k] * F(k, m) for k in range(m))
        zeta = 2 * sum(w[k] * F(k, m) for k in range(m)) + 4 * w[m] * F(m, m)
        gamma = zero
        kappa = zero
    return {'xi': xi, 'eta': eta, 'zeta': zeta, 'gamma': gamma, 'kappa': kappa}


def literal_matrices(i: int, j: int, data: NormalizedData) -> Dict[str, np.ndarray]:
    d = data.d
    i, j = _check_index(i, j, d)
    A, Ad, Add = data.A0, data.A_dot, data.A_ddot
    E = _E(d, i, j)
    return {
        'xi': A @ E,
        'eta': Ad @ E,
        'zeta': Add @ E,
        'gamma': A @ E @ A,
        'kappa': Ad @ E @ A + A @ E @ Ad,
    }


def diag_sum(s, w) -> np.ndarray:
    """
    sbar_i(w) = 2 s_ii w_i + sum_{j != i} s_ij w_j

    s is read from its upper triangle and extended symmetrically, so that
    sum_{i<=j} s_ij (w_i x_j + x_i w_j) = sum_i sbar_i(w) x_i.
    """
    U = np.triu(np.asarray(s, float))
    return (U + U.T) @ np.asarray(w, float)


def _coefficients(c, d: int) -> np.ndarray:
    c = np.triu(np.asarray(c, float))
    if c.shape != (d, d):
        raise PreconditionError(f'coefficients must be a {d}x{d} upper-triangular array')
    if c[-1, -1] != 0.0:
        raise PreconditionError('(d, d) is not in J1, its coefficient must be 0')
    return c


def aggregate_sums(a, b, c, data: NormalizedData) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form totals over J1

        diagonal block:  sum a_ij xi_ij + b_ij eta_ij + c_ij zeta_ij
        upper right:     sum 2 b_ij gamma_ij + 3 c_ij kappa_ij

    Coefficients are (d, d) arrays read on i <= j; entry (d-1, d-1) must be 0.
    """
    d = data.d
    m = d - 1
    mu, v, w = data.mu, data.v, data.w
    a, b, c = (_coefficients(x, d) for x in (a, b, c))
    b_col, c_col = b[:m, m], c[:m, m]
    b_bar_v = diag_sum(b[:m, :m], v)
    c_bar_v = diag_sum(c[:m, :m], v)
    c_bar_w = diag_sum(c[:m, :m], w[:m])

    D = np.zeros((d, d))
    U = np.zeros((d, d))
    for i in range(m):
        for j in range(i + 1, m):
            D[i, j] = a[i, j] + mu[i] * b[i, j] - b_col[j] * v[i] + w[i] * c_col[j]
            D[j, i] = a[i, j] + mu[j] * b[i, j] - b_col[i] * v[j] + w[j] * c_col[i]
            u = 2 * b[i, j] + 3 * ((mu[i] + mu[j]) * c[i, j] - c_col[i] * v[j] - c_col[j] * v[i])
            U[i, j] = U[j, i] = u
        D[i, i] = 2 * a[i, i] + 2 * mu[i] * b[i, i] - b_col[i] * v[i] + w[i] * c_col[i]
        D[i, m] = a[i, m] + mu[i] * b_col[i]
        D[m, i] = -b_bar_v[i] + c_bar_w[i] + 2 * c_col[i] * w[m]
        # E_ii = 2 F_ii
        U[i, i] = 2 * (2 * b[i, i] + 3 * (2 * mu[i] * c[i, i] - c_col[i] * v[i]))
        U[i, m] = U[m, i] = -3 * c_bar_v[i]
    D[m, m] = -b_col @ v + c_col @ w[:m]
    return D, U


def naive_sums(a, b, c, data: NormalizedData) -> Tuple[np.ndarray, np.ndarray]:
    """aggregate_sums by adding up literal_matrices term by term"""
    d = data.d
    a, b, c = (_coefficients(x, d) for x in (a, b, c))
    D = np.zeros((d, d))
    U = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            if (i, j) == (d - 1, d - 1):
                continue
            lit = literal_matrices(i, j, data)
            D += a[i, j] * lit['xi'] + b[i, j] * lit['eta'] + c[i, j] * lit['zeta']
            U += 2 * b[i, j] * lit['gamma'] + 3 * c[i, j] * lit['kappa']
    return D, U


def closed_form_error(data: NormalizedData) -> float:
    """Largest entry gap between basis_matrices and literal_matrices over all i <= j"""
    worst = 0.0
    for i in range(data.d):
        for j in range(i, data.d):
            closed, lit = basis_matrices(i, j, data), literal_matrices(i, j, data)
            worst = max(worst, max(float(np.max(np.abs(closed[k] - lit[k]))) for k in KINDS))
    return worst
