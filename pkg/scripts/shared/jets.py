"""
Polynomial matrix jets in one variable t

A MatrixJet holds Taylor coefficients a_0..a_K of a matrix-valued function
A(t) = sum_k a_k t^k. `order` is the truncation level: coefficients above it
are unknown. order=None marks an exact polynomial (e.g. a constant matrix),
which never limits the order of a product.

CurveJet bundles A(t) in S(d) with its unit null direction n(t); it is the
object the bracket test, the control problem and the genericity scan share.

Usage:
    from shared.jets import MatrixJet, CurveJet

    Y = MatrixJet.from_taylor(coeffs)          # coeffs shape (K+1, r, c)
    Z = Y @ W - W @ Y + W.derivative()
    Z.value(0.0)
"""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np


def _min_order(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class MatrixJet:
    """Truncated (or exact) power series with matrix coefficients"""

    def __init__(self, coeffs, order: Optional[int] = None):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None, None]
        elif coeffs.ndim == 2:
            coeffs = coeffs[None, :, :]
        if coeffs.ndim != 3 or coeffs.shape[0] == 0:
            raise ValueError(f'MatrixJet needs coefficients of shape (K+1, r, c), got {coeffs.shape}')
        if order is not None:
            if order < 0:
                raise ValueError('order must be non-negative')
            if coeffs.shape[0] < order + 1:
                pad = np.zeros((order + 1 - coeffs.shape[0],) + coeffs.shape[1:])
                coeffs = np.concatenate([coeffs, pad])
            coeffs = coeffs[:order + 1]
        self.coeffs = coeffs
        self.order = order

    # Constructors

    @classmethod
    def from_taylor(cls, coeffs, order: Optional[int] = None) -> 'MatrixJet':
        coeffs = np.asarray(coeffs, dtype=float)
        if order is None:
            order = coeffs.shape[0] - 1
        return cls(coeffs, order)

    @classmethod
    def from_derivatives(cls, derivs: Sequence) -> 'MatrixJet':
        """Build from A(0), A'(0), A''(0), ... (divides by k!)"""
        derivs = [np.atleast_2d(np.asarray(D, dtype=float)) for D in derivs]
        coeffs = np.array([D / math.factorial(k) for k, D in enumerate(derivs)])
        return cls(coeffs, len(derivs) - 1)

    @classmethod
    def constant(cls, M) -> 'MatrixJet':
        return cls(np.atleast_2d(np.asarray(M, dtype=float))[None, :, :], None)

    @classmethod
    def identity(cls, n: int) -> 'MatrixJet':
        return cls.constant(np.eye(n))

    @classmethod
    def t_power(cls, k: int, shape=(1, 1)) -> 'MatrixJet':
        coeffs = np.zeros((k + 1,) + tuple(shape))
        coeffs[k] = 1.0
        return cls(coeffs, None)

    # Shape helpers

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def is_exact(self) -> bool:
        return self.order is None

    def __repr__(self):
        return f'MatrixJet(shape={self.shape}, order={self.order}, degree={self.degree})'

    # Arithmetic

    def _truncate(self, coeffs, order):
        if order is not None:
            coeffs = coeffs[:order + 1]
        return MatrixJet(coeffs, order)

    def _aligned(self, other: 'MatrixJet'):
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        a = np.zeros((n,) + self.shape)
        b = np.zeros((n,) + other.shape)
        a[:self.coeffs.shape[0]] = self.coeffs
        b[:other.coeffs.shape[0]] = other.coeffs
        return a, b

    def __add__(self, other):
        if not isinstance(other, MatrixJet):
            other = MatrixJet.constant(np.broadcast_to(other, self.shape))
        a, b = self._aligned(other)
        return self._truncate(a + b, _min_order(self.order, other.order))

    __radd__ = __add__

    def __neg__(self):
        return MatrixJet(-self.coeffs, self.order)

    def __sub__(self, other):
        return self + (-other if isinstance(other, MatrixJet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, MatrixJet):
            if scalar.shape != (1, 1):
                raise ValueError('elementwise jet products need a scalar (1x1) jet')
            return self.scale_by(scalar)
        return MatrixJet(self.coeffs * float(scalar), self.order)

    __rmul__ = __mul__

    def __matmul__(self, other: 'MatrixJet') -> 'MatrixJet':
        if not isinstance(other, MatrixJet):
            other = MatrixJet.constant(other)
        order = _min_order(self.order, other.order)
        top = self.degree + other.degree
        if order is not None:
            top = min(top, order)
        out = np.zeros((top + 1, self.shape[0], other.shape[1]))
        for i in range(min(self.degree, top) + 1):
            for j in range(min(other.degree, top - i) + 1):
                out[i + j] += self.coeffs[i] @ other.coeffs[j]
        return MatrixJet(out, order)

    def scale_by(self, series: 'MatrixJet') -> 'MatrixJet':
        """Multiply every entry by a scalar series"""
        s = MatrixJet(series.coeffs.reshape(-1, 1, 1), series.order)
        order = _min_order(self.order, s.order)
        top = self.degree + s.degree
        if order is not None:
            top = min(top, order)
        out = np.zeros((top + 1,) + self.shape)
        for i in range(min(self.degree, top) + 1):
            for j in range(min(s.degree, top - i) + 1):
                out[i + j] += self.coeffs[i] * s.coeffs[j, 0, 0]
        return MatrixJet(out, order)

    def derivative(self) -> 'MatrixJet':
        if self.degree == 0:
            coeffs = np.zeros((1,) + self.shape)
        else:
            k = np.arange(1, self.degree + 1).reshape(-1, 1, 1)
            coeffs = self.coeffs[1:] * k
        order = None if self.order is None else self.order - 1
        if order is not None and order < 0:
            raise ValueError('cannot differentiate a jet of order 0')
        return MatrixJet(coeffs, order)

    def integral(self) -> 'MatrixJet':
        """Antiderivative vanishing at t=0"""
        k = np.arange(1, self.degree + 2).reshape(-1, 1, 1)
        coeffs = np.concatenate([np.zeros((1,) + self.shape), self.coeffs / k])
        order = None if self.order is None else self.order + 1
        return MatrixJet(coeffs, order)

    def transpose(self) -> 'MatrixJet':
        return MatrixJet(np.transpose(self.coeffs, (0, 2, 1)), self.order)

    @property
    def T(self) -> 'MatrixJet':
        return self.transpose()

    def block(self, rows, cols) -> 'MatrixJet':
        return MatrixJet(self.coeffs[:, rows, cols], self.order)

    def truncated(self, order: int) -> 'MatrixJet':
        return MatrixJet(self.coeffs, _min_order(self.order, order))

    @staticmethod
    def blocks(grid: List[List['MatrixJet']]) -> 'MatrixJet':
        """Assemble a block matrix of jets (like np.block)"""
        order = None
        degree = 0
        for row in grid:
            for J in row:
                order = _min_order(order, J.order)
                degree = max(degree, J.degree)
        if order is not None:
            degree = min(degree, order)
        rows = []
        for row in grid:
            cols = []
            for J in row:
                c = np.zeros((degree + 1,) + J.shape)
                n = min(J.degree, degree) + 1
                c[:n] = J.coeffs[:n]
                cols.append(c)
            rows.append(np.concatenate(cols, axis=2))
        return MatrixJet(np.concatenate(rows, axis=1), order)

    # Evaluation

    def value(self, t0: float = 0.0) -> np.ndarray:
        out = np.zeros(self.shape)
        for c in self.coeffs[::-1]:
            out = out * t0 + c
        return out

    def derivative_at(self, k: int, t0: float = 0.0) -> np.ndarray:
        """k-th derivative of the polynomial model at t0"""
        if self.order is not None and k > self.order:
            raise ValueError(f'jet of order {self.order} has no derivative of order {k}')
        J = self
        for _ in range(k):
            J = J.derivative()
        return J.value(t0)

    def shifted(self, t0: float) -> 'MatrixJet':
        """Re-expand the polynomial model around t0 (same order)"""
        coeffs = np.array([self.derivative_at(k, t0) / math.factorial(k)
                           for k in range(self.degree + 1)])
        return MatrixJet(coeffs, self.order)

    def max_abs_diff(self, other: 'MatrixJet') -> float:
        a, b = self._aligned(other)
        order = _min_order(self.order, other.order)
        if order is not None:
            a, b = a[:order + 1], b[:order + 1]
        return float(np.max(np.abs(a - b))) if a.size else 0.0


# Scalar series helpers (coefficient vectors c_0..c_K)

def series_reciprocal(c: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of 1/c(t) up to `order`; needs c_0 != 0"""
    c = np.zeros(order + 1) if c is None else np.pad(np.asarray(c, float), (0, max(0, order + 1 - len(c))))[:order + 1]
    if c[0] == 0:
        raise ZeroDivisionError('series reciprocal needs a nonzero constant term')
    r = np.zeros(order + 1)
    r[0] = 1.0 / c[0]
    for k in range(1, order + 1):
        r[k] = -np.dot(c[1:k + 1], r[k - 1::-1]) / c[0]
    return r


def series_sqrt(c: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of sqrt(c(t)) up to `order`; needs c_0 > 0"""
    c = np.pad(np.asarray(c, float), (0, max(0, order + 1 - len(c))))[:order + 1]
    if c[0] <= 0:
        raise ValueError('series sqrt needs a positive constant term')
    s = np.zeros(order + 1)
    s[0] = math.sqrt(c[0])
    for k in range(1, order + 1):
        s[k] = (c[k] - np.dot(s[1:k], s[k - 1:0:-1])) / (2.0 * s[0])
    return s


def scalar_jet(coeffs, order: Optional[int]) -> MatrixJet:
    return MatrixJet(np.asarray(coeffs, float).reshape(-1, 1, 1), order)


def normalize_vector_jet(v: MatrixJet) -> MatrixJet:
    """v(t)/|v(t)| as a jet of the same order (v is a column jet)"""
    order = v.order if v.order is not None else v.degree
    sq = (v.T @ v).truncated(order)
    inv = series_reciprocal(series_sqrt(sq.coeffs[:, 0, 0], order), order)
    return v.truncated(order).scale_by(scalar_jet(inv, order))


def orthonormal_completion(n: MatrixJet) -> MatrixJet:
    """
    Orthogonal jet P(t) whose last column is n(t)

    Columns 1..d-1 come from Gram-Schmidt of e_1..e_{d-1} against n and the
    previous columns, so P(0) = I whenever n(0) = e_d.
    """
    d = n.shape[0]
    order = n.order if n.order is not None else n.degree
    n = normalize_vector_jet(n)
    columns = []
    for k in range(d - 1):
        e = np.zeros((d, 1))
        e[k, 0] = 1.0
        u = MatrixJet.constant(e).truncated(order)
        for c in [n] + columns:
            u = u - c.scale_by(c.T @ u)
        columns.append(normalize_vector_jet(u))
    return MatrixJet.blocks([columns + [n]])


class CurveJet:
    """
    A(t) in S(d) with its unit null direction n(t), both as Taylor jets at t=0

    Fields:
        A: MatrixJet of shape (d, d)
        n: MatrixJet of shape (d, 1), or None when unknown
        delta: length of the interval [0, delta] the jet models
    """

    ADMISSIBLE_TOLERANCE = 1e-9

    def __init__(self, A: MatrixJet, n: Optional[MatrixJet] = None, delta: float = 1.0):
        if A.shape[0] != A.shape[1]:
            raise ValueError(f'A must be square, got {A.shape}')
        if n is not None and n.shape != (A.shape[0], 1):
            raise ValueError(f'n must be a column of length {A.shape[0]}, got {n.shape}')
        self.A = A
        self.n = n
        self.delta = float(delta)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def order(self) -> int:
        return self.A.order if self.A.order is not None else self.A.degree

    @classmethod
    def constant(cls, A0, n0=None, delta: float = 1.0) -> 'CurveJet':
        A0 = np.asarray(A0, float)
        n = None if n0 is None else MatrixJet.constant(np.asarray(n0, float).reshape(-1, 1))
        return cls(MatrixJet.constant(A0), n, delta)

    @classmethod
    def from_taylor(cls, A_coeffs, n_coeffs=None, delta: float = 1.0) -> 'CurveJet':
        A = MatrixJet.from_taylor(A_coeffs)
        n = None
        if n_coeffs is not None:
            n_coeffs = np.asarray(n_coeffs, float)
            n = MatrixJet.from_taylor(n_coeffs.reshape(n_coeffs.shape[0], -1, 1))
        return cls(A, n, delta)

    def A_at(self, t: float) -> np.ndarray:
        return self.A.value(t)

    def n_at(self, t: float) -> np.ndarray:
        if self.n is None:
            raise ValueError('this CurveJet carries no null direction')
        return self.n.value(t)[:, 0]

    def conjugated(self, G) -> 'CurveJet':
        G = np.asarray(G, float)
        A = MatrixJet.constant(G) @ self.A @ MatrixJet.constant(G.T)
        n = None if self.n is None else MatrixJet.constant(G) @ self.n
        return CurveJet(A, n, self.delta)

    def admissibility(self, samples: int = 11, tol: Optional[float] = None) -> Dict:
        """
        Check the defining conditions of the admissible class on [0, delta]

        Returns:
            Dict with 'valid', 'errors', 'passed_checks' and the worst residuals
        """
        tol = self.ADMISSIBLE_TOLERANCE if tol is None else tol
        d = self.dim
        errors, passed = [], []
        A0 = self.A_at(0.0)
        target = np.diag([1.0] * (d - 1) + [0.0])
        r0 = float(np.max(np.abs(A0 - target)))
        if r0 > tol:
            errors.append(f'A(0) != diag(I, 0) (residual {r0:.2e})')
        else:
            passed.append('A(0) = diag(I, 0)')
        worst_null, worst_sym, worst_unit = 0.0, 0.0, 0.0
        ranks = []
        for t in np.linspace(0.0, self.delta, samples):
            A = self.A_at(t)
            worst_sym = max(worst_sym, float(np.max(np.abs(A - A.T))))
            s = np.linalg.svd(A, compute_uv=False)
            ranks.append(int(np.sum(s > 1e-9 * max(s[0], 1.0))))
            if self.n is not None:
                n = self.n_at(t)
                worst_null = max(worst_null, float(np.linalg.norm(A @ n)))
                worst_unit = max(worst_unit, abs(float(np.linalg.norm(n)) - 1.0))
        if worst_sym > tol:
            errors.append(f'A(t) not symmetric (residual {worst_sym:.2e})')
        if self.n is not None:
            if worst_null > tol:
                errors.append(f'A(t) n(t) != 0 (residual {worst_null:.2e})')
            else:
                passed.append('A(t) n(t) = 0')
            n0 = self.n_at(0.0)
            e_d = np.zeros(d)
            e_d[-1] = 1.0
            if np.max(np.abs(n0 - e_d)) > tol:
                errors.append('n(0) != e_d')
        if any(r != d - 1 for r in ranks):
            errors.append(f'rank A(t) != d-1 somewhere (ranks {sorted(set(ranks))})')
        else:
            passed.append('rank A(t) = d-1')
        return {
            'valid': not errors,
            'errors': errors,
            'passed_checks': passed,
            'null_residual': worst_null,
            'unit_residual': worst_unit,
        }

    def to_dict(self) -> Dict:
        return {
            'dim': self.dim,
            'delta': self.delta,
            'A_order': self.A.order,
            'A_coeffs': self.A.coeffs.tolist(),
            'n_order': None if self.n is None else self.n.order,
            'n_coeffs': None if self.n is None else self.n.coeffs[:, :, 0].tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'CurveJet':
        A = MatrixJet(np.array(data['A_coeffs']), data.get('A_order'))
        n = None
        if data.get('n_coeffs') is not None:
            nc = np.array(data['n_coeffs'])
            n = MatrixJet(nc[:, :, None], data.get('n_order'))
        return cls(A, n, data.get('delta', 1.0))
