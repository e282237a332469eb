"""
Forward-mode jets of expressions up to third order

A JetValue carries value, gradient, Hessian and (on request) the totally
symmetric third-derivative tensor of a scalar function at one point. Jets
combine through arithmetic and through univariate composition, so
eval_jet walks the tree once with no truncation error.

Usage:
    from expr.jet import eval_jet

    j = eval_jet(e, [3.0, 5.0], order=2)
    j.value, j.grad, j.hess
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .nodes import Const, Var, Neg, Add, Sub, Mul, Div, Pow, Func

import os
import sys

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import ExprDomainError


def _sym3(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    """a_i B_jk + a_j B_ik + a_k B_ij"""
    return (np.einsum('i,jk->ijk', a, B) + np.einsum('j,ik->ijk', a, B)
            + np.einsum('k,ij->ijk', a, B))


@dataclass
class JetValue:
    value: float
    grad: np.ndarray
    hess: np.ndarray
    third: Optional[np.ndarray]
    order: int

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    @classmethod
    def constant(cls, c: float, n: int, order: int) -> 'JetValue':
        return cls(float(c), np.zeros(n), np.zeros((n, n)),
                   np.zeros((n, n, n)) if order >= 3 else None, order)

    @classmethod
    def variable(cls, i: int, x: float, n: int, order: int) -> 'JetValue':
        j = cls.constant(x, n, order)
        j.grad[i] = 1.0
        return j

    def __add__(self, other: 'JetValue') -> 'JetValue':
        third = self.third + other.third if self.order >= 3 else None
        return JetValue(self.value + other.value, self.grad + other.grad,
                        self.hess + other.hess, third, self.order)

    def __neg__(self) -> 'JetValue':
        third = -self.third if self.order >= 3 else None
        return JetValue(-self.value, -self.grad, -self.hess, third, self.order)

    def __sub__(self, other: 'JetValue') -> 'JetValue':
        return self + (-other)

    def __mul__(self, other: 'JetValue') -> 'JetValue':
        u, v = self, other
        hess = (u.value * v.hess + v.value * u.hess
                + np.outer(u.grad, v.grad) + np.outer(v.grad, u.grad))
        third = None
        if self.order >= 3:
            third = (u.value * v.third + v.value * u.third
                     + _sym3(u.grad, v.hess) + _sym3(v.grad, u.hess))
        return JetValue(u.value * v.value, u.value * v.grad + v.value * u.grad,
                        hess, third, self.order)

    def scale(self, c: float) -> 'JetValue':
        third = c * self.third if self.order >= 3 else None
        return JetValue(c * self.value, c * self.grad, c * self.hess, third, self.order)

    def compose(self, f0: float, f1: float, f2: float, f3: float) -> 'JetValue':
        """Jet of f(u) given f and its first three derivatives at u.value"""
        g, H = self.grad, self.hess
        hess = f1 * H + f2 * np.outer(g, g)
        third = None
        if self.order >= 3:
            third = f1 * self.third + f2 * _sym3(g, H) + f3 * np.einsum('i,j,k->ijk', g, g, g)
        return JetValue(f0, f1 * g, hess, third, self.order)


def reciprocal(v: JetValue) -> JetValue:
    x = v.value
    if x == 0.0:
        raise ExprDomainError('division by zero')
    try:
        return v.compose(1.0 / x, -1.0 / x ** 2, 2.0 / x ** 3, -6.0 / x ** 4)
    except (OverflowError, ZeroDivisionError):
        raise ExprDomainError(f'reciprocal of {x!r} overflows') from None


def _power(u: JetValue, n: int) -> JetValue:
    x = u.value
    if n == 0:
        return JetValue.constant(1.0, u.dim, u.order)
    if x == 0.0 and n < 0:
        raise ExprDomainError('zero raised to a negative power')

    def term(k):
        # n (n-1) .. (n-k+1) x^(n-k), zero when the falling factorial vanishes
        coeff = 1.0
        for m in range(k):
            coeff *= (n - m)
        if coeff == 0.0:
            return 0.0
        return coeff * x ** (n - k)

    try:
        return u.compose(term(0), term(1), term(2), term(3))
    except OverflowError:
        raise ExprDomainError(f'power {n} of {x!r} overflows') from None


def _function(name: str, u: JetValue) -> JetValue:
    x = u.value
    if not math.isfinite(x):
        raise ExprDomainError(f'{name} of non-finite argument {x!r}')
    if name == 'sin':
        s, c = math.sin(x), math.cos(x)
        return u.compose(s, c, -s, -c)
    if name == 'cos':
        s, c = math.sin(x), math.cos(x)
        return u.compose(c, -s, -c, s)
    if name == 'exp':
        try:
            ex = math.exp(x)
        except OverflowError:
            raise ExprDomainError(f'exp of {x!r} overflows') from None
        return u.compose(ex, ex, ex, ex)
    if name == 'sqrt':
        if x < 0.0:
            raise ExprDomainError(f'sqrt of negative number {x!r}')
        if x == 0.0:
            if u.order >= 1 and np.any(u.grad != 0.0):
                raise ExprDomainError('sqrt is not differentiable at 0')
            return JetValue.constant(0.0, u.dim, u.order)
        r = math.sqrt(x)
        return u.compose(r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x))
    raise ExprDomainError(f'unknown function {name}')


def eval_jet(e, q: Sequence[float], order: int = 2) -> JetValue:
    """
    Evaluate an expression with exact derivatives

    Args:
        e: Parsed expression
        q: Point (one coordinate per variable of the parser's name table)
        order: 0, 1, 2 or 3; the third tensor is only filled for order 3

    Returns:
        JetValue at q

    Raises:
        ExprDomainError: division by zero, sqrt of a negative number, overflow
    """
    if order not in (0, 1, 2, 3):
        raise ValueError('order must be 0, 1, 2 or 3')
    q = np.asarray(q, dtype=float)
    n = q.shape[0]

    def walk(node) -> JetValue:
        kind = type(node)
        if kind is Const:
            return JetValue.constant(node.value, n, order)
        if kind is Var:
            if node.index >= n:
                raise ExprDomainError(f'variable {node.name} outside a point of dimension {n}')
            return JetValue.variable(node.index, q[node.index], n, order)
        if kind is Neg:
            return -walk(node.operand)
        if kind is Add:
            return walk(node.left) + walk(node.right)
        if kind is Sub:
            return walk(node.left) - walk(node.right)
        if kind is Mul:
            return walk(node.left) * walk(node.right)
        if kind is Div:
            return walk(node.left) * reciprocal(walk(node.right))
        if kind is Pow:
            return _power(walk(node.base), node.exponent)
        if kind is Func:
            return _function(node.name, walk(node.arg))
        raise TypeError(f'not an expression node: {node!r}')

    jet = walk(e)
    if order < 3:
        jet.third = None
    parts = [jet.grad, jet.hess] + ([jet.third] if jet.third is not None else [])
    if not math.isfinite(jet.value) or not all(np.all(np.isfinite(a)) for a in parts):
        raise ExprDomainError(f'non-finite jet at {q.tolist()}')
    return jet


def evaluate(e, q: Sequence[float]) -> float:
    """Value only; same domain checks as eval_jet"""
    def walk(node) -> float:
        kind = type(node)
        if kind is Const:
            return node.value
        if kind is Var:
            return float(q[node.index])
        if kind is Neg:
            return -walk(node.operand)
        if kind is Add:
            return walk(node.left) + walk(node.right)
        if kind is Sub:
            return walk(node.left) - walk(node.right)
        if kind is Mul:
            return walk(node.left) * walk(node.right)
        if kind is Div:
            den = walk(node.right)
            if den == 0.0:
                raise ExprDomainError('division by zero')
            return walk(node.left) / den
        if kind is Pow:
            base = walk(node.base)
            if base == 0.0 and node.exponent < 0:
                raise ExprDomainError('zero raised to a negative power')
            try:
                return base ** node.exponent
            except OverflowError:
                raise ExprDomainError(f'power {node.exponent} of {base!r} overflows') from None
        if kind is Func:
            x = walk(node.arg)
            if not math.isfinite(x):
                raise ExprDomainError(f'{node.name} of non-finite argument {x!r}')
            if node.name == 'sqrt':
                if x < 0.0:
                    raise ExprDomainError(f'sqrt of negative number {x!r}')
                return math.sqrt(x)
            try:
                return {'sin': math.sin, 'cos': math.cos, 'exp': math.exp}[node.name](x)
            except OverflowError:
                raise ExprDomainError(f'{node.name} of {x!r} overflows') from None
        raise TypeError(f'not an expression node: {node!r}')

    value = walk(e)
    if not math.isfinite(value):
        raise ExprDomainError(f'non-finite value at {list(q)}')
    return value


def compose_jet(outer: JetValue, inner: Sequence[JetValue]) -> JetValue:
    """
    Chain rule for f(g_1(x), .., g_m(x))

    Args:
        outer: Jet of f at y = (g_1(x), .., g_m(x)), in the m variables of f
        inner: Jets of g_a at x, all of the same dimension and order

    Returns:
        Jet of the composite at x, order min(outer.order, inner order)
    """
    order = min(outer.order, min(j.order for j in inner))
    G = np.array([j.grad for j in inner])
    Hs = np.array([j.hess for j in inner])
    grad = outer.grad @ G
    hess = (np.einsum('a,aij->ij', outer.grad, Hs)
            + np.einsum('ab,ai,bj->ij', outer.hess, G, G))
    third = None
    if order >= 3:
        Ts = np.array([j.third for j in inner])
        third = (np.einsum('a,aijk->ijk', outer.grad, Ts)
                 + np.einsum('ab,ai,bjk->ijk', outer.hess, G, Hs)
                 + np.einsum('ab,aj,bik->ijk', outer.hess, G, Hs)
                 + np.einsum('ab,ak,bij->ijk', outer.hess, G, Hs)
                 + np.einsum('abc,ai,bj,ck->ijk', outer.third, G, G, G))
    return JetValue(outer.value, grad, hess, third, order)
