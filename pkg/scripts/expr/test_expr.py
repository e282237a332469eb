#!/usr/bin/env python3
"""
Test expression parsing and jet evaluation

Run with pytest, or directly: python scripts/expr/test_expr.py
"""

import sys
import os

import numpy as np
from numpy.testing import assert_allclose

# Add scripts directory to path for cross-folder imports
current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from expr import (ExprParser, Const, Var, Add, Mul, Pow, Func, Neg, Sub, to_text,
                  substitute, eval_jet, evaluate, compose_jet)
from shared.errors import ExprSyntaxError, ExprNameError, ExprArityError, ExprDomainError


PARSER = ExprParser(dim=3)


def _raises(exc_type, fn, *args):
    try:
        fn(*args)
    except exc_type as e:
        return e
    raise AssertionError(f'expected {exc_type.__name__}')


def test_precedence_of_sum_and_product():
    e = PARSER.parse('q1 + 2*q2')
    assert e == Add(Var(0, 'q1'), Mul(Const(2.0), Var(1, 'q2')))


def test_function_power():
    assert PARSER.parse('sin(q3)^2') == Pow(Func('sin', Var(2, 'q3')), 2)


def test_power_binds_tighter_than_unary_minus():
    assert PARSER.parse('-q1^2') == Neg(Pow(Var(0, 'q1'), 2))
    assert PARSER.parse('q1^-2') == Pow(Var(0, 'q1'), -2)


def test_left_associativity():
    assert PARSER.parse('q1 - q2 - q3') == Sub(Sub(Var(0, 'q1'), Var(1, 'q2')), Var(2, 'q3'))


def test_syntax_error_offset():
    err = _raises(ExprSyntaxError, PARSER.parse, 'q1/')
    assert err.offset == 3


def test_unknown_identifier_and_arity():
    _raises(ExprNameError, PARSER.parse, 'q1 + w')
    _raises(ExprNameError, PARSER.parse, 'tan(q1)')
    _raises(ExprArityError, PARSER.parse, 'sin(q1, q2)')
    _raises(ExprSyntaxError, PARSER.parse, '   ')


def test_print_then_reparse_is_identical():
    sources = [
        'q1 + 2*q2', '-(q1 - q2)^3', 'q1/(q2*q3)', 'q1 - (q2 - q3)', 'sqrt(q1^2 + 0.25)',
        'exp(-q2)*cos(q3)/2', '--q1', 'q1*-q2', '(q1 + q2)^-2', '1e-05*q3 - 0.1',
    ]
    for src in sources:
        e = PARSER.parse(src)
        assert PARSER.parse(to_text(e)) == e, src


def test_custom_names():
    parser = ExprParser(['x', 'y', 'z'])
    e = parser.parse('z - y^2/2*x')
    assert_allclose(evaluate(e, [2.0, 3.0, 1.0]), 1.0 - 9.0)


def test_bilinear_jet():
    parser = ExprParser(dim=2)
    j = eval_jet(parser.parse('q1*q2'), [3.0, 5.0], order=2)
    assert j.value == 15.0
    assert_allclose(j.grad, [5.0, 3.0])
    assert_allclose(j.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_sine_at_zero():
    parser = ExprParser(dim=1)
    j = eval_jet(parser.parse('sin(q1)'), [0.0], order=2)
    assert j.value == 0.0
    assert_allclose(j.grad, [1.0])
    assert_allclose(j.hess, [[0.0]])


def test_polynomial_against_hand_expansion():
    parser = ExprParser(dim=2)
    e = parser.parse('q1^3*q2 - 2*q1*q2^2 + q2^4')
    rng = np.random.default_rng(7)
    for _ in range(20):
        x, y = rng.normal(size=2)
        j = eval_jet(e, [x, y], order=3)
        grad = [3 * x ** 2 * y - 2 * y ** 2, x ** 3 - 4 * x * y + 4 * y ** 3]
        hess = [[6 * x * y, 3 * x ** 2 - 4 * y], [3 * x ** 2 - 4 * y, -4 * x + 12 * y ** 2]]
        assert_allclose(j.grad, grad, rtol=1e-12, atol=1e-12)
        assert_allclose(j.hess, hess, rtol=1e-12, atol=1e-12)
        assert_allclose(j.third[0, 0, 0], 6 * y, rtol=1e-12, atol=1e-12)
        assert_allclose(j.third[1, 1, 1], 24 * y, rtol=1e-12, atol=1e-12)
        assert_allclose(j.third[0, 0, 1], 6 * x, rtol=1e-12, atol=1e-12)


def test_gradient_against_finite_differences():
    e = PARSER.parse('q1^2*q3 - 3*q2*q3^3 + q1*q2 + 0.5*q2^4')
    rng = np.random.default_rng(11)
    h = 1e-5
    for _ in range(10):
        q = rng.uniform(-1, 1, size=3)
        g = eval_jet(e, q, order=1).grad
        fd = np.array([(evaluate(e, q + h * np.eye(3)[i]) - evaluate(e, q - h * np.eye(3)[i])) / (2 * h)
                       for i in range(3)])
        assert np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))) < 1e-7


def test_hessian_and_third_are_symmetric():
    e = PARSER.parse('sin(q1*q2)*exp(q3) + sqrt(1 + q1^2)/(2 + cos(q2))')
    j = eval_jet(e, [0.3, -0.7, 0.2], order=3)
    assert_allclose(j.hess, j.hess.T, atol=1e-15)
    for axes in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        assert_allclose(j.third, np.transpose(j.third, axes), atol=1e-14)


def test_chain_rule_matches_substitution():
    outer_parser = ExprParser(['y1', 'y2'])
    f = outer_parser.parse('sin(y1)*y2^2 + exp(y2)/(3 + y1^2)')
    g = [PARSER.parse('q1*q2 + q3'), PARSER.parse('cos(q1) - q3^2')]
    composite = substitute(f, {0: g[0], 1: g[1]})
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.uniform(-1.5, 1.5, size=3)
        inner = [eval_jet(ga, x, order=3) for ga in g]
        outer = eval_jet(f, [inner[0].value, inner[1].value], order=3)
        chained = compose_jet(outer, inner)
        direct = eval_jet(composite, x, order=3)
        assert abs(chained.value - direct.value) < 1e-10
        assert_allclose(chained.grad, direct.grad, atol=1e-10)
        assert_allclose(chained.hess, direct.hess, atol=1e-10)
        assert_allclose(chained.third, direct.third, atol=1e-10)


def test_domain_errors_are_reported():
    _raises(ExprDomainError, eval_jet, PARSER.parse('1/(q1 - q2)'), [1.0, 1.0, 0.0])
    _raises(ExprDomainError, eval_jet, PARSER.parse('sqrt(q1)'), [-1.0, 0.0, 0.0])
    _raises(ExprDomainError, eval_jet, PARSER.parse('sqrt(q1)'), [0.0, 0.0, 0.0], 1)
    _raises(ExprDomainError, evaluate, PARSER.parse('q2^-1'), [1.0, 0.0, 0.0])
    assert eval_jet(PARSER.parse('sqrt(q1)'), [0.0, 0.0, 0.0], 0).value == 0.0


def test_overflow_is_a_domain_error():
    for src, q in [('exp(q1)', [1000.0, 0.0, 0.0]),
                   ('q1^400', [1e3, 0.0, 0.0]),
                   ('sin(q1*q1*q1)', [1e120, 0.0, 0.0]),
                   ('q1*q2', [1e200, 1e200, 0.0]),
                   ('1/q1', [1e-200, 0.0, 0.0])]:
        e = PARSER.parse(src)
        for order in (0, 3):
            _raises(ExprDomainError, eval_jet, e, q, order)
        if src != '1/q1':
            _raises(ExprDomainError, evaluate, e, q)
    assert evaluate(PARSER.parse('exp(q1)'), [700.0, 0.0, 0.0]) > 1e300


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 EXPRESSION LAYER TEST')
    print('=' * 70)
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith('test_') and callable(fn):
            try:
                fn()
                print(f'✅ {name}')
            except Exception as e:
                failures += 1
                print(f'❌ {name}: {e}')
    print('=' * 70)
    sys.exit(1 if failures else 0)
