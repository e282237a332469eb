#!/usr/bin/env python3
"""
Test shared jets and symplectic helpers

Run with pytest, or directly: python scripts/shared/test_shared.py
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

from shared.jets import (MatrixJet, CurveJet, series_reciprocal, series_sqrt,
                         orthonormal_completion)
from shared.symplectic import (J, sp_vectorize, sp_dimension, rank_verdict,
                               symplectic_defect, symplectic_gram_schmidt, symplectic_form)
from shared.errors import PreconditionError


def test_product_truncates_to_smaller_order():
    a = MatrixJet.from_taylor(np.array([[[1.0]], [[2.0]], [[3.0]]]))
    b = MatrixJet.from_taylor(np.array([[[1.0]], [[1.0]]]))
    c = a @ b
    assert c.order == 1
    assert_allclose(c.coeffs[:, 0, 0], [1.0, 3.0])


def test_exact_constant_does_not_limit_order():
    a = MatrixJet.from_taylor(np.random.default_rng(0).normal(size=(4, 2, 2)))
    E = MatrixJet.constant(np.eye(2))
    assert (a @ E).order == 3
    assert E.derivative().is_exact


def test_derivative_and_value_match_polynomial():
    # A(t) = 1 + 2t + 3t^2, A'(0.5) = 2 + 6*0.5
    a = MatrixJet.from_taylor(np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1))
    assert_allclose(a.value(0.5)[0, 0], 1 + 1 + 0.75)
    assert_allclose(a.derivative_at(1, 0.5)[0, 0], 5.0)
    assert_allclose(a.derivative_at(2)[0, 0], 6.0)


def test_from_derivatives_divides_by_factorial():
    a = MatrixJet.from_derivatives([np.eye(2), 2 * np.eye(2), 6 * np.eye(2)])
    assert_allclose(a.coeffs[2], 3 * np.eye(2))


def test_series_reciprocal_and_sqrt():
    c = np.array([4.0, 1.0, 0.5, -0.25])
    r = series_reciprocal(c, 3)
    prod = np.convolve(c, r)[:4]
    assert_allclose(prod, [1, 0, 0, 0], atol=1e-14)
    s = series_sqrt(c, 3)
    assert_allclose(np.convolve(s, s)[:4], c, atol=1e-14)


def test_orthonormal_completion_has_n_as_last_column():
    n = MatrixJet.from_taylor(np.array([[[0.0], [1.0]], [[1.0], [0.0]], [[0.0], [-0.5]]]))
    P = orthonormal_completion(n)
    assert_allclose(P.value(0.0), np.eye(2), atol=1e-14)
    PtP = P.T @ P
    assert PtP.max_abs_diff(MatrixJet.constant(np.eye(2))) < 1e-12


def test_curvejet_admissibility_for_rotating_rank_one():
    # A(t) = u u^T with u = (1, -t); null direction (t, 1)
    u = MatrixJet(np.array([[[1.0], [0.0]], [[0.0], [-1.0]]]), None)
    n = MatrixJet(np.array([[[0.0], [1.0]], [[1.0], [0.0]]]), None)
    curve = CurveJet(u @ u.T, n, delta=0.05)
    report = curve.admissibility()
    assert report['valid'], report['errors']
    back = CurveJet.from_dict(curve.to_dict())
    assert back.A.max_abs_diff(curve.A) == 0.0


def test_sp_vectorize_dimension_and_rejection():
    d = 3
    rng = np.random.default_rng(1)
    M = rng.normal(size=(d, d))
    S = rng.normal(size=(d, d)); S = S + S.T
    T = rng.normal(size=(d, d)); T = T + T.T
    B = np.block([[M, S], [T, -M.T]])
    assert sp_vectorize(B).shape == (sp_dimension(d),)
    bad = B.copy()
    bad[0, 0] += 1.0
    try:
        sp_vectorize(bad)
        assert False, 'expected PreconditionError'
    except PreconditionError:
        pass


def test_rank_verdict_bands():
    assert rank_verdict(np.array([1.0, 1.0, 1e-3]), 3)['verdict'] == 'pass'
    assert rank_verdict(np.array([1.0, 1.0, 1e-14]), 3)['verdict'] == 'fail'
    assert rank_verdict(np.array([1.0, 1.0, 1e-8]), 3)['verdict'] == 'indeterminate'
    assert rank_verdict(np.eye(4), 4)['rank'] == 4


def test_symplectic_defect_and_gram_schmidt():
    d = 2
    rng = np.random.default_rng(2)
    H = rng.normal(size=(2 * d, 2 * d)); H = H + H.T
    from scipy.linalg import expm
    L = expm(J(d) @ H * 0.3)
    assert symplectic_defect(L) < 1e-12
    basis = symplectic_gram_schmidt([rng.normal(size=2 * d) for _ in range(2 * d)])
    assert symplectic_defect(basis) < 1e-9
    assert abs(symplectic_form(basis[:, 0], basis[:, 2]) - 1.0) < 1e-12


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 SHARED HELPERS TEST')
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
