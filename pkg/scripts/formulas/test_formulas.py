#!/usr/bin/env python3
"""
Test the closed-form engine against brute-force matrix and jet arithmetic

Run with pytest, or directly: python scripts/formulas/test_formulas.py
"""

import math
import sys
import os

import numpy as np
from numpy.testing import assert_allclose

# Add scripts directory to path for cross-folder imports
current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from formulas import (NormalizedData, IndexSets, ParamFamily, basis_matrices, literal_matrices,
                      aggregate_sums, naive_sums, diag_sum, closed_form_error, derivatives_of_conjugated,
                      conjugated_oracle, alpha_of, random_base, random_conjugation_data, random_family,
                      m_matrix, m_bar_limit, reduced_determinant, m_bar_convergence, b5_corner,
                      span_kernel_dimension, FormulaBattery, formula_verify)
from mane import bracket_family
from shared.errors import PoleError, PreconditionError
from shared.jets import MatrixJet, normalize_vector_jet, orthonormal_completion


def expect(error, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except error:
        return
    raise AssertionError(f'{error.__name__} not raised')


def rotation_jet(order=6):
    """P(t) = [cos t, sin t; -sin t, cos t]"""
    coeffs = np.zeros((order + 1, 2, 2))
    for k in range(order + 1):
        c = 1.0 / math.factorial(k)
        if k % 2 == 0:
            coeffs[k] = (-1) ** (k // 2) * c * np.eye(2)
        else:
            coeffs[k] = (-1) ** (k // 2) * c * np.array([[0.0, 1.0], [-1.0, 0.0]])
    return MatrixJet(coeffs, order)


def base_for_velocity(v_bar, order=6):
    d = len(v_bar) + 1
    raw = np.zeros((2, d, 1))
    raw[0, -1, 0] = 1.0
    raw[1, :-1, 0] = v_bar
    return orthonormal_completion(normalize_vector_jet(MatrixJet(raw, order)))


FLAT_2 = np.diag([1.0, 0.0])


# Derivatives of P Lambda P^T

def test_constant_frame_with_growing_eigenvalue():
    Lam = MatrixJet(np.array([FLAT_2, FLAT_2]))
    A_dot, A_ddot = derivatives_of_conjugated(MatrixJet.identity(2), Lam)
    assert_allclose(A_dot, FLAT_2)
    assert_allclose(A_ddot, np.zeros((2, 2)))


def test_rotating_frame_with_constant_eigenvalues():
    A_dot, A_ddot = derivatives_of_conjugated(rotation_jet(), MatrixJet.constant(FLAT_2))
    assert_allclose(A_dot, [[0.0, -1.0], [-1.0, 0.0]], atol=1e-15)
    assert_allclose(A_ddot, np.diag([-2.0, 2.0]), atol=1e-14)


def test_closed_derivatives_match_jet_product():
    rng = np.random.default_rng(11)
    for d in (2, 3, 4):
        P, Lam = random_conjugation_data(d, rng)
        closed, oracle = derivatives_of_conjugated(P, Lam), conjugated_oracle(P, Lam)
        assert_allclose(closed[0], oracle[0], atol=1e-12)
        assert_allclose(closed[1], oracle[1], atol=1e-12)


def test_conjugation_preconditions():
    Lam = MatrixJet.constant(FLAT_2)
    expect(PreconditionError, derivatives_of_conjugated, MatrixJet.constant(2 * np.eye(2)), Lam)
    expect(PreconditionError, derivatives_of_conjugated, rotation_jet(), MatrixJet.constant(np.eye(2)))
    sheared = MatrixJet(np.array([np.eye(2), [[0.0, 1.0], [0.0, 0.0]]]))
    expect(PreconditionError, derivatives_of_conjugated, sheared, Lam)


# alpha(G, mu) and the parametric family

def test_alpha_in_the_plane_is_twice_velocity_squared():
    P = base_for_velocity([0.7])
    alpha = alpha_of(np.eye(2), [0.3], P, MatrixJet.constant(FLAT_2))
    assert_allclose(alpha, [[2 * 0.7 ** 2]], rtol=1e-14)


def test_alpha_without_mu_drops_commutator():
    rng = np.random.default_rng(3)
    P, Lam0 = random_base(3, rng)
    v = P.derivative_at(1)[:-1, -1]
    expected = 2 * np.outer(v, v) - Lam0.derivative_at(2)[:-1, :-1]
    assert_allclose(alpha_of(np.eye(3), np.zeros(2), P, Lam0), expected, atol=1e-14)


def test_family_has_normalized_derivatives():
    rng = np.random.default_rng(4)
    for d in (2, 3, 4):
        fam = random_family(d, rng)
        data = fam.normalized()
        A = fam.A()
        assert_allclose(A.value(0.0), data.A0, atol=1e-12)
        assert_allclose(A.derivative_at(1), data.A_dot, atol=1e-12)
        assert_allclose(A.derivative_at(2), data.A_ddot, atol=1e-10)
        assert_allclose(A.derivative_at(1)[:-1, -1], -fam.G[:-1, :-1] @ fam.v_bar, atol=1e-12)
        assert abs(data.w[-1] - fam.v_bar @ fam.v_bar) < 1e-12


def test_family_curve_is_admissible():
    fam = random_family(3, np.random.default_rng(8))
    curve = fam.curve()
    for t in (0.0, 0.01, 0.02):
        assert np.max(np.abs(curve.A_at(t) @ curve.n_at(t))) < 1e-6
    expect(PreconditionError, ParamFamily, np.eye(3)[[1, 0, 2]] * [1, 1, -1], fam.mu, fam.P, fam.Lam0)


def test_index_sets():
    for d in range(2, 7):
        J = IndexSets(d)
        assert len(J.J1) == d * (d + 1) // 2 - 1
        assert len(J.J2) == d * (d - 1) // 2
    J = IndexSets(3)
    assert J.in_s_star(J.E(0, 2))
    assert not J.in_s_star(J.E(2, 2))
    assert_allclose(J.E(1, 1), 2 * J.F(1, 1))


# xi, eta, zeta, gamma, kappa

def test_closed_forms_match_products_in_every_dimension():
    rng = np.random.default_rng(0)
    for d in range(2, 7):
        assert closed_form_error(NormalizedData.random(d, rng)) <= 1e-12


def test_named_entries():
    data = NormalizedData([0.4, -1.1], [0.9, 0.2], [0.3, -0.5, 1.7])
    m = 2
    forms = basis_matrices(m, m, data)
    assert np.all(forms['xi'] == 0.0)
    expected_eta = np.zeros((3, 3))
    expected_eta[:2, m] = -2 * data.v
    assert_allclose(forms['eta'], expected_eta)
    assert_allclose(basis_matrices(0, 1, data)['gamma'], IndexSets(3).E(0, 1))
    assert np.all(basis_matrices(1, 2, data)['gamma'] == 0.0)
    expect(PreconditionError, basis_matrices, 0, 3, data)


def test_normalized_data_round_trip_from_matrices():
    data = NormalizedData.random(4, np.random.default_rng(2))
    back = NormalizedData.from_matrices(data.A0, data.A_dot, data.A_ddot)
    assert_allclose(back.w, data.w)
    expect(PreconditionError, NormalizedData.from_matrices, np.eye(4), data.A_dot, data.A_ddot)


# Aggregated sums

def test_zero_coefficients_give_zero_sums():
    data = NormalizedData.random(3, np.random.default_rng(1))
    D, U = aggregate_sums(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3)), data)
    assert np.all(D == 0.0) and np.all(U == 0.0)


def test_single_coefficient_is_one_term():
    data = NormalizedData.random(3, np.random.default_rng(6))
    b = np.zeros((3, 3))
    b[0, 1] = 1.0
    D, U = aggregate_sums(np.zeros((3, 3)), b, np.zeros((3, 3)), data)
    lit = literal_matrices(0, 1, data)
    assert_allclose(D, lit['eta'], atol=1e-14)
    assert_allclose(U, 2 * lit['gamma'], atol=1e-14)


def test_closed_sums_match_naive_summation():
    rng = np.random.default_rng(9)
    for d in (2, 4, 6):
        data = NormalizedData.random(d, rng)
        a, b, c = (np.triu(rng.normal(size=(d, d))) for _ in range(3))
        for x in (a, b, c):
            x[-1, -1] = 0.0
        D, U = aggregate_sums(a, b, c, data)
        D0, U0 = naive_sums(a, b, c, data)
        assert_allclose(D, D0, atol=1e-12)
        assert_allclose(U, U0, atol=1e-12)
    bad = np.zeros((2, 2))
    bad[1, 1] = 1.0
    expect(PreconditionError, aggregate_sums, bad, np.zeros((2, 2)), np.zeros((2, 2)), NormalizedData.random(2, rng))


def test_diag_sum_identity():
    rng = np.random.default_rng(5)
    s, w, x = np.triu(rng.normal(size=(4, 4))), rng.normal(size=4), rng.normal(size=4)
    lhs = sum(s[i, j] * (w[i] * x[j] + x[i] * w[j]) for i in range(4) for j in range(i, 4))
    assert abs(lhs - diag_sum(s, w) @ x) < 1e-12


# M and the kernel of the span system

def test_plane_determinant_identity():
    rng = np.random.default_rng(12)
    for _ in range(100):
        v1 = rng.uniform(0.1, 3.0) * rng.choice([-1, 1])
        M = m_matrix([v1], [rng.normal()], [rng.normal(), v1 ** 2])
        assert abs(M.det + v1 ** 2) <= 1e-12 * v1 ** 2
        assert_allclose(M.metadata['det_identity'], M.det, rtol=1e-14)


def test_plane_kernel_opens_exactly_where_det_vanishes():
    generic = NormalizedData([0.8], [1.3], [0.4, 1.3 ** 2])
    assert span_kernel_dimension(generic)['kernel_dimension'] == 0
    tuned = NormalizedData([0.8], [1.3], [0.4, 1.5 * 1.3 ** 2])
    assert abs(m_matrix(tuned.v, tuned.mu, tuned.w).det) < 1e-12
    assert span_kernel_dimension(tuned)['kernel_dimension'] == 1


def test_kernel_of_span_system_tracks_det_in_dimension_three():
    rng = np.random.default_rng(21)
    tuned_cases = 0
    for _ in range(12):
        mu = np.array([1.0, 2.0]) + rng.uniform(0, 0.2, 2)
        v = rng.uniform(0.5, 1.5, 2) * rng.choice([-1, 1], 2)
        w = rng.normal(size=3)
        data = NormalizedData(mu, v, w)
        if abs(m_matrix(v, mu, w).det) > 1e-6:
            assert span_kernel_dimension(data)['kernel_dimension'] == 0
        # det(M0 + 2 w_d I) = 0 at w_d = -lambda / 2 for a real eigenvalue of M0
        w0 = w.copy()
        w0[-1] = 0.0
        eig = np.linalg.eigvals(m_matrix(v, mu, w0).m)
        real = [e.real for e in eig if abs(e.imag) < 1e-12]
        if not real:
            continue
        w0[-1] = -real[0] / 2
        assert abs(m_matrix(v, mu, w0).det) < 1e-9
        assert span_kernel_dimension(NormalizedData(mu, v, w0))['kernel_dimension'] == 1
        tuned_cases += 1
    assert tuned_cases > 0


def test_family_spans_the_predicted_space():
    rng = np.random.default_rng(17)
    for d in (2, 3):
        data = random_family(d, rng).normalized()
        assert abs(m_matrix(data.v, data.mu, data.w).det) > 1e-10
        kernel = span_kernel_dimension(data)
        assert kernel['members'] == kernel['target'] == d ** 2 + d * (d + 1) // 2 - 1
        assert kernel['kernel_dimension'] == 0


def test_poles_and_vanishing_velocity():
    expect(PoleError, m_matrix, [1.0, 2.0], [0.5, 0.5], [0.1, 0.2, 0.3])
    expect(PoleError, m_matrix, [1.0, 2.0], [0.5, -0.5], [0.1, 0.2, 0.3])
    expect(PreconditionError, m_matrix, [1.0, 0.0], [0.5, 1.5], [0.1, 0.2, 0.3])
    expect(PoleError, m_bar_limit, [1.0, 2.0], [0.7, 0.7])


# Scaling limit

def test_m_bar_reduction_matches_pq_formula():
    rng = np.random.default_rng(23)
    for n in (2, 3, 4):
        v = rng.normal(size=n)
        v[2:] = 0.0
        mu = np.arange(1, n + 1) + rng.uniform(0, 0.3, n)
        got = m_bar_limit(v, mu).det
        want = reduced_determinant(v[0], v[1], mu)['det']
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


def test_m_bar_is_homogeneous_in_v():
    v, mu = np.array([0.7, -1.2, 0.4]), np.array([1.0, 2.1, 3.3])
    base = m_bar_limit(v, mu).det
    assert abs(m_bar_limit(2 * v, mu).det - 64 * base) <= 1e-10 * abs(64 * base)


def test_m_converges_to_m_bar_at_rate_one_over_t():
    rng = np.random.default_rng(31)
    for _ in range(10):
        mu = np.array([1.0, 2.0]) + rng.uniform(0, 0.3, 2)
        v = rng.uniform(0.5, 1.5, 2) * rng.choice([-1, 1], 2)
        omega = rng.normal(size=2)
        result = m_bar_convergence(v, mu, omega, ts=np.logspace(2, 5, 7))
        assert abs(result['slope'] + 1.0) < 0.1
        assert list(result['table'].columns) == ['t', 'error']


# B^5 corner

def test_b5_corner_matches_recursion():
    rng = np.random.default_rng(41)
    for d in (2, 3):
        fam = random_family(d, rng)
        brackets = bracket_family(fam.curve(), L=5)
        for i in range(d - 1):
            corner = brackets.get(5, i, i)[d - 1, 2 * d - 1]
            assert abs(corner - b5_corner(fam.v, i)) <= 1e-10 * max(1.0, abs(corner))
            assert b5_corner(fam.v, i) <= 0.0
    assert b5_corner([0.0, 1.0], 0) == 0.0
    assert b5_corner([1.0], 0) == -12.0


# Battery

def test_battery_passes_for_small_dimensions():
    table = FormulaBattery(dims=[2, 3, 4], seed=0).run()
    assert list(table.columns) == ['check', 'd', 'max_error', 'tolerance', 'passed']
    assert table['passed'].all(), table[~table['passed']].to_string()
    assert 'det_identity' in set(table[table['d'] == 2]['check'])
    assert 'm_bar_reduction' in set(table[table['d'] == 3]['check'])


def test_formula_verify_rejects_dimension_one():
    expect(PreconditionError, formula_verify, [1])


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 FORMULAS TEST')
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
