#!/usr/bin/env python3
"""
Test the normal-form steps and the certified pipeline

Run with pytest, or directly: python scripts/normal_form/test_normal_form.py
"""

import json
import sys
import os

import numpy as np
from numpy.testing import assert_allclose
from scipy.linalg import expm

# Add scripts directory to path for cross-folder imports
current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import frame_hamiltonian, matrix_hamiltonian, flow
from geometry import heisenberg_frame, martinet_frame, regularity_form
from normal_form import (FiberedSymplecto, invert_jet, collapse_defect, StraighteningMap,
                         straighten_orbit, solve_hj_jets, ExpressionField, flow_box,
                         linear_normalize, normal_form, NormalFormData)
from shared.errors import NewtonFailure, PreconditionError, RiccatiBlowUp

IDENTITY_2 = [['1', '0'], ['0', '1']]


def expect(error, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except error:
        return
    raise AssertionError(f'{error.__name__} not raised')


# Symplectomorphisms

def test_maps_are_symplectic_and_compose():
    phi = FiberedSymplecto.homogeneous_from_expressions(['x', 'y'], ['x + y^2', 'y'])
    chi = FiberedSymplecto.homogeneous_from_expressions(['x', 'y'], ['x', 'y + x^3/3'])
    chi_phi = FiberedSymplecto.homogeneous_from_expressions(['x', 'y'], ['x + y^2', 'y + (x + y^2)^3/3'])
    g1 = FiberedSymplecto.vertical_from_expression(['x', 'y'], 'x*y')
    g2 = FiberedSymplecto.vertical_from_expression(['x', 'y'], 'sin(x) + y^2')
    g12 = FiberedSymplecto.vertical_from_expression(['x', 'y'], 'x*y + sin(x) + y^2')
    rng = np.random.default_rng(3)
    for _ in range(10):
        q, p = rng.uniform(-0.5, 0.5, 2), rng.normal(size=2)
        assert phi.after(g1).symplectic_defect(q, p) < 1e-10
        assert_allclose(chi.after(phi).apply(q, p), chi_phi.apply(q, p), atol=1e-9)
        assert_allclose(g1.after(g2).apply(q, p), g12.apply(q, p), atol=1e-9)
        assert collapse_defect(phi, g2, q, p) < 1e-9


def test_inverse_jets_of_a_shear():
    a = 0.5
    D1 = np.array([[1.0, 0.0], [3 * a ** 2, 1.0]])
    D2 = np.zeros((2, 2, 2))
    D2[1, 0, 0] = 6 * a
    D3 = np.zeros((2, 2, 2, 2))
    D3[1, 0, 0, 0] = 6.0
    A, B, C = invert_jet(D1, D2, D3)
    assert_allclose(A, [[1.0, 0.0], [-3 * a ** 2, 1.0]], atol=1e-14)
    assert_allclose(B[1, 0, 0], -6 * a, atol=1e-14)
    assert_allclose(C[1, 0, 0, 0], -6.0, atol=1e-13)
    assert abs(B[0]).max() < 1e-14 and abs(C[0]).max() < 1e-14


# Step 1

def test_straight_orbit_gives_identity_jets():
    H = frame_hamiltonian(heisenberg_frame(), potential='0', k=0.5)
    orbit = flow(H, [0, 0, 0, 1, 0, 0], 1.0)
    S = StraighteningMap(orbit)
    A, B, C = S.along_orbit(0.3)
    assert_allclose(A, np.eye(3), atol=1e-12)
    assert np.max(np.abs(B)) < 1e-12
    assert np.max(np.abs(C)) < 1e-12
    assert S.residual() < 1e-10


def test_circle_is_straightened():
    H = matrix_hamiltonian(['q1', 'q2'], IDENTITY_2, potential='0.5*q1^2 + 0.5*q2^2', k=1.0)
    orbit = flow(H, [1, 0, 0, 1], 1.5)
    S = StraighteningMap(orbit)
    assert S.residual() < 1e-8
    Psi = straighten_orbit(H, orbit)
    z = Psi.apply(orbit.q(0.7), orbit.p(0.7))
    assert_allclose(z[:2], [0.7, 0.0], atol=1e-8)
    assert Psi.symplectic_defect(orbit.q(0.7) + 0.01, orbit.p(0.7)) < 1e-10


def test_straighten_rejects_zero_velocity():
    H = matrix_hamiltonian(['q1', 'q2'], IDENTITY_2, potential='0.5*q1^2', k=0.5)
    orbit = flow(H, [1, 0, 0, 0], 1.0)
    expect(PreconditionError, StraighteningMap, orbit)


# Step 2

def test_hj_flat_free_case_has_zero_jets():
    H = matrix_hamiltonian(['q1', 'q2'], IDENTITY_2, potential='0', k=0.5)
    orbit = flow(H, [0, 0, 1, 0], 1.0)
    hj = solve_hj_jets(H, orbit, 1.0)
    q, g1, S, T = hj.unpack(1.0)
    assert_allclose(q, [1, 0], atol=1e-12)
    assert_allclose(g1, [1, 0], atol=1e-12)
    assert np.max(np.abs(S)) < 1e-12 and np.max(np.abs(T)) < 1e-12
    worst = hj.max_residuals()
    assert max(worst.values()) < 1e-12


def test_hj_riccati_matches_tangent_oracle():
    omega = 1.3
    H = matrix_hamiltonian(['q1', 'q2'], IDENTITY_2, potential=f'{0.5 * omega ** 2}*q2^2', k=0.5)
    orbit = flow(H, [0, 0, 1, 0], 1.0)
    hj = solve_hj_jets(H, orbit, 0.8)
    for t in np.linspace(0.0, 0.8, 9):
        S = hj.unpack(t)[2]
        assert_allclose(S[1, 1], -omega * np.tan(omega * t), rtol=1e-9, atol=1e-11)
        assert abs(S[0, 1]) < 1e-12
    worst = hj.max_residuals()
    assert max(worst.values()) < 1e-7


def test_hj_blow_up_and_newton_failure():
    omega = 1.3
    H = matrix_hamiltonian(['q1', 'q2'], IDENTITY_2, potential=f'{0.5 * omega ** 2}*q2^2', k=0.5)
    orbit = flow(H, [0, 0, 1, 0], 2.0)
    expect(RiccatiBlowUp, solve_hj_jets, H, orbit, 1.5)

    H2 = matrix_hamiltonian(['q1', 'q2'], IDENTITY_2, potential='0.5*q1^2', k=0.625)
    orbit2 = flow(H2, [1, 0, 0.5, 0], 0.5)
    expect(NewtonFailure, solve_hj_jets, H2, orbit2, 0.5, k=0.3)


# Step 3

def test_flow_box_of_constant_field_is_identity():
    box = flow_box(ExpressionField(['x', 'y'], ['1', '0']), [0, 0], 1.0)
    D1, D2, D3 = box.jets(0.6)
    assert_allclose(D1, np.eye(2), atol=1e-14)
    assert np.max(np.abs(D2)) < 1e-14 and np.max(np.abs(D3)) < 1e-14
    assert_allclose(box.base(0.6), [0.6, 0.0], atol=1e-13)


def test_flow_box_of_linear_field_matches_matrix_exponential():
    eps = 0.1
    M = np.array([[0.0, 1.0], [-1.0, 0.0]])
    box = flow_box(ExpressionField(['x', 'y'], [f'1 + {eps}*y', f'-{eps}*x']), [0, 0], 1.0)
    aug = np.zeros((3, 3))
    aug[:2, :2] = eps * M
    aug[0, 2] = 1.0
    for s in (0.25, 0.5, 1.0):
        E = expm(s * aug)
        assert_allclose(box.base(s), E[:2, 2], atol=1e-11)
        D1, D2, D3 = box.jets(s)
        assert_allclose(D1[:, 1], E[:2, :2] @ [0.0, 1.0], atol=1e-11)
        assert_allclose(D1[:, 0], [1 + eps * E[1, 2], -eps * E[0, 2]], atol=1e-11)
        assert np.max(np.abs(D2[:, 1:, 1:])) < 1e-12
        assert np.max(np.abs(D3[:, 1:, 1:, 1:])) < 1e-12
        A, _, _ = box.inverse_jets(s)
        assert_allclose(A @ D1, np.eye(2), atol=1e-12)


def test_flow_box_rejects_vanishing_field():
    expect(PreconditionError, flow_box, ExpressionField(['x', 'y'], ['x', 'y']), [0, 0], 1.0)


# Step 4

def test_linear_normalize_examples():
    lin = linear_normalize(np.diag([4.0, 0.0]))
    assert_allclose(lin.Mbar, np.diag([0.5, 1.0]), atol=1e-14)
    assert_allclose(linear_normalize(np.diag([1.0, 0.0])).M, np.eye(3), atol=1e-14)
    expect(PreconditionError, linear_normalize, np.diag([1.0, 2.0]))
    c, s = np.cos(0.4), np.sin(0.4)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    A = R @ np.diag([9.0, 0.0, 2.0]) @ R.T
    lin = linear_normalize(A)
    assert_allclose(lin.Mbar @ A @ lin.Mbar.T, np.diag([1.0, 1.0, 0.0]), atol=1e-12)


# Pipeline

def test_heisenberg_normal_form_is_certified_and_regular():
    H = frame_hamiltonian(heisenberg_frame(), potential='0', k=0.5)
    orbit = flow(H, [0, 0, 0, 1, 0, 0], 1.0)
    nf = normal_form(H, orbit, 0.5)
    cert = nf.certificates
    for key in ('a_position', 'a_momentum', 'b_order0', 'b_order1', 'b_order2',
                'c_order0', 'c_order1', 'd_hessian', 'momentum_identity', 'symplectic', 'collapse'):
        assert cert[key] < 1e-7, key
    assert cert['null_rank'] == [1]
    assert_allclose(nf.curve.A_at(0.0), np.diag([1.0, 0.0]), atol=1e-9)
    assert_allclose(nf.curve.n_at(0.0), [0.0, 1.0], atol=1e-12)
    assert nf.curve.admissibility(tol=1e-6)['valid']
    assert np.linalg.norm(nf.n_dot0) > 0.1
    assert np.linalg.norm(regularity_form(heisenberg_frame(), [0, 0, 0], [1, 0, 0])) > 0.1


def test_martinet_line_has_constant_hessian_and_static_null_direction():
    H = frame_hamiltonian(martinet_frame(), potential='0', k=0.5)
    orbit = flow(H, [0, 0, 0, 1, 0, 0], 1.0)
    nf = normal_form(H, orbit, 0.5)
    for A in nf.A:
        assert_allclose(A, np.diag([1.0, 0.0]), atol=1e-9)
    assert np.linalg.norm(nf.n_dot0) < 1e-8
    assert np.linalg.norm(regularity_form(martinet_frame(), [0.2, 0, 0], [1, 0, 0])) < 1e-12


def test_normal_form_with_potential_and_json_reload():
    box = [(-2.0, 2.0)] * 3
    H = frame_hamiltonian(heisenberg_frame(box), potential='0.2*sin(x)*cos(y) + 0.1*z^2', k=2.0)
    q0 = np.array([0.1, -0.2, 0.05])
    p_dir = np.array([0.6, 0.3, 0.4])
    p0 = p_dir * np.sqrt((2.0 - H.potential_value(q0)) / H.kinetic_value(q0, p_dir))
    orbit = flow(H, np.concatenate([q0, p0]), 0.6)
    nf = normal_form(H, orbit, 0.4)
    assert nf.certificates['momentum_identity'] < 1e-7
    assert nf.certificates['null_residual'] < 1e-9
    assert nf.certificates['b_order2'] < 1e-7
    again = NormalFormData.from_dict(json.loads(nf.to_json()))
    assert_allclose(again.curve.A_at(0.2), nf.curve.A_at(0.2), atol=1e-14)
    assert_allclose(again.M, nf.M)


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 NORMAL FORM TEST')
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
