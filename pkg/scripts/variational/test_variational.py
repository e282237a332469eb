#!/usr/bin/env python3
"""
Test transition maps, the end-point differential, kinetic realization and
linearized Poincaré maps

Run with pytest, or directly: python scripts/variational/test_variational.py
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

from dynamics import frame_hamiltonian, matrix_hamiltonian, flow
from geometry import heisenberg_frame
from normal_form import normal_form
from shared.errors import EscapeError, PreconditionError
from shared.jets import CurveJet
from variational import (ControlProblem, transition_map, endpoint_differential, EndpointDifferential,
                         DyadicSplineBasis, gaussian_bumps, finite_family_submersion, realize_perturbation,
                         admissible_perturbation, linearized_transition, nondegeneracy)

IDENTITY_2 = [['1', '0'], ['0', '1']]


def expect(error, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except error:
        return
    raise AssertionError(f'{error.__name__} not raised')


def rotating_curve(mu=0.7, delta=0.5, order=16):
    """A(t) = (1 + mu t) u u^T with u = (cos t, -sin t), n = (sin t, cos t)"""
    cos2 = np.zeros(order + 1)
    sin2 = np.zeros(order + 1)
    cos1 = np.zeros(order + 1)
    sin1 = np.zeros(order + 1)
    for k in range(order + 1):
        c = 2.0 ** k / math.factorial(k)
        if k % 2 == 0:
            cos2[k] = (-1) ** (k // 2) * c
            cos1[k] = (-1) ** (k // 2) / math.factorial(k)
        else:
            sin2[k] = (-1) ** (k // 2) * c
            sin1[k] = (-1) ** (k // 2) / math.factorial(k)
    base = np.zeros((order + 1, 2, 2))
    base[:, 0, 0] = 0.5 * cos2
    base[0, 0, 0] += 0.5
    base[:, 1, 1] = -0.5 * cos2
    base[0, 1, 1] += 0.5
    base[:, 0, 1] = base[:, 1, 0] = -0.5 * sin2
    A = base.copy()
    A[1:] += mu * base[:-1]
    n = np.stack([sin1, cos1], axis=1)
    return CurveJet.from_taylor(A, n, delta)


# Transition maps

def test_zero_control_is_block_triangular():
    flat = CurveJet.constant(np.diag([1.0, 0.0]), [0.0, 1.0], delta=0.5)
    op = transition_map(flat)
    assert_allclose(op.final, [[1, 0, 0.5, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], atol=1e-11)
    assert op.validate()['valid']

    growing = CurveJet.from_taylor(np.array([np.diag([1.0, 0.0]), np.diag([1.0, 0.0])]), delta=0.8)
    X = transition_map(growing).final
    assert_allclose(X[:2, 2:], np.diag([0.8 + 0.32, 0.0]), atol=1e-11)
    assert_allclose(X[2:, :2], 0.0, atol=1e-14)
    assert_allclose(X[2:, 2:], np.eye(2), atol=1e-14)


def test_one_dimensional_cosh_oracle():
    c, delta = 0.8, 0.7
    s = math.sqrt(2 * c)
    op = transition_map(CurveJet.constant([[1.0]], delta=delta), lambda t: [c])
    expected = [[math.cosh(s * delta), math.sinh(s * delta) / s],
                [s * math.sinh(s * delta), math.cosh(s * delta)]]
    assert_allclose(op.final, expected, rtol=1e-10)
    assert abs(op.det_final - 1.0) < 1e-10


def test_controls_are_symplectic_along_the_path():
    op = transition_map(rotating_curve(), lambda t: [np.sin(3 * t), 0.2, t ** 2])
    assert op.symplectic_defect < 1e-7


def random_instance(rng, d, order=4, delta=0.5):
    S = rng.normal(size=(order + 1, d, d))
    coeffs = 0.5 * (S + np.transpose(S, (0, 2, 1)))
    c0, c1 = rng.normal(scale=0.5, size=(2, d * (d + 1) // 2))
    return CurveJet.from_taylor(coeffs, delta=delta), (lambda t: c0 + c1 * t)


def test_hundred_random_instances_stay_symplectic():
    rng = np.random.default_rng(17)
    for k in range(100):
        curve, w = random_instance(rng, 2 + k % 2)
        op = transition_map(curve, w)
        assert op.symplectic_defect < 1e-7, k
        assert abs(op.det_final - 1.0) < 1e-6, k


def test_stacked_solve_matches_single_solves():
    rng = np.random.default_rng(4)
    curve, w = random_instance(rng, 2)
    problem = ControlProblem(curve)
    stacked = problem.solve_stacked([w, None])
    assert_allclose(stacked[0], problem.solve(w).final, atol=1e-9)
    assert_allclose(stacked[1], problem.solve().final, atol=1e-9)


def test_large_control_escapes():
    flat = CurveJet.constant(np.diag([1.0, 0.0]), delta=1.0)
    expect(EscapeError, transition_map, flat, lambda t: [400.0, 0.0, 0.0])


def test_wrong_control_length_rejected():
    expect(PreconditionError, transition_map, rotating_curve(), lambda t: [1.0, 0.0])


# End-point differential

def test_rotating_null_direction_is_a_submersion():
    cert = endpoint_differential(rotating_curve())
    assert cert.passed
    assert cert.rank == 10 and cert.target == 10
    assert cert.cross_check_error < 1e-6


def test_constant_hessian_has_rank_six():
    flat = CurveJet.constant(np.diag([1.0, 0.0]), [0.0, 1.0], delta=0.5)
    cert = endpoint_differential(flat, level=2, cross_check=None)
    assert cert.rank == 6
    assert cert.verdict == 'fail'


def test_tiny_interval_sees_only_the_control_block():
    flat = CurveJet.constant(np.diag([1.0, 0.0]), [0.0, 1.0], delta=1e-6)
    cert = endpoint_differential(flat, level=1, cross_check=None, rank_threshold=1e-3)
    assert cert.rank == 3


def test_spline_basis_is_orthonormal():
    basis = DyadicSplineBasis(0.5, 2)
    gram = (basis.values * basis.weights) @ basis.values.T
    assert_allclose(gram, np.eye(len(basis)), atol=1e-12)
    assert len(basis) == 4 + 3


def test_conjugation_preserves_rank():
    curve = rotating_curve()
    G = np.diag([-1.0, 1.0])
    a = EndpointDifferential(curve).run(level=2, cross_check=None)
    b = EndpointDifferential(curve.conjugated(G)).run(level=2, cross_check=None)
    assert a.rank == b.rank == 10


def test_bump_family_spans_and_short_family_fails():
    curve = rotating_curve()
    cert = finite_family_submersion(curve, gaussian_bumps(0.5, 6, 2))
    assert cert.passed and cert.directions == 18
    short = finite_family_submersion(curve, gaussian_bumps(0.5, 3, 2))
    assert not short.passed
    assert short.warnings
    assert finite_family_submersion(curve, []).verdict == 'fail'


# Kinetic realization

def heisenberg_nf():
    H = frame_hamiltonian(heisenberg_frame(), potential='0', k=0.5)
    orbit = flow(H, [0, 0, 0, 1, 0, 0], 1.0)
    return normal_form(H, orbit, 0.5)


def test_realization_round_trip():
    nf = heisenberg_nf()
    same = realize_perturbation(nf, nf.curve)
    assert np.max(np.abs(same.C1)) < 1e-7

    K1 = realize_perturbation(nf, admissible_perturbation(nf, scale=1e-2, seed=1))
    assert K1.recovery_error < 1e-7
    assert K1.jet_value < 1e-9 and K1.jet_dp < 1e-9 and K1.jet_dq < 1e-9
    assert np.max(np.abs(K1.C1)) > 1e-4

    def tilted(t):
        return nf.curve.A_at(t) + 0.1 * np.eye(2)
    expect(PreconditionError, realize_perturbation, nf, tilted)


# Poincaré maps

def test_nondegeneracy_examples():
    assert nondegeneracy(np.eye(2))['verdict'] == 'degenerate'
    hyp = nondegeneracy(np.diag([2.0, 0.5]))
    assert hyp['verdict'] == 'non-degenerate' and hyp['hyperbolic'] == 2
    a = 2 * np.pi / 5
    rot = nondegeneracy(np.array([[np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]]), N_max=12)
    assert rot['verdict'] == 'degenerate' and rot['n'] == 5
    assert rot['elliptic'] == 2
    expect(PreconditionError, nondegeneracy, np.diag([2.0, 2.0]))


def test_oscillator_poincare_map_trace():
    H = matrix_hamiltonian(['q1', 'q2'], IDENTITY_2, potential='0.5*q1^2 + q2^2', k=0.5)
    lt = linearized_transition(H, [0.0, 0.0, 1.0, 0.0], 2 * np.pi)
    assert lt.closes
    assert lt.matrix.shape == (2, 2)
    assert lt.symplectic_defect < 1e-8
    assert_allclose(np.trace(lt.matrix), 2 * np.cos(2 * np.pi * np.sqrt(2)), atol=1e-8)
    assert nondegeneracy(lt.matrix)['verdict'] == 'non-degenerate'


def test_open_transition_is_symplectic():
    H = frame_hamiltonian(heisenberg_frame(), potential='0', k=0.5)
    orbit = flow(H, [0, 0, 0, 0.6, 0.8, 0.3], 1.0)
    lt = linearized_transition(H, orbit)
    assert not lt.closes
    assert lt.matrix.shape == (4, 4)
    assert lt.symplectic_defect < 1e-7


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 VARIATIONAL TEST')
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
