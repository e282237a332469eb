#!/usr/bin/env python3
"""
Test normal lifts, the abnormal covector search and lift uniqueness

Run with pytest, or directly: python scripts/lifts/test_lifts.py
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

from dynamics import flow, frame_hamiltonian, matrix_hamiltonian, maupertuis
from geometry import (Control, classify_curve, flat_frame, heisenberg_frame, integrate_horizontal,
                      martinet_frame)
from lifts import (ControlLagrangian, PontryaginLifts, abnormal_search, lift_normal,
                   unique_lift_check)
from shared.errors import EnergyIdentityError, PreconditionError


def expect(error, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except error:
        return
    raise AssertionError(f'{error.__name__} not raised')


def projected_curve(H, x0, T):
    """Horizontal curve under a Hamiltonian orbit, with control c = F^T p"""
    orbit = flow(H, x0, T)
    frame = H.frame
    n = H.n
    control = Control.from_function(lambda t: frame.frame_matrix(orbit.q(t)).T @ orbit.p(t), frame.d)
    return orbit, integrate_horizontal(frame, x0[:n], control, T)


# Lagrangian

def test_lagrangian_is_legendre_dual_of_the_hamiltonian():
    H = frame_hamiltonian(heisenberg_frame(), potential='0.3*x*y')
    lag = ControlLagrangian(H)
    rng = np.random.default_rng(0)
    for _ in range(5):
        q, P = rng.normal(size=3), rng.normal(size=3)
        c = lag.maximizer(q, P)
        assert abs(lag.identity_residual(q, P, c)) < 1e-12
        assert lag.sampled_sup_gap(q, P, c) <= 1e-12


def test_lagrangian_gradient_matches_finite_differences():
    H = frame_hamiltonian(heisenberg_frame(), potential='0.2*sin(x)*cos(y) + 0.1*z^2',
                          metric=[['1 + y^2', '0.1'], ['0.1', '2']])
    lag = ControlLagrangian(H)
    q, c = np.array([0.2, -0.4, 0.3]), np.array([0.7, -1.1])
    h = 1e-6
    fd = np.array([(lag.value(q + h * e, c) - lag.value(q - h * e, c)) / (2 * h) for e in np.eye(3)])
    assert_allclose(lag.grad_q(q, c), fd, atol=1e-8)


def test_lagrangian_needs_a_frame_hamiltonian():
    H = matrix_hamiltonian(['x', 'y', 'z'], [['1', '0', '0'], ['0', '1', '0'], ['0', '0', '0']])
    expect(PreconditionError, ControlLagrangian, H)


# Normal lifts

def test_flat_straight_line_has_constant_covector():
    frame = flat_frame(2)
    H = frame_hamiltonian(frame)
    curve = integrate_horizontal(frame, [0, 0, 0], Control.constant([1, 0]), 1.0)
    lift = lift_normal(H, curve, [1.0, 0.0, 0.0])
    assert_allclose(lift.P, np.tile([1.0, 0.0, 0.0], (len(lift.t), 1)), atol=1e-12)
    assert lift.energy_drift() < 1e-12


def test_heisenberg_lift_recovers_the_flow_covector():
    H = frame_hamiltonian(heisenberg_frame())
    x0 = np.array([0.0, 0.0, 0.0, 0.6, -0.3, 1.2])
    orbit, curve = projected_curve(H, x0, 1.5)
    lift = lift_normal(H, curve, x0[3:])
    for s in np.linspace(0.0, 1.5, 7):
        assert np.max(np.abs(lift.P_at(s) - orbit.p(s))) < 1e-7
    assert lift.drift_rate() < 1e-8
    assert np.max(np.abs(lift.identity_residual)) < 1e-8
    assert lift.normal_residual < 1e-5


def test_lift_with_potential_and_maupertuis_factor():
    H = frame_hamiltonian(heisenberg_frame(), potential='0.2*sin(x)*cos(y)', k=2.0)
    x0 = np.array([0.1, 0.0, -0.1, 0.5, 0.4, 0.8])
    orbit, curve = projected_curve(H, x0, 1.0)
    lift = lift_normal(H, curve, x0[3:])
    assert np.max(np.abs(lift.P_at(1.0) - orbit.p(1.0))) < 1e-7

    G = maupertuis(H, check=False)
    orbit_g = flow(G, x0, 0.8)
    frame = G.frame
    control = Control.from_function(
        lambda t: ControlLagrangian(G).maximizer(orbit_g.q(t), orbit_g.p(t)), frame.d)
    curve_g = integrate_horizontal(frame, x0[:3], control, 0.8)
    lift_g = lift_normal(G, curve_g, x0[3:])
    assert np.max(np.abs(lift_g.P_at(0.8) - orbit_g.p(0.8))) < 1e-7
    assert lift_g.drift_rate() < 1e-8


def test_invalid_initial_covector_raises():
    frame = heisenberg_frame()
    H = frame_hamiltonian(frame)
    curve = integrate_horizontal(frame, [0, 0, 0], Control.constant([1, 0]), 1.0)
    expect(EnergyIdentityError, lift_normal, H, curve, [0.5, 0.0, 0.0])
    expect(PreconditionError, lift_normal, H, curve, [1.0, 0.0])


def test_unchecked_lift_reports_the_identity_defect():
    frame = heisenberg_frame()
    H = frame_hamiltonian(frame)
    curve = integrate_horizontal(frame, [0, 0, 0], Control.constant([1, 0]), 1.0)
    lift = lift_normal(H, curve, [0.5, 0.0, 0.0], check=False)
    # c = (1, 0) against F^T P = (0.5, 0): residual -|c - F^T P|^2 / 2
    assert_allclose(lift.identity_residual[0], -0.125, atol=1e-12)
    assert set(lift.to_frame().columns) >= {'t', 'q_x', 'p_z', 'H', 'identity_residual'}


# Abnormal covectors

def test_martinet_line_carries_dz():
    frame = martinet_frame()
    curve = integrate_horizontal(frame, [0, 0, 0], Control.constant([1, 0]), 1.0)
    found = abnormal_search(frame, curve)
    assert found is not None and not found.degenerate
    assert_allclose(found.eta, np.tile([0.0, 0.0, 1.0], (len(found.t), 1)), atol=1e-12)
    assert found.max_annihilation < 1e-12


def test_heisenberg_curves_have_no_abnormal_covector():
    frame = heisenberg_frame()
    for coeffs in ([[1.0, 0.0]], [[1.0, 0.2], [0.0, 1.0]], [[0.0, 1.0], [0.5, 0.0]]):
        curve = integrate_horizontal(frame, [0.1, -0.2, 0.0], Control.polynomial(coeffs), 1.0)
        assert abnormal_search(frame, curve) is None


def test_abnormal_search_agrees_with_classification():
    cases = [
        (martinet_frame(), [0, 0, 0], Control.constant([1, 0])),
        (martinet_frame(), [0, -0.5, 0], Control.constant([1, 1])),
        (martinet_frame(), [0, 0.3, 0], Control.constant([1, 0])),
        (heisenberg_frame(), [0, 0, 0], Control.constant([0.3, 1])),
        (flat_frame(2), [0, 0, 0], Control.constant([1, -1])),
    ]
    for frame, q0, control in cases:
        curve = integrate_horizontal(frame, q0, control, 1.0)
        singular = classify_curve(frame, curve, samples=51).verdict == 'singular_curve'
        assert (abnormal_search(frame, curve) is not None) == singular


def test_zero_length_curve_is_degenerate():
    frame = martinet_frame()
    curve = integrate_horizontal(frame, [0.2, 0.1, 0.0], Control.constant([1, 0]), 0.0)
    found = abnormal_search(frame, curve)
    assert found.degenerate
    eta = frame.eta_value([0.2, 0.1, 0.0])
    assert_allclose(found.eta[0], eta / np.linalg.norm(eta))


def test_covector_transport_is_linear():
    frame = heisenberg_frame()
    curve = integrate_horizontal(frame, [0, 0, 0], Control.polynomial([[1.0, 0.2], [0.0, 1.0]]), 1.0)
    eta0 = np.array([0.3, -0.1, 1.0])
    for renormalize in (True, False):
        _, _, one, _ = PontryaginLifts.transport_covector(frame, curve, eta0, renormalize)
        _, _, two, _ = PontryaginLifts.transport_covector(frame, curve, 2 * eta0, renormalize)
        assert_allclose(two, 2 * one, rtol=1e-9, atol=1e-11)


# Uniqueness

def test_regular_curve_same_covector_is_unique():
    H = frame_hamiltonian(heisenberg_frame())
    x0 = np.array([0.0, 0.0, 0.0, 0.6, -0.3, 1.2])
    _, curve = projected_curve(H, x0, 1.0)
    result = unique_lift_check(H, curve, x0[3:], x0[3:])
    assert result['verdict'] == 'unique'
    assert result['max_difference'] < 1e-12
    assert not result['singular']


def test_regular_curve_rejects_annihilator_shift():
    frame = heisenberg_frame()
    H = frame_hamiltonian(frame)
    curve = integrate_horizontal(frame, [0, 0, 0], Control.constant([1, 0]), 1.0)
    p0 = np.array([1.0, 0.0, 0.0])
    result = unique_lift_check(H, curve, p0, p0 + 0.1 * frame.eta_value([0, 0, 0]))
    assert result['verdict'] == 'unique'
    assert 'along the curve' in result['b_rejected']


def test_martinet_singular_line_has_two_lifts():
    frame = martinet_frame()
    H = frame_hamiltonian(frame)
    curve = integrate_horizontal(frame, [0, 0, 0], Control.constant([1, 0]), 1.0)
    result = unique_lift_check(H, curve, [1.0, 0.0, 0.0], [1.0, 0.0, 1.0])
    assert result['verdict'] == 'non_unique'
    assert result['singular']
    assert abs(result['max_difference'] - 1.0) < 1e-10
    assert result['difference_annihilation'] < 1e-12


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 LIFTS TEST')
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
