#!/usr/bin/env python3
"""
Test the bracket recursion, the span certificate and the genericity scan

Run with pytest, or directly: python scripts/mane/test_mane.py
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

from mane import (bracket_family, span_test, span_sweep, conjugate_family, genericity_scan,
                  GenericityScanner, default_null_direction, static_null_direction, sample_admissible,
                  random_fixing_rotation)
from shared.errors import PreconditionError
from shared.jets import CurveJet, MatrixJet
from shared.symplectic import sym_basis

FLAT_2 = np.diag([1.0, 0.0])


def expect(error, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except error:
        return
    raise AssertionError(f'{error.__name__} not raised')


def rotating_curve(mu=0.7, delta=0.5, order=16):
    """A(t) = (1 + mu t) u u^T with u = (cos t, -sin t)"""
    A = np.zeros((order + 1, 2, 2))
    for k in range(order + 1):
        c = 2.0 ** k / math.factorial(k) * (-1) ** (k // 2)
        if k % 2 == 0:
            A[k] = 0.5 * np.array([[c, 0.0], [0.0, -c]])
        else:
            A[k] = 0.5 * np.array([[0.0, -c], [-c, 0.0]])
    A[0] += 0.5 * np.eye(2)
    A[1:] += mu * A[:-1].copy()
    return CurveJet.from_taylor(A, delta=delta)


# Brackets

def test_second_and_third_brackets_match_closed_forms():
    curve = rotating_curve()
    for t0 in (0.0, 0.2):
        fam = bracket_family(curve, L=3, t0=t0)
        A = curve.A_at(t0)
        for k, ((i, j), E) in enumerate(sym_basis(2)):
            B2 = fam.level(2)[k]
            expected = np.block([[A @ E, np.zeros((2, 2))], [np.zeros((2, 2)), -E @ A]])
            assert_allclose(B2, expected, atol=1e-13)
            assert_allclose(fam.level(3)[k][:2, 2:], -2 * A @ E @ A, atol=1e-12)


def test_constant_hessian_kills_fourth_bracket():
    fam = bracket_family(CurveJet.constant(FLAT_2), L=4)
    assert np.max(np.abs(fam.level(4))) == 0.0
    assert fam.max_sp_defect() < 1e-10


def test_every_bracket_is_in_sp():
    fam = bracket_family(rotating_curve(), L=5, t0=0.1)
    assert fam.max_sp_defect() < 1e-10
    assert_allclose(fam.get(1, 1, 0), fam.get(1, 0, 1))


def test_short_jet_rejected():
    short = CurveJet(MatrixJet.from_taylor(np.array([FLAT_2, FLAT_2])))
    expect(PreconditionError, bracket_family, short, 5)


# Span

def test_rotating_null_direction_spans_sp4():
    cert = span_test(bracket_family(rotating_curve(), L=5))
    assert cert.passed and cert.rank == 10 and cert.target == 10
    w = cert.witness(bracket_family(rotating_curve(), L=2).get(2, 0, 1))
    assert w['contained']


def test_constant_hessian_has_rank_six():
    cert = span_test(bracket_family(CurveJet.constant(FLAT_2), L=5))
    assert cert.rank == 6
    assert cert.verdict == 'fail'
    assert len(cert.witnesses['missing_directions']) == 4


def test_first_brackets_alone_span_the_lower_block():
    fam = bracket_family(rotating_curve(), L=5)
    assert span_test(fam, levels=[1]).rank == 3
    ranks = [span_test(fam, levels=range(1, L + 1)).rank for L in range(1, 6)]
    assert ranks == sorted(ranks)


def test_rank_never_drops_with_depth():
    for d, seed in ((2, 11), (3, 12)):
        rng = np.random.default_rng(seed)
        n = default_null_direction(d)
        for _ in range(10):
            A = sample_admissible(n, rng)
            ranks = [span_test(bracket_family(A, L)).rank for L in range(1, 6)]
            assert ranks == sorted(ranks), ranks
            assert ranks[0] == d * (d + 1) // 2


def test_sweep_reports_first_passing_time():
    sweep = span_sweep(rotating_curve(), grid=[0.0, 0.25, 0.5])
    assert sweep['first_pass'] == 0.0
    assert list(sweep['table'].columns) == ['t', 'rank', 'verdict', 'sigma_min_ratio']


# Conjugation

def test_conjugation_requires_fixed_e_d():
    curve = rotating_curve()
    same = conjugate_family(curve, np.eye(2))
    assert same.A.max_abs_diff(curve.A) == 0.0
    c, s = np.cos(0.3), np.sin(0.3)
    expect(PreconditionError, conjugate_family, curve, [[c, -s], [s, c]])
    expect(PreconditionError, conjugate_family, curve, [[2.0, 0.0], [0.0, 1.0]])


def test_conjugation_preserves_verdicts_in_dimension_three():
    rng = np.random.default_rng(5)
    n = default_null_direction(3)
    for _ in range(20):
        A = sample_admissible(n, rng)
        G = random_fixing_rotation(3, rng)
        a = span_test(bracket_family(A, 5))
        b = span_test(bracket_family(conjugate_family(A, G), 5))
        assert a.verdict == b.verdict
        assert a.rank == b.rank


# Genericity scan

def test_scan_of_zero_samples_is_empty():
    stats = genericity_scan(default_null_direction(2), 0)
    assert stats['samples'] == 0 and stats['pass_rate'] is None
    assert stats['witnesses'] == []


def test_scan_passes_generically_and_is_deterministic():
    a = genericity_scan(default_null_direction(2), 100, seed=1)
    b = genericity_scan(default_null_direction(2), 100, seed=1)
    assert a['pass_rate'] >= 0.95
    a.pop('metadata'), b.pop('metadata')
    assert a == b


def test_static_null_direction_degrades_the_scan():
    stats = genericity_scan(static_null_direction(2), 50, seed=2)
    assert stats['pass_rate'] == 0.0
    assert any("n'(0) = 0" in w for w in stats['warnings'])


def test_span_pass_implies_full_endpoint_rank():
    scanner = GenericityScanner(default_null_direction(2), seed=3, endpoint_checks=3)
    stats = scanner.run(6)
    assert stats['endpoint_agreement']['violations'] == []
    assert stats['endpoint_agreement']['checked'] == 3


def test_span_and_endpoint_rank_agree_on_fifty_planar_samples():
    stats = GenericityScanner(default_null_direction(2), seed=21, endpoint_checks=50).run(50)
    agreement = stats['endpoint_agreement']
    assert agreement['checked'] == 50
    assert agreement['violations'] == []
    assert agreement['agree'] == 50


def test_span_and_endpoint_rank_agree_on_twenty_spatial_samples():
    stats = GenericityScanner(default_null_direction(3), seed=22, endpoint_checks=20).run(20)
    agreement = stats['endpoint_agreement']
    assert agreement['checked'] == 20
    assert agreement['violations'] == []
    assert agreement['agree'] == 20


if __name__ == '__main__':
    print('\n' + '=' * 70)
    print('🔍 MANE TEST')
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
