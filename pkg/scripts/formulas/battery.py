"""
Formula battery: every closed form against brute-force arithmetic

One row per (check, d) with the largest relative discrepancy. Checks:

    conjugated_derivatives   derivatives_of_conjugated vs the jet product P Lambda P^T
    normalized_family        A_{G,mu,alpha(G,mu)} jets vs the normalized shape (v, w)
    basis_matrices           F/E expansions vs A E, A' E, A'' E, A E A, A' E A + A E A'
    aggregate_sums           closed totals over J1 vs term-by-term sums
    diag_sum                 sum s_ij (w_i x_j + x_i w_j) vs sum sbar_i(w) x_i
    bracket_blocks           B^2..B^4 from the closed forms vs the bracket recursion
    b5_corner                -12 v_i^2 vs the recursion's B^5_ii corner
    det_identity             d = 2: det M vs 2 w_d - 3 v_1^2 = -v_1^2
    kernel_vs_det            nullity of M vs kernel dimension of the span system
    m_bar_reduction          d >= 3: det Mbar at v_3 = ... = 0 vs the p/q product formula

Usage:
    from formulas.battery import FormulaBattery

    table = FormulaBattery(dims=range(2, 7), seed=0, verbose=True).run()
    table.to_csv('formula_battery.csv', index=False)
"""

import os
import sys
from datetime import datetime
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from mane import bracket_family
from shared.errors import PreconditionError

from .closed_forms import NormalizedData, aggregate_sums, closed_form_error, diag_sum, literal_matrices, naive_sums
from .family import conjugated_oracle, derivatives_of_conjugated, random_conjugation_data, random_family
from .m_matrix import b5_corner, m_bar_limit, m_matrix, reduced_determinant, span_kernel_dimension

COLUMNS = ['check', 'd', 'max_error', 'tolerance', 'passed']


def _rel(got, want) -> float:
    got, want = np.asarray(got, float), np.asarray(want, float)
    return float(np.max(np.abs(got - want)) / max(1.0, float(np.max(np.abs(want)))))


def _random_coefficients(d: int, rng: np.random.Generator) -> np.ndarray:
    c = np.triu(rng.normal(size=(d, d)))
    c[-1, -1] = 0.0
    return c


class FormulaBattery:
    """Closed forms vs brute force over a range of dimensions"""

    TOLERANCE = 1e-12
    REDUCTION_TOLERANCE = 1e-10
    JET_ORDER = 6

    def __init__(self, dims: Iterable[int] = range(2, 7), seed: int = 0,
                 tolerance: Optional[float] = None, verbose: bool = False):
        self.dims = list(dims)
        if any(d < 2 for d in self.dims):
            raise PreconditionError('formula battery needs d >= 2')
        self.seed = seed
        self.tolerance = self.TOLERANCE if tolerance is None else tolerance
        self.verbose = verbose
        self.rows: List[Dict] = []

    def _row(self, check: str, d: int, error: float, tolerance: Optional[float] = None):
        tol = self.tolerance if tolerance is None else tolerance
        row = {'check': check, 'd': d, 'max_error': float(error), 'tolerance': tol,
               'passed': bool(error <= tol)}
        self.rows.append(row)
        if self.verbose:
            mark = '✓' if row['passed'] else '❌'
            print(f'   {mark} {check:<24} d={d}  max_error={error:.2e}')

    def check_dimension(self, d: int):
        rng = np.random.default_rng([self.seed, d])

        P, Lam = random_conjugation_data(d, rng)
        closed, oracle = derivatives_of_conjugated(P, Lam), conjugated_oracle(P, Lam)
        self._row('conjugated_derivatives', d, max(_rel(closed[0], oracle[0]), _rel(closed[1], oracle[1])))

        fam = random_family(d, rng, self.JET_ORDER)
        data = fam.normalized()
        A = fam.A()
        self._row('normalized_family', d, max(_rel(A.value(0.0), data.A0),
                                              _rel(A.derivative_at(1), data.A_dot),
                                              _rel(A.derivative_at(2), data.A_ddot)))

        self._row('basis_matrices', d, closed_form_error(NormalizedData.random(d, rng)))

        sums_data = NormalizedData.random(d, rng)
        a, b, c = (_random_coefficients(d, rng) for _ in range(3))
        D, U = aggregate_sums(a, b, c, sums_data)
        D0, U0 = naive_sums(a, b, c, sums_data)
        self._row('aggregate_sums', d, max(_rel(D, D0), _rel(U, U0)))

        if d > 2:
            s, w, x = np.triu(rng.normal(size=(d - 1, d - 1))), rng.normal(size=d - 1), rng.normal(size=d - 1)
            lhs = sum(s[i, j] * (w[i] * x[j] + x[i] * w[j]) for i in range(d - 1) for j in range(i, d - 1))
            self._row('diag_sum', d, _rel(lhs, diag_sum(s, w) @ x))

        brackets = bracket_family(fam.curve(), L=5)
        zero = np.zeros((d, d))
        block_error = 0.0
        for k, (i, j) in enumerate(brackets.indices):
            lit = literal_matrices(i, j, data)
            expected = {
                2: np.block([[lit['xi'], zero], [zero, -lit['xi'].T]]),
                3: np.block([[lit['eta'], -2 * lit['gamma']], [zero, -lit['eta'].T]]),
                4: np.block([[lit['zeta'], -3 * lit['kappa']], [zero, -lit['zeta'].T]]),
            }
            for level, B in expected.items():
                block_error = max(block_error, _rel(brackets.level(level)[k], B))
        self._row('bracket_blocks', d, block_error)

        corner = max(_rel(brackets.get(5, i, i)[d - 1, 2 * d - 1], b5_corner(data.v, i)) for i in range(d - 1))
        self._row('b5_corner', d, corner)

        M = m_matrix(data.v, data.mu, data.w)
        if d == 2:
            v1 = data.v[0]
            self._row('det_identity', d, abs(M.det + v1 ** 2) / v1 ** 2)
        nullity = M.size - np.linalg.matrix_rank(M.m)
        kernel = span_kernel_dimension(data)['kernel_dimension']
        self._row('kernel_vs_det', d, abs(nullity - kernel), tolerance=0.0)

        if d > 2:
            v = rng.normal(size=d - 1)
            v[2:] = 0.0
            mu = np.arange(1, d) + rng.uniform(0, 0.3, d - 1)
            got = m_bar_limit(v, mu).det
            want = reduced_determinant(v[0], v[1], mu)['det']
            self._row('m_bar_reduction', d, abs(got - want) / max(1.0, abs(want)), self.REDUCTION_TOLERANCE)

    def run(self) -> pd.DataFrame:
        self.rows = []
        if self.verbose:
            print(f'\n{"="*70}')
            print(f'🔍 FORMULA BATTERY: d in {self.dims}, seed {self.seed}')
            print(f'{"="*70}')
        for d in self.dims:
            self.check_dimension(d)
        table = pd.DataFrame(self.rows, columns=COLUMNS)
        if self.verbose:
            failed = int((~table['passed']).sum())
            print(f'{"="*70}')
            print('✅ All formula checks passed' if not failed else f'❌ {failed} formula check(s) failed')
        return table


def formula_verify(dims: Iterable[int] = range(2, 7), seed: int = 0, **config) -> Dict:
    table = FormulaBattery(dims, seed=seed, **config).run()
    return {
        'passed': bool(table['passed'].all()),
        'table': table,
        'metadata': {'verified_at': datetime.now().isoformat(), 'seed': seed},
    }
