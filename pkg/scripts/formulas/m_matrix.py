"""
The reduced matrix M(v, mu, w), its scaling limit and the B^5 corner

Eliminating a, b, c_ij and c_ii from the linear-independence system of
{B^2(J1), B^3(J2), B^4(J1), sum_i v_i B^3_id} leaves sum_j m_ij c_jd = 0 with

    f_ij = (v_i w_j - w_i v_j) / v_i - 3 mu_i v_j
    g_ij = 2/3 f_ij + v_j (mu_i + mu_j)
    m_ij = f_ij v_i / (mu_i + mu_j) + g_ij w_i / (mu_i^2 - mu_j^2)                 i != j
    m_ii = sum_{j != i} f_ij v_j / (mu_i + mu_j) - g_ij w_j / (mu_i^2 - mu_j^2)
           + 2 w_d - 3 v_i^2

so the family spans iff det M != 0 (given v_i != 0 and mu_i != +-mu_j).
Along w(t mu) = -[omega; -|v|^2] - 2 t [Gamma v; 0] the matrix M(v, t mu)
tends to Mbar(v, mu) at rate 1/t:

    mbar_ij = -v_i v_j (5 mu_i + 6 mu_j) / (3 (mu_i + mu_j))
    mbar_ii = sum_{j != i} v_j^2 (3 mu_i + 2 mu_j) / (3 (mu_i + mu_j)) - v_i^2

Usage:
    from formulas.m_matrix import m_matrix, m_bar_limit, span_kernel_dimension

    M = m_matrix(data.v, data.mu, data.w)
    M.det, span_kernel_dimension(data)['kernel_dimension']
"""

import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import PoleError, PreconditionError
from shared.symplectic import rank_verdict, sp_vectorize

from .closed_forms import NormalizedData, literal_matrices

POLE_TOLERANCE = 1e-12
VANISHING_TOLERANCE = 1e-14
KERNEL_THRESHOLD = 1e-8


@dataclass
class MMatrix:
    m: np.ndarray
    det: float
    f: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    metadata: Dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.m.shape[0]


def _check_poles(mu: np.ndarray):
    scale = max(1.0, float(np.max(np.abs(mu)))) if mu.size else 1.0
    for i in range(mu.size):
        for j in range(i + 1, mu.size):
            if abs(mu[i] - mu[j]) <= POLE_TOLERANCE * scale:
                raise PoleError(f'mu_{i + 1} = mu_{j + 1} ({mu[i]:.6g})')
            if abs(mu[i] + mu[j]) <= POLE_TOLERANCE * scale:
                raise PoleError(f'mu_{i + 1} = -mu_{j + 1} ({mu[i]:.6g})')


def _check_v(v: np.ndarray):
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    small = [i + 1 for i in range(v.size) if abs(v[i]) <= VANISHING_TOLERANCE * scale]
    if small:
        raise PreconditionError(f'v_i = 0 for i in {small}, the elimination needs every v_i != 0')


def m_matrix(v, mu, w) -> MMatrix:
    """
    Raises:
        PreconditionError: some v_i vanishes or the shapes disagree
        PoleError: mu_i = +-mu_j for some i != j
    """
    v, mu, w = (np.asarray(x, float) for x in (v, mu, w))
    n = v.size
    if mu.shape != (n,) or w.shape != (n + 1,):
        raise PreconditionError('m_matrix needs v, mu of length d-1 and w of length d')
    _check_v(v)
    _check_poles(mu)
    wd = w[-1]
    f = np.zeros((n, n))
    g = np.zeros((n, n))
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            f[i, j] = (v[i] * w[j] - w[i] * v[j]) / v[i] - 3 * mu[i] * v[j]
            g[i, j] = 2.0 / 3.0 * f[i, j] + v[j] * (mu[i] + mu[j])
    for i in range(n):
        diag = 2 * wd - 3 * v[i] ** 2
        for j in range(n):
            if j == i:
                continue
            plus, sq = mu[i] + mu[j], mu[i] ** 2 - mu[j] ** 2
            M[i, j] = f[i, j] * v[i] / plus + g[i, j] * w[i] / sq
            diag += f[i, j] * v[j] / plus - g[i, j] * w[j] / sq
        M[i, i] = diag
    out = MMatrix(M, float(np.linalg.det(M)), f=f, g=g,
                  metadata={'kind': 'exact', 'computed_at': datetime.now().isoformat()})
    if n == 1:
        out.metadata['det_identity'] = float(2 * wd - 3 * v[0] ** 2)
    return out


def pq_polynomials(mu) -> Dict[str, np.ndarray]:
    """p_ij, q_ij with mbar_ij = v_i v_j p_ij / (3 (mu_i^2 - mu_j^2)) and the diagonal q-sum"""
    mu = np.asarray(mu, float)
    a, b = mu[:, None], mu[None, :]
    p = -5 * a ** 2 - a * b + 6 * b ** 2
    q = 3 * a ** 2 - a * b - 2 * b ** 2
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(q, 0.0)
    return {'p': p, 'q': q}


def m_bar_limit(v, mu) -> MMatrix:
    """
    Raises:
        PoleError: mu_i = +-mu_j for some i != j
    """
    v, mu = np.asarray(v, float), np.asarray(mu, float)
    n = v.size
    if mu.shape != (n,):
        raise PreconditionError('m_bar_limit needs v and mu of the same length')
    _check_poles(mu)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                M[i, j] = -v[i] * v[j] * (5 * mu[i] + 6 * mu[j]) / (3 * (mu[i] + mu[j]))
        M[i, i] = sum(v[j] ** 2 * (3 * mu[i] + 2 * mu[j]) / (3 * (mu[i] + mu[j]))
                      for j in range(n) if j != i) - v[i] ** 2
    pq = pq_polynomials(mu)
    return MMatrix(M, float(np.linalg.det(M)), p=pq['p'], q=pq['q'],
                   metadata={'kind': 'limit', 'computed_at': datetime.now().isoformat()})


def reduced_determinant(v1: float, v2: float, mu) -> Dict[str, float]:
    """
    det Mbar with v_3 = ... = 0, as prod_{i >= 3} mbar_ii times the 2x2 block

    The block determinant is written through p and q:
        9 (mu_1^2 - mu_2^2)^2 det2 = v1^2 v2^2 (-q12 q21 + p12 p21 + 9 (mu_1^2 - mu_2^2)^2)
                                     + 3 (mu_1^2 - mu_2^2) (v1^4 q21 - v2^4 q12)
    """
    mu = np.asarray(mu, float)
    _check_poles(mu)
    pq = pq_polynomials(mu)
    p, q = pq['p'], pq['q']
    gap = mu[0] ** 2 - mu[1] ** 2
    det2 = (v1 ** 2 * v2 ** 2 * (-q[0, 1] * q[1, 0] + p[0, 1] * p[1, 0] + 9 * gap ** 2)
            + 3 * gap * (v1 ** 4 * q[1, 0] - v2 ** 4 * q[0, 1])) / (9 * gap ** 2)
    tail = 1.0
    for i in range(2, mu.size):
        tail *= sum(vj ** 2 * q[i, j] / (3 * (mu[i] ** 2 - mu[j] ** 2)) for j, vj in ((0, v1), (1, v2)))
    return {'det2': float(det2), 'tail': float(tail), 'det': float(det2 * tail)}


def scaled_w(v, mu, omega, t: float) -> np.ndarray:
    """w(t mu) = -[omega; -|v|^2] - 2 t [Gamma v; 0], omega = Gbar wbar"""
    v, mu, omega = (np.asarray(x, float) for x in (v, mu, omega))
    return np.concatenate([-omega - 2 * t * mu * v, [v @ v]])


def m_bar_convergence(v, mu, omega, ts: Optional[Sequence[float]] = None) -> Dict:
    """
    max |M(v, t mu) - Mbar(v, mu)| on a t-grid and its log-log slope

    A diagnostic of the scaling limit; it never decides a verdict.
    """
    ts = np.logspace(2, 5, 7) if ts is None else np.asarray(ts, float)
    v, mu = np.asarray(v, float), np.asarray(mu, float)
    limit = m_bar_limit(v, mu).m
    rows = []
    for t in ts:
        M = m_matrix(v, t * mu, scaled_w(v, mu, omega, t)).m
        rows.append({'t': float(t), 'error': float(np.max(np.abs(M - limit)))})
    table = pd.DataFrame(rows, columns=['t', 'error'])
    slope = float(np.polyfit(np.log10(table['t']), np.log10(table['error']), 1)[0])
    return {'table': table, 'slope': slope}


def b5_corner(v, i: int) -> float:
    """(d, d) entry of the upper-right block of B^5_ii(0); only -6 A' E_ii A' reaches it"""
    v = np.asarray(v, float)
    return float(-12.0 * v[i] ** 2)


def span_members(data: NormalizedData) -> List[np.ndarray]:
    """B^2 on J1, B^3 on J2, B^4 on J1 and sum_i v_i B^3_id, built from literal products"""
    d = data.d
    m = d - 1
    zero = np.zeros((d, d))
    lits = {(i, j): literal_matrices(i, j, data) for i in range(d) for j in range(i, d)}

    def B3(i, j):
        L = lits[(i, j)]
        return np.block([[L['eta'], -2 * L['gamma']], [zero, -L['eta'].T]])

    members = []
    J1 = [(i, j) for i in range(d) for j in range(i, d) if (i, j) != (m, m)]
    J2 = [(i, j) for i in range(m) for j in range(i, m)]
    for ij in J1:
        L = lits[ij]
        members.append(np.block([[L['xi'], zero], [zero, -L['xi'].T]]))
    for ij in J2:
        members.append(B3(*ij))
    for ij in J1:
        L = lits[ij]
        members.append(np.block([[L['zeta'], -3 * L['kappa']], [zero, -L['zeta'].T]]))
    members.append(sum(data.v[i] * B3(i, m) for i in range(m)))
    return members


def span_kernel_dimension(data: NormalizedData, threshold: float = KERNEL_THRESHOLD) -> Dict:
    """
    Kernel dimension of the coefficient system of span_members

    The member count equals d^2 + d(d+1)/2 - 1, the dimension of
    {[M S; 0 -M^T] : S_dd = 0}, so a trivial kernel means the members span it.
    """
    members = span_members(data)
    V = np.array([sp_vectorize(B) for B in members]).T
    target = len(members)
    verdict = rank_verdict(V, target, threshold)
    return {
        'members': target,
        'target': data.d ** 2 + data.d * (data.d + 1) // 2 - 1,
        'rank': verdict['rank'],
        'kernel_dimension': target - verdict['rank'],
        'sigma_min_ratio': verdict['sigma_min_ratio'],
        'singular_values': verdict['singular_values'],
    }
