"""
End-point differential of the matrix control system at w = 0

    dE(0)(v) = X(delta) int_0^delta X(t)^{-1} [0 0; V(t) 0] X(t) dt

Columns are assembled by Gauss-Legendre quadrature for an L2-orthonormal
cubic B-spline basis on 2^k dyadic cells (times each E_ij), left-translated into
sp(2d) and ranked by SVD against 2d^2 + d. The level is refined until the
rank and sigma_min ratio stabilize; the final columns are cross-checked
against central finite differences of transition_map.

Usage:
    from variational.endpoint import endpoint_differential

    cert = endpoint_differential(curve)
    cert.rank, cert.verdict, cert.cross_check_error
"""

import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from datetime import datetime
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import BSpline

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import CrossCheckError, PreconditionError
from shared.jets import CurveJet
from shared.load_env import get_setting
from shared.symplectic import lower_left, rank_verdict, sp_dimension, sp_vectorize

from .transition import ControlProblem, TransitionOperator


@dataclass
class SubmersionCertificate:
    directions: int
    singular_values: List[float]
    rank: int
    target: int
    verdict: str
    sigma_min_ratio: float
    level: Optional[int] = None
    cross_check_error: Optional[float] = None
    warnings: List[str] = field(default_factory=list)
    metadata: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == 'pass'

    def to_dict(self) -> Dict:
        return asdict(self)


class DyadicSplineBasis:
    """L2-orthonormal cubic B-splines on 2^level equal cells of [0, delta]"""

    QUAD_POINTS = 8

    def __init__(self, delta: float, level: int, degree: int = 3):
        self.delta = float(delta)
        self.level = level
        cells = 2 ** level
        inner = np.linspace(0.0, self.delta, cells + 1)
        knots = np.concatenate([[0.0] * degree, inner, [self.delta] * degree])
        count = len(knots) - degree - 1
        self.splines = [BSpline(knots, np.eye(count)[k], degree) for k in range(count)]
        x, w = np.polynomial.legendre.leggauss(self.QUAD_POINTS)
        half = 0.5 * (inner[1:] - inner[:-1])
        mid = 0.5 * (inner[1:] + inner[:-1])
        self.nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        self.weights = (half[:, None] * w[None, :]).ravel()
        raw = np.array([s(self.nodes) for s in self.splines])
        gram = (raw * self.weights) @ raw.T
        self.L = np.linalg.cholesky(gram)
        self.Linv = np.linalg.inv(self.L)
        self.values = self.Linv @ raw

    def __len__(self) -> int:
        return len(self.splines)

    def function(self, a: int) -> Callable[[float], float]:
        coeffs = self.Linv[a]
        splines = self.splines

        def phi(t):
            return float(sum(c * s(t) for c, s in zip(coeffs, splines) if c != 0.0))

        return phi


def _conjugated_terms(op: TransitionOperator, basis_mats: Sequence[np.ndarray], ts: np.ndarray) -> np.ndarray:
    """X(t)^{-1} [0 0; E_k 0] X(t) at each node, shape (len(ts), K, 2d, 2d)"""
    lows = [lower_left(E) for E in basis_mats]
    out = np.empty((len(ts), len(lows)) + op.final.shape)
    for q, t in enumerate(ts):
        X = op.at(t)
        Xinv = op.inverse_at(t)
        for k, B in enumerate(lows):
            out[q, k] = Xinv @ B @ X
    return out


class EndpointDifferential:
    """dE(0) on dyadic spline controls with refinement and a finite-difference cross-check"""

    RANK_THRESHOLD = 1e-8
    START_LEVEL = 1
    MAX_LEVEL = 8
    STABILITY = 0.01
    FD_STEP = 1e-5
    FD_TOLERANCE = 1e-6
    FD_RTOL = 1e-13
    FD_ATOL = 1e-14

    def __init__(self, A: CurveJet, delta: Optional[float] = None,
                 rank_threshold: Optional[float] = None, threads: Optional[int] = None):
        self.problem = ControlProblem(A, delta)
        self.d = self.problem.d
        self.delta = self.problem.delta
        self.rank_threshold = self.RANK_THRESHOLD if rank_threshold is None else rank_threshold
        self.threads = threads or get_setting('SUBRQ_THREADS', 1, int)
        self.base = self.problem.solve()

    @property
    def target(self) -> int:
        return sp_dimension(self.d)

    def raw_columns(self, basis: DyadicSplineBasis) -> np.ndarray:
        """dE(0)(phi_a E_k) as matrices, shape (len(basis), K, 2d, 2d)"""
        terms = _conjugated_terms(self.base, self.problem.basis, basis.nodes)
        integrals = np.einsum('aq,q,qkij->akij', basis.values, basis.weights, terms)
        return np.einsum('ij,akjl->akil', self.base.final, integrals)

    def certificate_for(self, columns: np.ndarray, level: Optional[int] = None) -> SubmersionCertificate:
        """Columns are left-translated by X(delta)^{-1} into sp(2d) before ranking"""
        flat = columns.reshape((-1,) + columns.shape[-2:])
        Xinv = self.base.inverse_at(self.delta)
        V = np.array([sp_vectorize(Xinv @ C, tol=1e-7) for C in flat]).T
        verdict = rank_verdict(V, self.target, self.rank_threshold)
        return SubmersionCertificate(
            directions=V.shape[1], singular_values=verdict['singular_values'], rank=verdict['rank'],
            target=self.target, verdict=verdict['verdict'], sigma_min_ratio=verdict['sigma_min_ratio'],
            level=level, metadata={'delta': self.delta, 'certified_at': datetime.now().isoformat()})

    def cross_check(self, basis: DyadicSplineBasis, columns: np.ndarray,
                    count: Optional[int] = None) -> float:
        """
        Worst relative error between quadrature columns and central differences

        Raises:
            CrossCheckError: error above FD_TOLERANCE
        """
        pairs = [(a, k) for a in range(len(basis)) for k in range(self.problem.control_dim)]
        if count is not None and count < len(pairs):
            picks = np.linspace(0, len(pairs) - 1, count).round().astype(int)
            pairs = [pairs[i] for i in picks]
        h = self.FD_STEP
        K = self.problem.control_dim
        cell = self.delta / 2 ** basis.level

        def one(pair):
            a, k = pair
            phi = basis.function(a)
            e = np.eye(K)[k]
            plus, minus = self.problem.solve_stacked(
                [lambda t: h * phi(t) * e, lambda t: -h * phi(t) * e],
                rtol=self.FD_RTOL, atol=self.FD_ATOL, max_step=cell)
            fd = (plus - minus) / (2.0 * h)
            col = columns[a, k]
            return float(np.max(np.abs(fd - col)) / max(float(np.max(np.abs(col))), 1e-300))

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                errors = list(pool.map(one, pairs))
        else:
            errors = [one(p) for p in pairs]
        worst = max(errors) if errors else 0.0
        if worst > self.FD_TOLERANCE:
            raise CrossCheckError(f'dE(0) quadrature disagrees with finite differences (relative {worst:.2e})')
        return worst

    def run(self, level: Optional[int] = None, cross_check: Union[str, int, None] = 'all') -> SubmersionCertificate:
        """
        Refine from START_LEVEL unless a fixed level is given

        cross_check: 'all', a number of sampled columns, or None to skip
        """
        warnings = []
        if level is not None:
            basis = DyadicSplineBasis(self.delta, level)
            columns = self.raw_columns(basis)
            cert = self.certificate_for(columns, level)
        else:
            prev = None
            for k in range(self.START_LEVEL, self.MAX_LEVEL + 1):
                basis = DyadicSplineBasis(self.delta, k)
                columns = self.raw_columns(basis)
                cert = self.certificate_for(columns, k)
                if prev is not None and prev.rank == cert.rank:
                    small = max(prev.sigma_min_ratio, cert.sigma_min_ratio) < self.rank_threshold
                    close = abs(cert.sigma_min_ratio - prev.sigma_min_ratio) <= self.STABILITY * prev.sigma_min_ratio
                    if small or close:
                        break
                prev = cert
            else:
                warnings.append(f'rank did not stabilize by level {self.MAX_LEVEL}')
        if cross_check is not None:
            count = None if cross_check == 'all' else int(cross_check)
            cert.cross_check_error = self.cross_check(basis, columns, count)
        cert.warnings.extend(warnings)
        return cert


def endpoint_differential(A: CurveJet, delta: Optional[float] = None, level: Optional[int] = None,
                          cross_check: Union[str, int, None] = 'all',
                          rank_threshold: Optional[float] = None) -> SubmersionCertificate:
    return EndpointDifferential(A, delta, rank_threshold).run(level, cross_check)


def gaussian_bumps(delta: float, count: int, d: int, width: Optional[float] = None) -> List[Callable]:
    """count bumps inside (0, delta), each along every E_ij"""
    K = d * (d + 1) // 2
    centres = np.linspace(0.0, delta, count + 2)[1:-1]
    sigma = width if width is not None else delta / (2.0 * (count + 1))
    family = []
    for c in centres:
        for k in range(K):
            e = np.eye(K)[k]
            family.append(lambda t, c=c, e=e: np.exp(-((t - c) / sigma) ** 2) * e)
    return family


def finite_family_submersion(A: CurveJet, family: Sequence[Callable], delta: Optional[float] = None,
                             panels: int = 64, rank_threshold: Optional[float] = None) -> SubmersionCertificate:
    """Rank of the pushed directions X(delta)^{-1} dE(0) w^(k) through their Gram matrix"""
    problem = ControlProblem(A, delta)
    target = sp_dimension(problem.d)
    if not family:
        return SubmersionCertificate(0, [], 0, target, 'fail', 0.0,
                                     warnings=['empty family'])
    op = problem.solve()
    x, w = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, problem.delta, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    Xs = [op.at(t) for t in nodes]
    Xinvs = [op.inverse_at(t) for t in nodes]
    vectors = []
    for control in family:
        total = np.zeros_like(op.final)
        for t, wt, X, Xinv in zip(nodes, weights, Xs, Xinvs):
            total += wt * (Xinv @ lower_left(problem.lower_block(control(t))) @ X)
        vectors.append(sp_vectorize(total, tol=1e-7))
    V = np.array(vectors).T
    gram = V.T @ V
    threshold = EndpointDifferential.RANK_THRESHOLD if rank_threshold is None else rank_threshold
    verdict = rank_verdict(V, target, threshold)
    warnings = [] if len(family) >= target else [f'{len(family)} directions cannot span {target} dimensions']
    return SubmersionCertificate(
        directions=len(family), singular_values=verdict['singular_values'], rank=verdict['rank'],
        target=target, verdict=verdict['verdict'], sigma_min_ratio=verdict['sigma_min_ratio'],
        warnings=warnings,
        metadata={'gram_rank': int(np.linalg.matrix_rank(gram, tol=threshold ** 2 * max(np.max(np.abs(gram)), 1e-300))),
                  'certified_at': datetime.now().isoformat()})
