"""
Monte-Carlo genericity scan over admissible curves with a fixed null direction

Samples are built as A(t) = P(t) Lambda(t) P(t)^T where P(t) is the
orthonormal completion of n(t) (last column n) and

    Lambda(t) = [I + sum_k t^k S_k  0; 0  0],   S_k random symmetric

so rank A(t) = d - 1 and A(t) n(t) = 0 hold by construction. Each sample is
run through bracket_family + span_test; a few can be cross-checked against
the end-point differential rank.

Usage:
    from mane.genericity import GenericityScanner, default_null_direction

    scanner = GenericityScanner(default_null_direction(2), seed=1, verbose=True)
    stats = scanner.run(1000)
    stats['pass_rate'], stats['sigma_min_quantiles']
"""

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Dict, List, Optional, Union

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import PreconditionError
from shared.jets import CurveJet, MatrixJet, normalize_vector_jet, orthonormal_completion
from shared.load_env import get_setting
from variational import endpoint_differential

from .brackets import bracket_family
from .span import span_test

WITNESS_LIMIT = 10


def conjugate_family(A: CurveJet, G) -> CurveJet:
    """
    G A G^T for G orthogonal with G e_d = e_d

    Raises:
        PreconditionError: G is not orthogonal or moves e_d
    """
    G = np.asarray(G, float)
    d = A.dim
    if G.shape != (d, d):
        raise PreconditionError(f'G must be {d}x{d}')
    if np.max(np.abs(G @ G.T - np.eye(d))) > 1e-10:
        raise PreconditionError('G is not orthogonal')
    e_d = np.eye(d)[-1]
    if np.max(np.abs(G @ e_d - e_d)) > 1e-10:
        raise PreconditionError('G does not fix e_d')
    return A.conjugated(G)


def random_fixing_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random G = [Gbar 0; 0 1]"""
    Q, R = np.linalg.qr(rng.normal(size=(d - 1, d - 1)))
    Q = Q * np.sign(np.diag(R))
    G = np.eye(d)
    G[:-1, :-1] = Q
    return G


def default_null_direction(d: int, order: int = 5, velocity=None) -> MatrixJet:
    """n(t) = (e_d + t v) / |e_d + t v| with v = e_1 unless given (v must be orthogonal to e_d)"""
    v = np.eye(d)[0] if velocity is None else np.asarray(velocity, float)
    coeffs = np.zeros((2, d, 1))
    coeffs[0, -1, 0] = 1.0
    coeffs[1, :, 0] = v
    return normalize_vector_jet(MatrixJet(coeffs, order))


def static_null_direction(d: int, order: int = 5) -> MatrixJet:
    e = np.zeros((1, d, 1))
    e[0, -1, 0] = 1.0
    return MatrixJet(e, order)


def sample_admissible(n: MatrixJet, rng: np.random.Generator, scale: float = 1.0,
                      delta: float = 1.0) -> CurveJet:
    d = n.shape[0]
    order = n.order if n.order is not None else n.degree
    P = orthonormal_completion(n)
    coeffs = np.zeros((order + 1, d, d))
    coeffs[0, :-1, :-1] = np.eye(d - 1)
    for k in range(1, order + 1):
        S = rng.normal(scale=scale, size=(d - 1, d - 1))
        coeffs[k, :-1, :-1] = 0.5 * (S + S.T)
    Lam = MatrixJet(coeffs, order)
    A = (P @ Lam @ P.T).truncated(order)
    A = MatrixJet(0.5 * (A.coeffs + np.transpose(A.coeffs, (0, 2, 1))), A.order)
    return CurveJet(A, n, delta)


class GenericityScanner:
    """Pass fraction of the span test over random admissible curves"""

    DEPTH = 5
    RANK_THRESHOLD = 1e-8
    HISTOGRAM_BINS = 20

    def __init__(self, n: Union[MatrixJet, CurveJet], seed: int = 0, depth: Optional[int] = None,
                 scale: float = 1.0, rank_threshold: Optional[float] = None,
                 threads: Optional[int] = None, endpoint_checks: int = 0,
                 delta: float = 0.5, verbose: bool = False):
        self.n = n.n if isinstance(n, CurveJet) else n
        if self.n is None:
            raise PreconditionError('genericity scan needs a null direction n(t)')
        self.d = self.n.shape[0]
        self.seed = seed
        self.depth = depth or self.DEPTH
        self.scale = scale
        self.rank_threshold = self.RANK_THRESHOLD if rank_threshold is None else rank_threshold
        self.threads = threads or get_setting('SUBRQ_THREADS', 1, int)
        self.endpoint_checks = endpoint_checks
        self.delta = delta
        self.verbose = verbose

    def _warnings(self) -> List[str]:
        warnings = []
        n0 = self.n.value(0.0)[:, 0]
        if np.max(np.abs(n0 - np.eye(self.d)[-1])) > 1e-10:
            warnings.append('n(0) != e_d, sampled curves do not start at diag(I, 0)')
        if np.linalg.norm(self.n.derivative_at(1, 0.0)) < 1e-12:
            warnings.append("n'(0) = 0, the regularity condition on n fails")
        return warnings

    def _one(self, A: CurveJet) -> Dict:
        cert = span_test(bracket_family(A, self.depth), rank_threshold=self.rank_threshold)
        return {'rank': cert.rank, 'verdict': cert.verdict, 'sigma_min_ratio': cert.sigma_min_ratio}

    def run(self, samples: int) -> Dict:
        rng = np.random.default_rng(self.seed)
        curves = [sample_admissible(self.n, rng, self.scale, self.delta) for _ in range(samples)]
        warnings = self._warnings()
        if self.verbose:
            print(f'\n{"="*70}')
            print(f'🔍 GENERICITY SCAN: d = {self.d}, {samples} samples, seed {self.seed}')
            print(f'{"="*70}')
            for w in warnings:
                print(f'⚠️  {w}')

        if self.threads > 1 and samples > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(self._one, curves))
        else:
            results = [self._one(A) for A in curves]

        stats = self.statistics(results, curves)
        stats['warnings'] = warnings
        if self.endpoint_checks and samples:
            stats['endpoint_agreement'] = self._endpoint_agreement(curves, results)
        if self.verbose:
            if samples:
                print(f'✓ pass rate {stats["pass_rate"]:.4f} ({stats["passes"]}/{samples})')
            for w in stats['witnesses'][:3]:
                print(f'❌ sample {w["index"]}: rank {w["rank"]}, sigma_min ratio {w["sigma_min_ratio"]:.2e}')
            print(f'{"="*70}')
        return stats

    def statistics(self, results: List[Dict], curves: List[CurveJet]) -> Dict:
        count = len(results)
        stats = {
            'samples': count,
            'd': self.d,
            'seed': self.seed,
            'depth': self.depth,
            'passes': 0,
            'pass_rate': None,
            'sigma_min_quantiles': {},
            'histogram': {'edges': [], 'counts': []},
            'witnesses': [],
            'metadata': {'scanned_at': datetime.now().isoformat()},
        }
        if not count:
            return stats
        ratios = np.array([r['sigma_min_ratio'] for r in results])
        passes = sum(r['verdict'] == 'pass' for r in results)
        stats['passes'] = int(passes)
        stats['pass_rate'] = passes / count
        stats['sigma_min_quantiles'] = {
            f'q{int(q * 100):02d}': float(np.quantile(ratios, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95)}
        logs = np.log10(np.maximum(ratios, 1e-300))
        counts, edges = np.histogram(logs, bins=self.HISTOGRAM_BINS)
        stats['histogram'] = {'edges': edges.tolist(), 'counts': counts.tolist()}
        for k, r in enumerate(results):
            if r['verdict'] != 'pass' and len(stats['witnesses']) < WITNESS_LIMIT:
                stats['witnesses'].append({'index': k, 'rank': r['rank'], 'verdict': r['verdict'],
                                           'sigma_min_ratio': r['sigma_min_ratio'],
                                           'A_dot0': curves[k].A.derivative_at(1, 0.0).tolist()})
        return stats

    def _endpoint_agreement(self, curves: List[CurveJet], results: List[Dict]) -> Dict:
        """span pass must imply full end-point rank"""
        picks = np.linspace(0, len(curves) - 1, min(self.endpoint_checks, len(curves))).round().astype(int)
        agree, violations = 0, []
        for k in picks:
            cert = endpoint_differential(curves[k], level=2, cross_check=None)
            full = cert.rank == cert.target
            if results[k]['verdict'] == 'pass' and not full:
                violations.append(int(k))
            elif (results[k]['verdict'] == 'pass') == full:
                agree += 1
        return {'checked': len(picks), 'agree': agree, 'violations': violations}


def genericity_scan(n: Union[MatrixJet, CurveJet], samples: int, seed: int = 0, **config) -> Dict:
    return GenericityScanner(n, seed=seed, **config).run(samples)


def statistics_json(stats: Dict) -> str:
    return json.dumps(stats, indent=2, sort_keys=True, default=float)
