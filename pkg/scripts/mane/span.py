"""
Span test of a bracket family against sp(2d)

Each B is written in the coordinates of sp(2d) (M block row major, then the
upper triangles of S and T) and the family is ranked by SVD against
2d^2 + d. Members that violate [M S; T -M^T] beyond 1e-9 are rejected.

Usage:
    from mane.span import span_test, span_sweep

    cert = span_test(bracket_family(curve))
    cert.rank, cert.verdict
    cert.witness(B)                 # coefficients expressing B in the family
    span_sweep(curve, grid=np.linspace(0, 0.5, 11))['first_pass']
"""

import os
import sys
from dataclasses import dataclass, field, asdict
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import PreconditionError
from shared.jets import CurveJet
from shared.symplectic import rank_verdict, sp_dimension, sp_vectorize

from .brackets import BracketFamily, bracket_family

RANK_THRESHOLD = 1e-8
MEMBERSHIP_TOLERANCE = 1e-9


@dataclass
class SpanCertificate:
    vectors: np.ndarray
    singular_values: List[float]
    rank: int
    target: int
    verdict: str
    sigma_min_ratio: float
    levels: List[int]
    t0: float
    witnesses: Dict = field(default_factory=dict)
    metadata: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == 'pass'

    def witness(self, B: np.ndarray) -> Dict:
        """Least-squares coefficients c with sum c_k member_k = B, and the residual"""
        target = sp_vectorize(B, tol=MEMBERSHIP_TOLERANCE)
        coeffs, *_ = np.linalg.lstsq(self.vectors, target, rcond=None)
        residual = float(np.linalg.norm(self.vectors @ coeffs - target))
        return {'coefficients': coeffs, 'residual': residual,
                'contained': residual <= 1e-8 * max(1.0, float(np.linalg.norm(target)))}

    def to_dict(self) -> Dict:
        out = asdict(self)
        out.pop('vectors')
        return out


def span_test(fam: BracketFamily, levels: Optional[Sequence[int]] = None,
              rank_threshold: Optional[float] = None) -> SpanCertificate:
    """
    Raises:
        PreconditionError: empty family, or a member outside sp(2d)
    """
    levels = list(range(1, fam.depth + 1)) if levels is None else list(levels)
    members = fam.members(levels)
    if not members:
        raise PreconditionError('bracket family is empty')
    V = np.array([sp_vectorize(B, tol=MEMBERSHIP_TOLERANCE) for B in members]).T
    target = sp_dimension(fam.d)
    threshold = RANK_THRESHOLD if rank_threshold is None else rank_threshold
    verdict = rank_verdict(V, target, threshold)

    witnesses = {}
    if verdict['verdict'] != 'pass':
        # left singular vectors beyond the rank span the missing directions
        U, s, _ = np.linalg.svd(V)
        witnesses['missing_directions'] = U[:, verdict['rank']:].T.tolist()
    return SpanCertificate(
        vectors=V, singular_values=verdict['singular_values'], rank=verdict['rank'], target=target,
        verdict=verdict['verdict'], sigma_min_ratio=verdict['sigma_min_ratio'], levels=levels,
        t0=fam.t0, witnesses=witnesses,
        metadata={'members': len(members), 'tested_at': datetime.now().isoformat()})


def span_sweep(A: CurveJet, L: int = 5, grid: Optional[Sequence[float]] = None,
               rank_threshold: Optional[float] = None) -> Dict:
    """span_test at each grid time of the polynomial model; first_pass is the earliest passing time"""
    grid = np.linspace(0.0, A.delta, 11) if grid is None else np.asarray(grid, float)
    rows = []
    for t in grid:
        cert = span_test(bracket_family(A, L, t), rank_threshold=rank_threshold)
        rows.append({'t': float(t), 'rank': cert.rank, 'verdict': cert.verdict,
                     'sigma_min_ratio': cert.sigma_min_ratio})
    table = pd.DataFrame(rows, columns=['t', 'rank', 'verdict', 'sigma_min_ratio'])
    passing = table[table['verdict'] == 'pass']
    return {
        'first_pass': float(passing['t'].iloc[0]) if len(passing) else None,
        'table': table,
    }
