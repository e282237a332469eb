"""
Charts and co-rank-1 frames

A FrameSpec holds d vector fields f^1..f^d on a (d+1)-dimensional chart and
the annihilator one-form eta, all as expressions. validate() checks on
sampled points that eta(f^i) = 0, that the frame has rank d and that eta
does not vanish.

Usage:
    from geometry.frame import heisenberg_frame

    frame = heisenberg_frame()
    F = frame.frame_matrix([0.1, 0.2, 0.0])       # columns are f^1, f^2
"""

import os
import sys
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from expr import ExprParser, eval_jet, evaluate, Mul
from shared.errors import PreconditionError


@dataclass(frozen=True)
class Chart:
    """Coordinate chart of dimension d+1 with an optional sampling box"""
    names: Tuple[str, ...]
    box: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if len(self.names) < 2:
            raise PreconditionError('a chart needs dimension d+1 >= 2')
        if self.box is not None and len(self.box) != len(self.names):
            raise PreconditionError(f'box has {len(self.box)} intervals for {len(self.names)} coordinates')

    @property
    def dim(self) -> int:
        return len(self.names)

    def contains(self, q) -> bool:
        if self.box is None:
            return True
        return all(lo <= x <= hi for x, (lo, hi) in zip(q, self.box))

    def sample(self, count: int, seed: int = 0, default_half_width: float = 1.0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        box = self.box or tuple((-default_half_width, default_half_width) for _ in self.names)
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        return lo + (hi - lo) * rng.random((count, self.dim))


@dataclass(frozen=True)
class FrameSpec:
    chart: Chart
    fields: Tuple[Tuple[object, ...], ...]
    eta: Tuple[object, ...]

    # η(f^i) = 0 tolerance on sampled points
    ANNIHILATION_TOLERANCE = 1e-10

    def __post_init__(self):
        n = self.chart.dim
        if len(self.fields) != n - 1:
            raise PreconditionError(f'a co-rank-1 frame on a {n}-chart needs {n - 1} fields, got {len(self.fields)}')
        for i, f in enumerate(self.fields):
            if len(f) != n:
                raise PreconditionError(f'field f{i + 1} has {len(f)} components, expected {n}')
        if len(self.eta) != n:
            raise PreconditionError(f'eta has {len(self.eta)} components, expected {n}')

    @classmethod
    def from_strings(cls, names: Sequence[str], fields: Sequence[Sequence[str]],
                     eta: Sequence[str], box=None) -> 'FrameSpec':
        parser = ExprParser(names)
        chart = Chart(tuple(names), None if box is None else tuple(tuple(b) for b in box))
        parsed_fields = tuple(tuple(parser.parse(str(c)) for c in f) for f in fields)
        parsed_eta = tuple(parser.parse(str(c)) for c in eta)
        return cls(chart, parsed_fields, parsed_eta)

    @property
    def d(self) -> int:
        return len(self.fields)

    @property
    def n(self) -> int:
        return self.chart.dim

    # Evaluation

    def frame_matrix(self, q) -> np.ndarray:
        """n x d matrix whose columns are the fields at q"""
        return np.array([[evaluate(c, q) for c in f] for f in self.fields]).T

    def frame_jets(self, q, order: int = 1):
        """
        Frame with its derivatives

        Returns:
            (F, DF, D2F, D3F): F[a, i] = f^i_a; DF[i, a, b] = d_b f^i_a;
            D2F[i, a, b, c] and D3F[i, a, b, c, e] when order allows, else None
        """
        d, n = self.d, self.n
        F = np.zeros((n, d))
        DF = np.zeros((d, n, n))
        D2F = np.zeros((d, n, n, n)) if order >= 2 else None
        D3F = np.zeros((d, n, n, n, n)) if order >= 3 else None
        for i, f in enumerate(self.fields):
            for a, comp in enumerate(f):
                j = eval_jet(comp, q, order=max(order, 1))
                F[a, i] = j.value
                DF[i, a] = j.grad
                if D2F is not None:
                    D2F[i, a] = j.hess
                if D3F is not None:
                    D3F[i, a] = j.third
        return F, DF, D2F, D3F

    def eta_value(self, q) -> np.ndarray:
        return np.array([evaluate(c, q) for c in self.eta])

    def eta_jacobian(self, q) -> np.ndarray:
        """D[b, a] = d_a eta_b"""
        return np.array([eval_jet(c, q, order=1).grad for c in self.eta])

    def d_eta(self, q) -> np.ndarray:
        """W[a, b] = d_a eta_b - d_b eta_a, so d eta(v, w) = v W w"""
        D = self.eta_jacobian(q)
        return D.T - D

    def scaled_eta(self, factor: str) -> 'FrameSpec':
        """Same frame with eta replaced by factor * eta"""
        f = ExprParser(self.chart.names).parse(factor)
        return FrameSpec(self.chart, self.fields, tuple(Mul(f, c) for c in self.eta))

    # Validation

    def validate(self, samples: int = 50, seed: int = 0, points=None) -> Dict:
        """
        Check the frame invariants on sampled points

        Returns:
            Dict with valid, errors, warnings, passed_checks, metadata
        """
        errors: List[str] = []
        warnings: List[str] = []
        passed: List[str] = []
        pts = np.asarray(points) if points is not None else self.chart.sample(samples, seed)
        worst_annihilation = 0.0
        min_eta = np.inf
        rank_failures = 0
        for q in pts:
            F = self.frame_matrix(q)
            eta = self.eta_value(q)
            worst_annihilation = max(worst_annihilation, float(np.max(np.abs(eta @ F))))
            min_eta = min(min_eta, float(np.linalg.norm(eta)))
            if np.linalg.matrix_rank(F) != self.d:
                rank_failures += 1
        if worst_annihilation > self.ANNIHILATION_TOLERANCE:
            errors.append(f'eta(f^i) != 0 on samples (max {worst_annihilation:.2e})')
        else:
            passed.append('eta annihilates the frame')
        if rank_failures:
            errors.append(f'frame rank < {self.d} at {rank_failures} sample points')
        else:
            passed.append(f'frame has rank {self.d}')
        if min_eta < 1e-12:
            errors.append('eta vanishes at a sample point')
        elif min_eta < 1e-6:
            warnings.append(f'eta nearly vanishes (min norm {min_eta:.2e})')
        else:
            passed.append('eta nowhere vanishing on samples')
        return {
            'valid': not errors,
            'errors': errors,
            'warnings': warnings,
            'passed_checks': passed,
            'metadata': {
                'samples': int(len(pts)),
                'max_annihilation': worst_annihilation,
                'min_eta_norm': float(min_eta),
                'validated_at': datetime.now().isoformat(),
            },
        }


def heisenberg_frame(box=None) -> FrameSpec:
    """f1 = dx - (y/2) dz, f2 = dy + (x/2) dz, eta = dz + (y dx - x dy)/2"""
    return FrameSpec.from_strings(
        ['x', 'y', 'z'],
        [['1', '0', '-y/2'], ['0', '1', 'x/2']],
        ['y/2', '-x/2', '1'],
        box=box,
    )


def martinet_frame(box=None) -> FrameSpec:
    """f1 = dx + (y^2/2) dz, f2 = dy, eta = dz - (y^2/2) dx"""
    return FrameSpec.from_strings(
        ['x', 'y', 'z'],
        [['1', '0', 'y^2/2'], ['0', '1', '0']],
        ['-y^2/2', '0', '1'],
        box=box,
    )


def flat_frame(d: int = 2) -> FrameSpec:
    """Coordinate fields on R^d x R with eta = dz (an integrable distribution)"""
    names = [f'q{i + 1}' for i in range(d + 1)]
    fields = [['1' if a == i else '0' for a in range(d + 1)] for i in range(d)]
    eta = ['0'] * d + ['1']
    return FrameSpec.from_strings(names, fields, eta)
