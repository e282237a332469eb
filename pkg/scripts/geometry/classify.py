"""
Regular and singular times of horizontal curves

Two independent criteria:

1. The regularity form: t is a regular time when d eta(Q'(t), .) does not
   vanish on the distribution at Q(t). A curve is singular exactly when it has
   no regular time.
2. The end-point differential: rank of dE(c) on piecewise-constant control
   perturbations over dyadic grids, computed from the variational equation.

classify_curve runs both and raises ClassificationMismatchError when they
disagree.
"""

import os
import sys
from dataclasses import dataclass, field, asdict
from datetime import datetime
from typing import Dict, List, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import (ClassificationMismatchError, IntegrationError,
                           NonConvergenceError, PreconditionError)
from shared.load_env import integrator_tolerances

from .frame import FrameSpec
from .horizontal import HorizontalCurve


@dataclass
class RegularityReport:
    times: List[float]
    r_values: List[float]
    regular_fraction: float
    non_regular_times: List[float]
    verdict: str
    endpoint_rank: int
    endpoint_target: int
    threshold: float
    metadata: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)


class RegularityClassifier:
    """Regularity form, end-point rank and their cross-validation"""

    HORIZONTAL_TOLERANCE = 1e-10
    SINGULAR_THRESHOLD = 1e-8
    RANK_THRESHOLD = 1e-8
    START_LEVEL = 2
    MAX_LEVEL = 8

    @staticmethod
    def regularity_form(frame: FrameSpec, q, v, tol: Optional[float] = None) -> np.ndarray:
        """
        Coefficients d eta(v, f^j), j = 1..d

        Raises:
            PreconditionError: v is not horizontal at q
        """
        tol = RegularityClassifier.HORIZONTAL_TOLERANCE if tol is None else tol
        q = np.asarray(q, float)
        v = np.asarray(v, float)
        eta = frame.eta_value(q)
        if abs(float(eta @ v)) > tol * max(1.0, float(np.linalg.norm(eta) * np.linalg.norm(v))):
            raise PreconditionError(f'vector is not horizontal (eta(v) = {float(eta @ v):.3e})')
        return v @ frame.d_eta(q) @ frame.frame_matrix(q)

    @staticmethod
    def regularity_profile(frame: FrameSpec, curve: HorizontalCurve, samples: int = 201):
        """Times, forms and r(t) = |form| on a uniform grid"""
        times = np.linspace(0.0, curve.T, samples) if curve.T > 0 else np.array([0.0])
        forms = np.array([RegularityClassifier.regularity_form(frame, curve.Q(t), curve.velocity(t),
                                                               tol=1e-7)
                          for t in times])
        return times, forms, np.linalg.norm(forms, axis=1)

    @staticmethod
    def _endpoint_columns(frame: FrameSpec, curve: HorizontalCurve, rtol, atol):
        """
        Dense solution of Q, Psi = Phi^-1 and G(t) = int_0^t Psi F ds

        Columns of dE for a control perturbation supported on [a, b] in
        direction i are Phi(T) (G(b) - G(a)) e_i.
        """
        n, d = frame.n, frame.d

        def rhs(t, y):
            q = y[:n]
            Psi = y[n:n + n * n].reshape(n, n)
            c = curve.control(t)
            F, DF, _, _ = frame.frame_jets(q, order=1)
            A = np.einsum('i,iab->ab', c, DF)
            dPsi = -Psi @ A
            dG = Psi @ F
            return np.concatenate([F @ c, dPsi.ravel(), dG.ravel()])

        y0 = np.concatenate([curve.q0, np.eye(n).ravel(), np.zeros(n * d)])
        result = solve_ivp(rhs, (0.0, curve.T), y0, method='DOP853', dense_output=True,
                           rtol=rtol, atol=atol)
        if result.status != 0:
            raise IntegrationError(f'variational integration failed: {result.message}')
        Psi_T = result.y[n:n + n * n, -1].reshape(n, n)
        Phi_T = np.linalg.inv(Psi_T)

        def G(t):
            return result.sol(t)[n + n * n:].reshape(n, d)

        return Phi_T, G

    @staticmethod
    def endpoint_differential_rank(frame: FrameSpec, curve: HorizontalCurve,
                                   threshold: Optional[float] = None,
                                   start_level: Optional[int] = None,
                                   max_level: Optional[int] = None) -> Dict:
        """
        Rank of the end-point differential

        Piecewise-constant perturbations on 2^k dyadic cells; k grows until the
        rank is the same on two successive levels or reaches d+1.

        Raises:
            NonConvergenceError: level cap reached without a stable rank
        """
        threshold = RegularityClassifier.RANK_THRESHOLD if threshold is None else threshold
        k = RegularityClassifier.START_LEVEL if start_level is None else start_level
        k_max = RegularityClassifier.MAX_LEVEL if max_level is None else max_level
        n = frame.n
        if curve.T == 0.0:
            F = frame.frame_matrix(curve.q0)
            sv = np.linalg.svd(F, compute_uv=False)
            rank = int(np.sum(sv > threshold * sv[0])) if sv[0] > 0 else 0
            return {'rank': rank, 'target': n, 'level': 0, 'singular_values': sv.tolist(),
                    'history': [rank]}

        rtol, atol = integrator_tolerances()
        Phi_T, G = RegularityClassifier._endpoint_columns(frame, curve, rtol, atol)
        history = []
        previous = None
        while k <= k_max:
            edges = np.linspace(0.0, curve.T, 2 ** k + 1)
            Gs = [G(t) for t in edges]
            cols = [Phi_T @ (Gs[m + 1] - Gs[m]) for m in range(2 ** k)]
            D = np.hstack(cols)
            sv = np.linalg.svd(D, compute_uv=False)
            rank = int(np.sum(sv > threshold * sv[0])) if sv[0] > 0 else 0
            history.append(rank)
            if rank == n or (previous is not None and rank == previous):
                return {'rank': rank, 'target': n, 'level': k,
                        'singular_values': sv.tolist(), 'history': history}
            previous = rank
            k += 1
        raise NonConvergenceError(f'end-point rank not stable up to level {k_max} (history {history})')

    @staticmethod
    def classify_curve(frame: FrameSpec, curve: HorizontalCurve, samples: int = 201,
                       threshold: Optional[float] = None) -> RegularityReport:
        """
        Aggregate both criteria into a RegularityReport

        Raises:
            ClassificationMismatchError: the form test and the rank test disagree
        """
        threshold = RegularityClassifier.SINGULAR_THRESHOLD if threshold is None else threshold
        times, forms, r = RegularityClassifier.regularity_profile(frame, curve, samples)
        cut = threshold * max(curve.speed_scale(), 1e-300)
        below = r < cut
        non_regular = [float(t) for t in times[below]]

        # isolated zeros between samples: the form flips direction across a cell
        def projected(t, ref):
            return float(RegularityClassifier.regularity_form(
                frame, curve.Q(t), curve.velocity(t), tol=1e-7) @ ref)

        for m in range(len(times) - 1):
            if below[m] or below[m + 1]:
                continue
            if float(forms[m] @ forms[m + 1]) < 0.0:
                root = brentq(projected, times[m], times[m + 1], args=(forms[m],), xtol=1e-13)
                non_regular.append(float(root))
        non_regular = sorted(non_regular)

        if curve.T == 0.0:
            verdict = 'singular_curve' if below.all() else 'regular_everywhere'
        elif below.all():
            verdict = 'singular_curve'
        elif non_regular:
            verdict = 'mixed'
        else:
            verdict = 'regular_everywhere'

        rank_report = RegularityClassifier.endpoint_differential_rank(frame, curve)
        rank_deficient = rank_report['rank'] < frame.n
        if curve.T > 0.0 and rank_deficient != (verdict == 'singular_curve'):
            raise ClassificationMismatchError(
                f'regularity form says {verdict} but end-point rank is '
                f'{rank_report["rank"]}/{frame.n}')

        return RegularityReport(
            times=[float(t) for t in times],
            r_values=[float(x) for x in r],
            regular_fraction=float(np.mean(~below)),
            non_regular_times=non_regular,
            verdict=verdict,
            endpoint_rank=rank_report['rank'],
            endpoint_target=frame.n,
            threshold=float(cut),
            metadata={
                'endpoint_level': rank_report['level'],
                'endpoint_history': rank_report['history'],
                'classified_at': datetime.now().isoformat(),
            },
        )


def regularity_form(frame, q, v, tol=None):
    return RegularityClassifier.regularity_form(frame, q, v, tol)


def endpoint_differential_rank(frame, curve, **kwargs):
    return RegularityClassifier.endpoint_differential_rank(frame, curve, **kwargs)


def classify_curve(frame, curve, **kwargs):
    return RegularityClassifier.classify_curve(frame, curve, **kwargs)
