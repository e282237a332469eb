"""
Normal lifts, abnormal covectors and uniqueness of lifts

For a horizontal curve Q' = sum_i c_i f^i(Q):

- a normal lift P(t) solves
      P' = -P.sum_i c_i d_q f^i(Q) + d_q phi(Q, c)
  and satisfies P.sum c_i f^i(Q) - phi(Q, c) = H(Q, P) at the fiberwise max
- Q is singular iff a nonzero eta(t) solves eta' = -eta.sum_i c_i d_q f^i(Q)
  with eta.f^i(Q) = 0 for all i; in co-rank 1 the only candidate start is
  the annihilator eta(Q(0))
- two normal lifts differ by such an eta, so a regular curve has exactly one

Usage:
    from lifts.pontryagin import lift_normal, abnormal_search, unique_lift_check

    lift = lift_normal(H, curve, p0)
    lift.energy_drift(), lift.to_frame().to_csv('lift.csv', index=False)
    abnormal_search(frame, curve)                  # AbnormalCovector or None
    unique_lift_check(H, curve, p0, p0 + 0.1 * frame.eta_value(curve.q0))
"""

import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics.hamiltonian import HamiltonianSpec
from geometry.classify import classify_curve
from geometry.frame import FrameSpec
from geometry.horizontal import HorizontalCurve
from shared.errors import (ClassificationMismatchError, EnergyIdentityError,
                           IntegrationError, PreconditionError)
from shared.load_env import integrator_tolerances

from .lagrangian import ControlLagrangian


@dataclass
class NormalLift:
    """Covector path P(t) over a horizontal curve, sampled on a uniform grid"""
    curve: HorizontalCurve
    t: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    energy: np.ndarray
    identity_residual: np.ndarray
    normal_residual: float
    solution: Optional[object] = None
    metadata: Dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.Q.shape[1]

    def P_at(self, t: float) -> np.ndarray:
        if self.solution is None:
            return self.P[0].copy()
        return np.asarray(self.solution(t), float)[self.n:]

    def Q_at(self, t: float) -> np.ndarray:
        if self.solution is None:
            return self.Q[0].copy()
        return np.asarray(self.solution(t), float)[:self.n]

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def drift_rate(self) -> float:
        """Energy drift per unit time"""
        T = float(self.t[-1])
        return self.energy_drift() / T if T > 0 else 0.0

    def to_frame(self) -> pd.DataFrame:
        names = self.curve.frame.chart.names
        df = pd.DataFrame(np.hstack([self.Q, self.P]),
                          columns=[f'q_{a}' for a in names] + [f'p_{a}' for a in names])
        df.insert(0, 't', self.t)
        df['H'] = self.energy
        df['identity_residual'] = self.identity_residual
        return df


@dataclass
class AbnormalCovector:
    """Transported annihilator eta(t), renormalized, with eta.f^i residuals"""
    t: np.ndarray
    eta: np.ndarray
    annihilation: np.ndarray
    holds: bool
    degenerate: bool = False
    solution: Optional[object] = None
    metadata: Dict = field(default_factory=dict)

    @property
    def max_annihilation(self) -> float:
        return float(np.max(self.annihilation)) if self.annihilation.size else 0.0

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.eta, columns=[f'eta_{a}' for a in range(self.eta.shape[1])])
        df.insert(0, 't', self.t)
        for i in range(self.annihilation.shape[1]):
            df[f'eta_f{i + 1}'] = self.annihilation[:, i]
        return df


def _frame_pullback(frame: FrameSpec, q, c, P) -> np.ndarray:
    """P.sum_i c_i d_q f^i(q), i.e. sum_i c_i sum_a P_a d_b f^i_a"""
    _, DF, _, _ = frame.frame_jets(q, order=1)
    return np.einsum('i,a,iab->b', c, P, DF)


class PontryaginLifts:
    """Normal and abnormal lifts of horizontal curves"""

    IDENTITY_TOLERANCE = 1e-8
    ANNIHILATION_TOLERANCE = 1e-7
    UNIQUE_TOLERANCE = 1e-7
    SAMPLES = 201
    DIFFERENCE_STEP = 1e-4

    @staticmethod
    def _solve(rhs, y0, T: float, rtol=None, atol=None):
        default_rtol, default_atol = integrator_tolerances()
        rtol = default_rtol if rtol is None else rtol
        atol = default_atol if atol is None else atol
        result = solve_ivp(rhs, (0.0, T), y0, method='DOP853', dense_output=True, rtol=rtol, atol=atol)
        if result.status != 0 or not np.all(np.isfinite(result.y)):
            raise IntegrationError(f'lift integration failed: {result.message}')
        return result.sol

    @staticmethod
    def lift_normal(H: HamiltonianSpec, curve: HorizontalCurve, P0, check: bool = True,
                    samples: Optional[int] = None, seed: int = 0) -> NormalLift:
        """
        Integrate the normal covector equation along a horizontal curve

        Args:
            H: Frame-kind HamiltonianSpec (fixes phi through the Legendre duality)
            curve: HorizontalCurve on the same frame
            P0: Initial covector at curve.q0
            check: Raise when the energy identity fails at t = 0 or along the path

        Raises:
            EnergyIdentityError: P0 (or the transported P) is not a normal covector
            PreconditionError: H is not a frame Hamiltonian or the dimensions disagree
        """
        lag = ControlLagrangian(H)
        frame = curve.frame
        n = frame.n
        if lag.n != n or lag.d != frame.d:
            raise PreconditionError('Hamiltonian frame and curve frame have different dimensions')
        P0 = np.asarray(P0, float)
        if P0.shape != (n,):
            raise PreconditionError(f'initial covector must have {n} entries')
        samples = PontryaginLifts.SAMPLES if samples is None else samples
        tol = PontryaginLifts.IDENTITY_TOLERANCE

        start = lag.identity_check(curve.q0, P0, curve.control(0.0), seed=seed)
        if check and (abs(start['identity_residual']) > tol * start['scale']
                      or start['sup_gap'] > tol * start['scale']):
            raise EnergyIdentityError(
                f'P0 is not a normal covector: identity residual {start["identity_residual"]:.3e}, '
                f'sampled sup exceeds the curve control by {start["sup_gap"]:.3e}')

        metadata = {'start': start, 'lifted_at': datetime.now().isoformat()}
        if curve.T == 0.0:
            return NormalLift(curve, np.array([0.0]), curve.q0[None, :], P0[None, :],
                              np.array([start['H']]), np.array([start['identity_residual']]), 0.0,
                              None, {**metadata, 'degenerate': True})

        def rhs(t, y):
            q, P = y[:n], y[n:]
            c = curve.control(t)
            return np.concatenate([frame.frame_matrix(q) @ c,
                                   -_frame_pullback(frame, q, c, P) + lag.grad_q(q, c)])

        sol = PontryaginLifts._solve(rhs, np.concatenate([curve.q0, P0]), curve.T)
        t = np.linspace(0.0, curve.T, samples)
        states = np.array([sol(s) for s in t])
        Q, P = states[:, :n], states[:, n:]
        controls = [curve.control(s) for s in t]
        energy = np.array([H.value(q, p) for q, p in zip(Q, P)])
        residual = np.array([lag.identity_residual(q, p, c) for q, p, c in zip(Q, P, controls)])

        # central differences of the dense output against the right-hand side
        h = PontryaginLifts.DIFFERENCE_STEP * curve.T
        normal = 0.0
        for s in t[1:-1]:
            slope = (sol(s + h) - sol(s - h)) / (2 * h)
            normal = max(normal, float(np.max(np.abs(slope[n:] - rhs(s, sol(s))[n:]))))
        normal /= max(1.0, float(np.max(np.abs(P))))

        worst = int(np.argmax(np.abs(residual)))
        if check and abs(residual[worst]) > tol * start['scale']:
            raise EnergyIdentityError(
                f'energy identity fails along the curve: residual {residual[worst]:.3e} '
                f'at t = {t[worst]:.6g}')

        return NormalLift(curve, t, Q, P, energy, residual, normal, sol, metadata)

    @staticmethod
    def transport_covector(frame: FrameSpec, curve: HorizontalCurve, eta0,
                           renormalize: bool = True, samples: Optional[int] = None):
        """
        Solve eta' = -eta.sum c_i d_q f^i(Q) from eta0

        With renormalize the component along eta is removed from eta', which
        keeps |eta| fixed and leaves the direction unchanged.

        Returns:
            (t, Q, eta, dense solution)
        """
        n = frame.n
        eta0 = np.asarray(eta0, float)
        samples = PontryaginLifts.SAMPLES if samples is None else samples

        def rhs(t, y):
            q, eta = y[:n], y[n:]
            c = curve.control(t)
            deta = -_frame_pullback(frame, q, c, eta)
            if renormalize:
                deta = deta - (eta @ deta) / (eta @ eta) * eta
            return np.concatenate([frame.frame_matrix(q) @ c, deta])

        sol = PontryaginLifts._solve(rhs, np.concatenate([curve.q0, eta0]), curve.T)
        t = np.linspace(0.0, curve.T, samples)
        states = np.array([sol(s) for s in t])
        return t, states[:, :n], states[:, n:], sol

    @staticmethod
    def abnormal_profile(frame: FrameSpec, curve: HorizontalCurve,
                         samples: Optional[int] = None) -> AbnormalCovector:
        """Transport eta(Q(0)) and record eta.f^i / (|eta| |f^i|) on the grid"""
        eta0 = frame.eta_value(curve.q0)
        eta0 = eta0 / np.linalg.norm(eta0)
        tol = PontryaginLifts.ANNIHILATION_TOLERANCE
        metadata = {'searched_at': datetime.now().isoformat()}
        if curve.T == 0.0:
            F = frame.frame_matrix(curve.q0)
            ann = np.abs(eta0 @ F) / np.maximum(np.linalg.norm(F, axis=0), 1e-300)
            return AbnormalCovector(np.array([0.0]), eta0[None, :], ann[None, :], True,
                                    degenerate=True, metadata=metadata)

        t, Q, eta, sol = PontryaginLifts.transport_covector(frame, curve, eta0, samples=samples)
        ann = np.zeros((len(t), frame.d))
        for k, (q, e) in enumerate(zip(Q, eta)):
            F = frame.frame_matrix(q)
            ann[k] = np.abs(e @ F) / (np.linalg.norm(e) * np.maximum(np.linalg.norm(F, axis=0), 1e-300))
        eta = eta / np.linalg.norm(eta, axis=1, keepdims=True)
        holds = bool(np.max(ann) <= tol)
        return AbnormalCovector(t, eta, ann, holds, solution=sol,
                                metadata={**metadata, 'tolerance': tol})

    @staticmethod
    def abnormal_search(frame: FrameSpec, curve: HorizontalCurve,
                        samples: Optional[int] = None) -> Optional[AbnormalCovector]:
        """The abnormal covector along the curve, or None when the curve has none"""
        profile = PontryaginLifts.abnormal_profile(frame, curve, samples)
        return profile if profile.holds else None

    @staticmethod
    def unique_lift_check(H: HamiltonianSpec, curve: HorizontalCurve, P0a, P0b,
                          tol: Optional[float] = None) -> Dict:
        """
        Lift from two covectors and compare

        P0a must be a normal covector; a P0b that fails the energy identity
        (at t = 0 or later) is reported as rejected and the verdict is unique.

        Raises:
            EnergyIdentityError: P0a is not a normal covector
            ClassificationMismatchError: two distinct lifts over a non-singular curve
        """
        tol = PontryaginLifts.UNIQUE_TOLERANCE if tol is None else tol
        frame = curve.frame
        lift_a = PontryaginLifts.lift_normal(H, curve, P0a)
        rejected = None
        try:
            lift_b = PontryaginLifts.lift_normal(H, curve, P0b)
        except EnergyIdentityError as e:
            lift_b = None
            rejected = str(e)

        regularity = classify_curve(frame, curve).verdict
        singular = regularity == 'singular_curve'
        result = {
            'verdict': 'unique',
            'max_difference': None,
            'difference_annihilation': None,
            'singular': singular,
            'regularity': regularity,
            'b_rejected': rejected,
            'metadata': {'tolerance': tol, 'checked_at': datetime.now().isoformat()},
        }
        if lift_b is None:
            return result

        diff = lift_a.P - lift_b.P
        scale = max(1.0, float(np.max(np.abs(lift_a.P))))
        result['max_difference'] = float(np.max(np.linalg.norm(diff, axis=1))) / scale
        result['difference_annihilation'] = max(
            float(np.max(np.abs(dp @ frame.frame_matrix(q)))) for q, dp in zip(lift_a.Q, diff)) / scale
        if result['max_difference'] >= tol:
            result['verdict'] = 'non_unique'
            if not singular:
                raise ClassificationMismatchError(
                    f'two normal lifts differ by {result["max_difference"]:.3e} over a {regularity} curve')
        return result


def lift_normal(H, curve, P0, **kwargs):
    return PontryaginLifts.lift_normal(H, curve, P0, **kwargs)


def abnormal_search(frame, curve, **kwargs):
    return PontryaginLifts.abnormal_search(frame, curve, **kwargs)


def unique_lift_check(H, curve, P0a, P0b, **kwargs):
    return PontryaginLifts.unique_lift_check(H, curve, P0a, P0b, **kwargs)
