"""
Realize a perturbed transverse Hessian by a kinetic perturbation

In normal coordinates write A(t) = P [Cbar 0; 0 0] P^T with P = [Phat, n]
orthogonal. For a target Atilde with the same null direction n(t) set
R = Atilde - A, Rbar = Phat^T R Phat and

    C1 = Phat Cbar^{-1} Rbar Cbar^{-1} Phat^T,     B1 = B [0 0; 0 C1] B

Then A C1 A = R, so the fiber Hessian of H + K1 with K1 = 1/2 B1 p.p is
Atilde along the orbit. K1 and its first derivatives vanish along the
orbit because B ghat = e1 there.

Usage:
    from variational.realization import realize_perturbation, admissible_perturbation

    target = admissible_perturbation(nf, scale=1e-2, seed=0)
    K1 = realize_perturbation(nf, target)
    K1.recovery_error, K1.jet_dp
"""

import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Dict, Optional, Union

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from normal_form import NormalFormData, fit_taylor
from shared.errors import PreconditionError
from shared.jets import CurveJet, MatrixJet


@dataclass
class KineticPerturbation:
    t: np.ndarray
    C1: np.ndarray
    B1: np.ndarray
    C1_jet: MatrixJet
    recovered: np.ndarray
    recovery_error: float
    jet_value: float
    jet_dp: float
    jet_dq: float
    metadata: Dict = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return float(np.max(np.abs(self.B1))) == 0.0


class PerturbationRealizer:

    NULL_TOLERANCE = 1e-7
    SINGULAR_THRESHOLD = 1e-10

    def __init__(self, nf: NormalFormData, null_tolerance: Optional[float] = None):
        self.nf = nf
        self.null_tolerance = self.NULL_TOLERANCE if null_tolerance is None else null_tolerance

    def _target_at(self, target, t: float) -> np.ndarray:
        if isinstance(target, CurveJet):
            return target.A_at(t)
        return np.asarray(target(t), float)

    def realize(self, target: Union[CurveJet, Callable]) -> KineticPerturbation:
        """
        Raises:
            PreconditionError: Atilde(t) n(t) != 0 or Cbar(t) singular at a node
        """
        nf = self.nf
        d = nf.d
        C1s, B1s, recovered = [], [], []
        worst_rec = worst_val = worst_dp = worst_dq = 0.0
        for k, t in enumerate(nf.t):
            A = nf.A[k]
            n = nf.n[k]
            At = self._target_at(target, t)
            At = 0.5 * (At + At.T)
            null = float(np.linalg.norm(At @ n))
            if null > self.null_tolerance:
                raise PreconditionError(f'target does not annihilate n(t) at t = {t:.4g} (|A n| = {null:.2e})')
            P = self._frame(n)
            Phat = P[:, :d - 1]
            Cbar = Phat.T @ A @ Phat
            if np.min(np.abs(np.linalg.eigvalsh(Cbar))) < self.SINGULAR_THRESHOLD:
                raise PreconditionError(f'Cbar is singular at t = {t:.4g}')
            Cinv = np.linalg.inv(Cbar)
            Rbar = Phat.T @ (At - A) @ Phat
            C1 = Phat @ Cinv @ Rbar @ Cinv @ Phat.T
            C1 = 0.5 * (C1 + C1.T)

            B = nf.B_full[k]
            Chat = np.zeros_like(B)
            Chat[1:, 1:] = C1
            B1 = B @ Chat @ B
            rec = (B + B1)[1:, 1:]
            g = nf.g_hat[k]
            worst_rec = max(worst_rec, float(np.max(np.abs(rec - At))))
            worst_val = max(worst_val, abs(0.5 * float(g @ B1 @ g)))
            worst_dp = max(worst_dp, float(np.max(np.abs(B1 @ g))))
            worst_dq = max(worst_dq, float(np.max(np.abs(Chat @ B @ g))))
            C1s.append(C1)
            B1s.append(B1)
            recovered.append(rec)

        C1s = np.array(C1s)
        degree = min(8, len(nf.t) - 1)
        C1_jet = MatrixJet.from_taylor(fit_taylor(nf.t, C1s, nf.delta, degree))
        return KineticPerturbation(
            t=nf.t, C1=C1s, B1=np.array(B1s), C1_jet=C1_jet, recovered=np.array(recovered),
            recovery_error=worst_rec, jet_value=worst_val, jet_dp=worst_dp, jet_dq=worst_dq,
            metadata={'realized_at': datetime.now().isoformat()})

    @staticmethod
    def _frame(n: np.ndarray) -> np.ndarray:
        """Orthogonal P with last column n, Gram-Schmidt from the standard basis"""
        d = len(n)
        n = n / np.linalg.norm(n)
        cols = []
        for k in range(d):
            e = np.eye(d)[k]
            for c in cols + [n]:
                e = e - (c @ e) * c
            if np.linalg.norm(e) > 1e-8:
                cols.append(e / np.linalg.norm(e))
            if len(cols) == d - 1:
                break
        return np.column_stack(cols + [n])


def realize_perturbation(nf: NormalFormData, target: Union[CurveJet, Callable],
                         null_tolerance: Optional[float] = None) -> KineticPerturbation:
    return PerturbationRealizer(nf, null_tolerance).realize(target)


def admissible_perturbation(nf: NormalFormData, scale: float = 1e-2, seed: int = 0) -> Callable:
    """
    t -> A(t) + scale * t * P(t) [Rbar 0; 0 0] P(t)^T with P(t) the orthogonal
    frame whose last column is n(t) and Rbar a fixed random symmetric matrix

    The result keeps the null direction and A(0), so it lies in the same
    admissible class as A.
    """
    d = nf.d
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(d - 1, d - 1))
    Rpad = np.zeros((d, d))
    Rpad[:-1, :-1] = 0.5 * (R + R.T)

    def target(t: float) -> np.ndarray:
        P = PerturbationRealizer._frame(nf.curve.n_at(t))
        return nf.curve.A_at(t) + scale * t * P @ Rpad @ P.T

    return target
