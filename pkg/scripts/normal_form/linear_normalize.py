"""
Step 4 of the normal form: bring the transverse Hessian to diag(I, 0)

Abar(0) = G^T [Lambda 0; 0 0] G with eigenvalues sorted descending and each
eigenvector signed so its last nonzero component is positive. Then
Mbar = [Lambda^{-1/2} 0; 0 1] G gives Mbar Abar(0) Mbar^T = diag(I, 0), and
M = [1 0; 0 Mbar] acts on the full chart.
"""

import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import block_diag

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import PreconditionError

from .symplecto import FiberedSymplecto


@dataclass
class LinearNormalization:
    G: np.ndarray
    eigenvalues: np.ndarray
    Mbar: np.ndarray
    M: np.ndarray

    def symplecto(self) -> FiberedSymplecto:
        return FiberedSymplecto.linear(self.M)


def _fix_sign(v: np.ndarray, tol: float) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(v) > tol)
    if len(nonzero) and v[nonzero[-1]] < 0:
        return -v
    return v


class LinearNormalizer:

    RANK_THRESHOLD = 1e-8

    @staticmethod
    def normalize(Abar0, rank_threshold: Optional[float] = None) -> LinearNormalization:
        """
        Raises:
            PreconditionError: Abar(0) is not PSD of rank d - 1
        """
        tol = LinearNormalizer.RANK_THRESHOLD if rank_threshold is None else rank_threshold
        Abar0 = np.asarray(Abar0, float)
        d = Abar0.shape[0]
        if Abar0.shape != (d, d) or np.max(np.abs(Abar0 - Abar0.T)) > 1e-10 * max(1.0, np.max(np.abs(Abar0))):
            raise PreconditionError('transverse Hessian must be a symmetric square matrix')
        w, V = np.linalg.eigh(Abar0)
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
        scale = max(1.0, float(np.max(np.abs(w))))
        if w[-1] < -tol * scale:
            raise PreconditionError(f'transverse Hessian is not positive semidefinite (eigenvalue {w[-1]:.3e})')
        rank = int(np.sum(w > tol * scale))
        if rank != d - 1:
            raise PreconditionError(f'transverse Hessian has rank {rank}, co-rank 1 needs {d - 1}')
        G = np.array([_fix_sign(V[:, i], tol) for i in range(d)])
        Mbar = np.diag(np.concatenate([w[:-1] ** -0.5, [1.0]])) @ G
        return LinearNormalization(G, w, Mbar, block_diag(1.0, Mbar))


def linear_normalize(Abar0, rank_threshold: Optional[float] = None) -> LinearNormalization:
    return LinearNormalizer.normalize(Abar0, rank_threshold)
