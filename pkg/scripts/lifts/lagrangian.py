"""
Control-space Lagrangian of a frame Hamiltonian

For H = s(q) 1/2 h.g^-1 h + U(q), h_i = p.f^i, the Lagrangian on controls is

    phi(q, c) = c.g(q) c / (2 s(q)) - U(q)

and H(q, p) = max_c [ p.sum c_i f^i(q) - phi(q, c) ], attained at
c* = s g^-1 h. The energy identity of a normal lift is the statement that
the control of the curve is that maximizer.

Usage:
    from lifts.lagrangian import ControlLagrangian

    lag = ControlLagrangian(frame_hamiltonian(heisenberg_frame()))
    lag.value(q, c), lag.grad_q(q, c)
    lag.identity_check(q, P, c)
"""

import os
import sys
from typing import Dict, Optional, Tuple

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics.hamiltonian import HamiltonianSpec
from expr import eval_jet, evaluate
from shared.errors import PreconditionError


class ControlLagrangian:
    """phi(q, c) and its q-gradient for a frame-kind HamiltonianSpec"""

    # velocity samples for the fiberwise sup
    SAMPLE_COUNT = 64
    SAMPLE_SCALES = (1e-3, 1e-2, 1e-1, 1.0, 10.0)

    def __init__(self, H: HamiltonianSpec):
        if H.kind != 'frame':
            raise PreconditionError(f'normal lifts need a frame Hamiltonian, got kind {H.kind!r}')
        self.H = H
        self.frame = H.frame

    @property
    def d(self) -> int:
        return self.frame.d

    @property
    def n(self) -> int:
        return self.frame.n

    def _metric(self, q) -> Tuple[np.ndarray, np.ndarray]:
        """g (d x d) and dg[i, j, b] = d_b g_ij"""
        d, n = self.d, self.n
        if self.H.metric is None:
            return np.eye(d), np.zeros((d, d, n))
        g = np.zeros((d, d))
        dg = np.zeros((d, d, n))
        for i, row in enumerate(self.H.metric):
            for j, e in enumerate(row):
                jet = eval_jet(e, q, order=1)
                g[i, j] = jet.value
                dg[i, j] = jet.grad
        return g, dg

    def _factor(self, q) -> Tuple[float, np.ndarray]:
        if self.H.factor is None:
            return 1.0, np.zeros(self.n)
        jet = eval_jet(self.H.factor, q, order=1)
        if jet.value <= 0.0:
            raise PreconditionError(f'conformal factor is not positive ({jet.value:.4g})')
        return float(jet.value), jet.grad

    def value(self, q, c) -> float:
        q, c = np.asarray(q, float), np.asarray(c, float)
        g, _ = self._metric(q)
        s, _ = self._factor(q)
        return float(c @ g @ c / (2 * s) - evaluate(self.H.potential, q))

    def grad_q(self, q, c) -> np.ndarray:
        q, c = np.asarray(q, float), np.asarray(c, float)
        g, dg = self._metric(q)
        s, ds = self._factor(q)
        quad = float(c @ g @ c)
        dquad = np.einsum('i,ijb,j->b', c, dg, c)
        return dquad / (2 * s) - quad * ds / (2 * s ** 2) - eval_jet(self.H.potential, q, order=1).grad

    def maximizer(self, q, P) -> np.ndarray:
        """c* = s g^-1 F^T P"""
        q = np.asarray(q, float)
        g, _ = self._metric(q)
        s, _ = self._factor(q)
        return s * np.linalg.solve(g, self.frame.frame_matrix(q).T @ np.asarray(P, float))

    def fiber_value(self, q, P, c) -> float:
        """P.sum c_i f^i(q) - phi(q, c)"""
        q, P, c = (np.asarray(x, float) for x in (q, P, c))
        return float(P @ self.frame.frame_matrix(q) @ c) - self.value(q, c)

    def identity_residual(self, q, P, c) -> float:
        return self.fiber_value(q, P, c) - self.H.value(np.asarray(q, float), np.asarray(P, float))

    def sampled_sup_gap(self, q, P, c, seed: int = 0, samples: Optional[int] = None) -> float:
        """
        max over sampled controls v of fiber_value(v) - fiber_value(c)

        Samples are c plus Gaussian offsets at several scales, together with
        the analytic maximizer. A positive gap means c is not the sup.
        """
        samples = self.SAMPLE_COUNT if samples is None else samples
        rng = np.random.default_rng(seed)
        c = np.asarray(c, float)
        base = self.fiber_value(q, P, c)
        candidates = [self.maximizer(q, P)]
        for scale in self.SAMPLE_SCALES:
            candidates.extend(c + scale * rng.normal(size=(samples, c.size)))
        return max(self.fiber_value(q, P, v) - base for v in candidates)

    def identity_check(self, q, P, c, seed: int = 0) -> Dict:
        H_value = self.H.value(np.asarray(q, float), np.asarray(P, float))
        return {
            'H': float(H_value),
            'identity_residual': float(self.identity_residual(q, P, c)),
            'sup_gap': float(self.sampled_sup_gap(q, P, c, seed=seed)),
            'scale': max(1.0, abs(float(H_value))),
        }
