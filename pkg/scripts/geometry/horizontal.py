"""
Horizontal curves from controls

integrate_horizontal solves Q' = sum_i c_i(t) f^i(Q), Q(0) = q0 with DOP853
and dense output. Controls are scipy PPoly objects (piecewise polynomials)
or plain callables.

Usage:
    from geometry.horizontal import Control, integrate_horizontal

    curve = integrate_horizontal(frame, [0, 0, 0], Control.constant([1, 0], 1.0), 1.0)
    curve.Q(0.5)
"""

import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PPoly

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import DomainExitError, IntegrationError, PreconditionError
from shared.load_env import integrator_tolerances

from .frame import FrameSpec


class Control:
    """Control c: [0, T] -> R^d"""

    def __init__(self, fn: Callable[[float], np.ndarray], dim: int,
                 breakpoints: Optional[Sequence[float]] = None, ppoly: Optional[PPoly] = None):
        self._fn = fn
        self.dim = dim
        self.breakpoints = list(breakpoints) if breakpoints is not None else []
        self.ppoly = ppoly

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self._fn(t), dtype=float).reshape(self.dim)

    @classmethod
    def from_ppoly(cls, pp: PPoly) -> 'Control':
        dim = int(np.prod(pp.c.shape[2:])) if pp.c.ndim > 2 else 1
        return cls(pp, dim, breakpoints=list(pp.x), ppoly=pp)

    @classmethod
    def constant(cls, values: Sequence[float], T: float = 1.0) -> 'Control':
        values = np.asarray(values, dtype=float)
        c = values.reshape(1, 1, -1)
        return cls.from_ppoly(PPoly(c, [0.0, max(T, 1e-300)], extrapolate=True))

    @classmethod
    def piecewise_constant(cls, values: Sequence[Sequence[float]], breaks: Sequence[float]) -> 'Control':
        values = np.asarray(values, dtype=float)
        c = values.reshape(1, values.shape[0], values.shape[1])
        return cls.from_ppoly(PPoly(c, np.asarray(breaks, float), extrapolate=True))

    @classmethod
    def polynomial(cls, coeffs: Sequence[Sequence[float]], T: float = 1.0) -> 'Control':
        """coeffs[k] multiplies t^k"""
        coeffs = np.asarray(coeffs, dtype=float)
        c = coeffs[::-1].reshape(coeffs.shape[0], 1, coeffs.shape[1])
        return cls.from_ppoly(PPoly(c, [0.0, max(T, 1e-300)], extrapolate=True))

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], dim: int) -> 'Control':
        return cls(fn, dim)


@dataclass
class HorizontalCurve:
    frame: FrameSpec
    control: Control
    q0: np.ndarray
    T: float
    solution: Optional[object] = None
    t_grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    q_grid: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def Q(self, t: float) -> np.ndarray:
        if self.solution is None:
            return np.array(self.q0, dtype=float)
        return self.solution(t)

    def velocity(self, t: float) -> np.ndarray:
        return self.frame.frame_matrix(self.Q(t)) @ self.control(t)

    def speed_scale(self) -> float:
        """Largest frame component magnitude along the stored grid"""
        pts = self.q_grid if len(self.q_grid) else [self.q0]
        return max(float(np.max(np.abs(self.frame.frame_matrix(q)))) for q in pts)

    def cp1_residual(self, cells: int = 32) -> float:
        """
        max over grid cells of |Q(b) - Q(a) - int_a^b F(Q) c ds|

        Uses 8-point Gauss-Legendre quadrature on the dense output.
        """
        if self.T == 0.0 or self.solution is None:
            return 0.0
        nodes, weights = np.polynomial.legendre.leggauss(8)
        edges = np.linspace(0.0, self.T, cells + 1)
        worst = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            s = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            integral = sum(w * self.velocity(si) for w, si in zip(weights, s)) * 0.5 * (b - a)
            worst = max(worst, float(np.max(np.abs(self.Q(b) - self.Q(a) - integral))))
        return worst


def integrate_horizontal(frame: FrameSpec, q0, control: Control, T: float,
                         rtol: Optional[float] = None, atol: Optional[float] = None,
                         max_step: float = np.inf) -> HorizontalCurve:
    """
    Integrate the control system along the frame

    Args:
        frame: FrameSpec
        q0: Start point
        control: Control with control.dim == frame.d
        T: Final time (T = 0 gives the constant curve)

    Raises:
        DomainExitError: trajectory leaves the chart box
        IntegrationError: step-size underflow or non-finite state
    """
    q0 = np.asarray(q0, dtype=float)
    if q0.shape != (frame.n,):
        raise PreconditionError(f'start point must have {frame.n} coordinates')
    if control.dim != frame.d:
        raise PreconditionError(f'control has {control.dim} components, frame has {frame.d} fields')
    if not frame.chart.contains(q0):
        raise DomainExitError('start point outside the chart box')
    if T < 0:
        raise PreconditionError('T must be non-negative')
    if T == 0.0:
        return HorizontalCurve(frame, control, q0, 0.0, None, np.array([0.0]), q0[None, :])

    default_rtol, default_atol = integrator_tolerances()
    rtol = default_rtol if rtol is None else rtol
    atol = default_atol if atol is None else atol

    def rhs(t, q):
        return frame.frame_matrix(q) @ control(t)

    events = []
    if frame.chart.box is not None:
        for a, (lo, hi) in enumerate(frame.chart.box):
            for bound in (lo, hi):
                def hit(t, q, a=a, bound=bound):
                    return q[a] - bound
                hit.terminal = True
                events.append(hit)

    result = solve_ivp(rhs, (0.0, T), q0, method='DOP853', dense_output=True,
                       rtol=rtol, atol=atol, max_step=max_step, events=events or None)
    if result.status == 1:
        raise DomainExitError(f'trajectory left the chart box at t = {result.t[-1]:.6g}')
    if result.status != 0:
        raise IntegrationError(f'horizontal integration failed: {result.message}')
    if not np.all(np.isfinite(result.y)):
        raise IntegrationError('non-finite state in horizontal integration')
    return HorizontalCurve(frame, control, q0, float(T), result.sol, result.t, result.y.T)
