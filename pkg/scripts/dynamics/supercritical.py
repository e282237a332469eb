"""
Supercritical energy levels and the Maupertuis time change

is_supercritical samples U on the declared box (grid plus L-BFGS-B polish of
the best grid points), reports the margin k - sup U and spot-checks
dH/dp . p > 0 on the energy shell.

maupertuis_comparison integrates H at level k and K/(k-U) at level 1 from
the same (q0, p0) and compares the projected curves at matched arc length.
"""

import os
import sys
from datetime import datetime
from typing import Dict, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize, brentq

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import IntegrationError, PreconditionError
from shared.load_env import integrator_tolerances

from .hamiltonian import HamiltonianSpec, hamiltonian_jets, maupertuis


class SupercriticalCheck:
    """Margin k - sup U on a box, plus an energy-shell contact check"""

    GRID_PER_AXIS = 9
    POLISH_STARTS = 5
    SHELL_SAMPLES = 50

    @staticmethod
    def sup_potential(H: HamiltonianSpec, box, grid_per_axis: Optional[int] = None,
                      polish_starts: Optional[int] = None):
        m = SupercriticalCheck.GRID_PER_AXIS if grid_per_axis is None else grid_per_axis
        starts = SupercriticalCheck.POLISH_STARTS if polish_starts is None else polish_starts
        axes = [np.linspace(lo, hi, m) for lo, hi in box]
        grid = np.array(np.meshgrid(*axes, indexing='ij')).reshape(len(box), -1).T
        values = np.array([H.potential_value(q) for q in grid])
        order = np.argsort(values)[::-1][:starts]
        best_q, best_u = grid[order[0]], float(values[order[0]])

        def neg_u(q):
            j = hamiltonian_jets(H, q, np.zeros(H.n), order=1)
            return -j.value, -j.Hq

        for idx in order:
            res = minimize(neg_u, grid[idx], jac=True, method='L-BFGS-B', bounds=box)
            if -res.fun > best_u:
                best_u, best_q = float(-res.fun), res.x
        return best_u, best_q

    @staticmethod
    def check(H: HamiltonianSpec, box=None, seed: int = 0) -> Dict:
        """
        Raises:
            PreconditionError: no sampling box declared
        """
        box = box if box is not None else H.sample_box
        if box is None:
            raise PreconditionError('sampling domain unset: declare a box for the supercritical check')
        box = [tuple(map(float, b)) for b in box]
        sup_u, argmax = SupercriticalCheck.sup_potential(H, box)
        margin = H.k - sup_u

        rng = np.random.default_rng(seed)
        shell_min = np.inf
        checked = 0
        if margin > 0:
            for _ in range(SupercriticalCheck.SHELL_SAMPLES):
                q = np.array([rng.uniform(lo, hi) for lo, hi in box])
                p = rng.normal(size=H.n)
                K = H.kinetic_value(q, p)
                if K <= 1e-12:
                    continue
                # 2-homogeneous kinetic energy: scale p onto the shell H = k
                p = p * np.sqrt((H.k - H.potential_value(q)) / K)
                j = hamiltonian_jets(H, q, p, order=1)
                shell_min = min(shell_min, float(j.Hp @ p))
                checked += 1
        return {
            'supercritical': bool(margin > 0 and (checked == 0 or shell_min > 0)),
            'margin': float(margin),
            'sup_U': float(sup_u),
            'argmax_U': np.asarray(argmax).tolist(),
            'shell_min_contact': None if checked == 0 else float(shell_min),
            'shell_samples': checked,
            'checked_at': datetime.now().isoformat(),
        }


def is_supercritical(H: HamiltonianSpec, box=None, seed: int = 0) -> Dict:
    return SupercriticalCheck.check(H, box, seed)


def _arc_length_solution(H: HamiltonianSpec, x0, T_max: float, stop_length: Optional[float]):
    n = H.n
    rtol, atol = integrator_tolerances()

    def rhs(t, y):
        j = hamiltonian_jets(H, y[:n], y[n:2 * n], order=1)
        return np.concatenate([j.Hp, -j.Hq, [np.linalg.norm(j.Hp)]])

    events = None
    if stop_length is not None:
        def reached(t, y):
            return y[-1] - stop_length
        reached.terminal = True
        events = [reached]
    y0 = np.concatenate([x0, [0.0]])
    result = solve_ivp(rhs, (0.0, T_max), y0, method='DOP853', dense_output=True,
                       rtol=rtol, atol=atol, events=events)
    if result.status == -1:
        raise IntegrationError(f'arc-length integration failed: {result.message}')
    return result


def maupertuis_comparison(H: HamiltonianSpec, x0, T: float = 1.0, samples: int = 200) -> Dict:
    """
    Compare projected orbits of H at level k and K/(k - U) at level 1

    The initial covector must lie on H = k; the same (q0, p0) then lies on
    the level 1 of the rescaled Hamiltonian.

    Returns:
        Dict with max_distance (an upper bound for the Hausdorff distance of
        the two point sets), arc_length and both integration times
    """
    x0 = np.asarray(x0, float)
    n = H.n
    level = H.value(x0[:n], x0[n:])
    if abs(level - H.k) > 1e-8 * (1.0 + abs(H.k)):
        raise PreconditionError(f'initial point is on H = {level:.10g}, not on k = {H.k}')
    Ht = maupertuis(H)
    first = _arc_length_solution(H, x0, T, None)
    length = float(first.y[-1, -1])
    second = _arc_length_solution(Ht, x0, 50.0 * max(T, 1.0), length)
    if second.status != 1:
        raise IntegrationError('rescaled orbit did not reach the reference arc length')

    def time_at(result, s):
        t_end = result.t[-1]
        if s <= 0.0:
            return 0.0
        if s >= result.sol(t_end)[-1]:
            return t_end
        return brentq(lambda t: result.sol(t)[-1] - s, 0.0, t_end, xtol=1e-14)

    worst = 0.0
    for s in np.linspace(0.0, length, samples):
        qa = first.sol(time_at(first, s))[:n]
        qb = second.sol(time_at(second, s))[:n]
        worst = max(worst, float(np.linalg.norm(qa - qb)))
    return {
        'max_distance': worst,
        'arc_length': length,
        'time_H': float(first.t[-1]),
        'time_rescaled': float(second.t[-1]),
    }
