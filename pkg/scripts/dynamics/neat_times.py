"""
Neat times of an orbit: nonzero projected velocity and no self-intersection

A time t is neat when every s with |s - t| > sep (distance taken on the
circle of length `period` for closed orbits) has |Q(s) - Q(t)| > tol with
tol = NEAT_TOLERANCE x diameter of the projected curve.

The pairwise scan samples the dense output, collects close pairs with a
cKDTree and refines each candidate with a bounded L-BFGS-B minimization of
|Q(s) - Q(t)|^2.

Usage:
    from dynamics.neat_times import annotate_neat_times

    orbit = annotate_neat_times(flow(H, x0, 2 * np.pi), period=2 * np.pi)
    orbit.flags['neat']                 # one bool per orbit.t node
    orbit.flags['self_intersections']   # refined (s, t) pairs
"""

from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .flow import OrbitSegment


class NeatTimeScanner:
    """Pairwise self-intersection scan on a sampled projected orbit"""

    NEAT_TOLERANCE = 1e-6
    SEPARATION_STEPS = 10
    SAMPLES = 2000
    SPEED_THRESHOLD = 1e-12

    def __init__(self, orbit: OrbitSegment, samples: Optional[int] = None,
                 tol_factor: Optional[float] = None, sep: Optional[float] = None,
                 period: Optional[float] = None):
        self.orbit = orbit
        self.period = period if period is not None else orbit.period
        count = samples or self.SAMPLES
        if self.period is not None:
            self.ts = np.linspace(orbit.t0, orbit.t0 + self.period, count, endpoint=False)
        else:
            self.ts = np.linspace(orbit.t0, orbit.t1, count)
        self.Q = np.array([orbit.q(s) for s in self.ts])
        self.cell = float(self.ts[1] - self.ts[0]) if count > 1 else 0.0
        self.diameter = float(np.max(pdist(self.Q))) if count > 1 else 0.0
        self.tol = (tol_factor if tol_factor is not None else self.NEAT_TOLERANCE) * self.diameter
        default_sep = self.SEPARATION_STEPS * max(orbit.max_step(), self.cell)
        self.sep = sep if sep is not None else default_sep

    def time_distance(self, s, t):
        gap = np.abs(np.asarray(s) - np.asarray(t))
        if self.period is not None:
            gap = np.mod(gap, self.period)
            gap = np.minimum(gap, self.period - gap)
        return gap

    def _refine(self, s0: float, t0: float) -> Tuple[float, float, float]:
        orbit = self.orbit
        lo, hi = orbit.t0, orbit.t1

        def dist2(x):
            diff = orbit.q(x[0]) - orbit.q(x[1])
            return float(diff @ diff)

        def clip(a, b):
            return max(lo, a), min(hi, b)

        bounds = [clip(s0 - self.cell, s0 + self.cell), clip(t0 - self.cell, t0 + self.cell)]
        res = minimize(dist2, [s0, t0], method='L-BFGS-B', bounds=bounds,
                       options={'ftol': 1e-30, 'gtol': 1e-16})
        return float(res.x[0]), float(res.x[1]), float(np.sqrt(max(res.fun, 0.0)))

    def self_intersections(self) -> List[Tuple[float, float, float]]:
        if len(self.ts) < 2 or self.diameter == 0.0:
            return []
        steps = np.linalg.norm(np.diff(self.Q, axis=0), axis=1)
        radius = 2.0 * float(np.max(steps)) + self.tol
        tree = cKDTree(self.Q)
        pairs = tree.query_pairs(radius, output_type='ndarray')
        if len(pairs) == 0:
            return []
        gaps = self.time_distance(self.ts[pairs[:, 0]], self.ts[pairs[:, 1]])
        pairs = pairs[gaps > self.sep]

        # closest partner per sample point
        best = {}
        for i, j in pairs:
            dist = float(np.linalg.norm(self.Q[i] - self.Q[j]))
            for a, b in ((i, j), (j, i)):
                if a not in best or dist < best[a][1]:
                    best[a] = (b, dist)

        found = []
        for a, (b, _) in sorted(best.items()):
            s, t, dist = self._refine(self.ts[a], self.ts[b])
            if dist < self.tol and self.time_distance(s, t) > self.sep:
                found.append((min(s, t), max(s, t), dist))
        return found

    def annotate(self) -> OrbitSegment:
        crossings = self.self_intersections()
        times = np.array([c[0] for c in crossings] + [c[1] for c in crossings])
        neat = np.ones(len(self.orbit.t), dtype=bool)
        if len(times):
            for k, t in enumerate(self.orbit.t):
                if np.min(self.time_distance(times, t)) <= self.cell:
                    neat[k] = False
        for k, t in enumerate(self.orbit.t):
            if np.linalg.norm(self.orbit.velocity(t)) <= self.SPEED_THRESHOLD:
                neat[k] = False
        self.orbit.flags['neat'] = neat
        self.orbit.flags['self_intersections'] = crossings
        self.orbit.flags['neat_fraction'] = float(np.mean(neat)) if len(neat) else 1.0
        self.orbit.flags['neat_tolerance'] = self.tol
        self.orbit.flags['separation'] = self.sep
        if self.period is not None:
            self.orbit.period = self.period
        return self.orbit

    def is_neat(self, t: float) -> bool:
        """Direct test of one time against the sampled orbit plus refinement"""
        if np.linalg.norm(self.orbit.velocity(t)) <= self.SPEED_THRESHOLD:
            return False
        q = self.orbit.q(t)
        far = self.time_distance(self.ts, t) > self.sep
        if not np.any(far):
            return True
        dists = np.linalg.norm(self.Q - q, axis=1)
        dists[~far] = np.inf
        idx = int(np.argmin(dists))
        if dists[idx] > 2.0 * self.cell * max(1.0, np.max(np.abs(self.orbit.velocity(t)))) + self.tol:
            return True
        orbit = self.orbit
        lo, hi = max(orbit.t0, self.ts[idx] - self.cell), min(orbit.t1, self.ts[idx] + self.cell)
        res = minimize(lambda x: float(np.sum((orbit.q(x[0]) - q) ** 2)), [self.ts[idx]],
                       method='L-BFGS-B', bounds=[(lo, hi)], options={'ftol': 1e-30, 'gtol': 1e-16})
        return bool(np.sqrt(max(res.fun, 0.0)) > self.tol)


def annotate_neat_times(orbit: OrbitSegment, samples: Optional[int] = None,
                        tol_factor: Optional[float] = None, sep: Optional[float] = None,
                        period: Optional[float] = None) -> OrbitSegment:
    return NeatTimeScanner(orbit, samples, tol_factor, sep, period).annotate()


def is_neat_time(orbit: OrbitSegment, t: float, samples: Optional[int] = None,
                 tol_factor: Optional[float] = None, sep: Optional[float] = None,
                 period: Optional[float] = None) -> bool:
    return NeatTimeScanner(orbit, samples, tol_factor, sep, period).is_neat(t)
