"""
Hamiltonians H = c(q) K(q, p) + U(q) on a chart

Kinetic kinds:
- frame:      K = 1/2 sum_ij (p.f^i) g^ij (p.f^j)   (Legendre dual of a metric g on the frame)
- matrix:     K = 1/2 p.B(q)p
- expression: K written directly in q and p (and h_i = p.f^i when a frame is attached)

c(q) is a conformal factor, 1 unless the Hamiltonian came out of maupertuis().

hamiltonian_jets() returns H and its derivatives in z = (q, p) to order 2,
or 3 on request, by running the expression jets through the formula above.

Usage:
    from dynamics.hamiltonian import frame_hamiltonian, hamiltonian_jets

    H = frame_hamiltonian(heisenberg_frame(), potential='0', k=0.5)
    jets = hamiltonian_jets(H, q, p, order=2)
    jets.Hp, jets.Hqq
"""

import os
import sys
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from expr import ExprParser, eval_jet, evaluate, JetValue, Const, Var, Add, Mul, Div, Sub, substitute
from expr.jet import reciprocal
from geometry.frame import FrameSpec
from shared.errors import PreconditionError


KINDS = ('frame', 'matrix', 'expression')
CLASSES = ('quad', 'rf')


@dataclass(frozen=True)
class HamiltonianSpec:
    kind: str
    names: Tuple[str, ...]
    potential: object
    k: float
    cls: str = 'quad'
    frame: Optional[FrameSpec] = None
    metric: Optional[Tuple[Tuple[object, ...], ...]] = None
    B: Optional[Tuple[Tuple[object, ...], ...]] = None
    kinetic: Optional[object] = None
    factor: Optional[object] = None
    box: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f'unknown kinetic kind {self.kind!r}')
        if self.cls not in CLASSES:
            raise PreconditionError(f'unknown Hamiltonian class {self.cls!r}')
        if self.kind == 'frame' and self.frame is None:
            raise PreconditionError('frame kind needs a frame')
        if self.kind == 'matrix' and self.B is None:
            raise PreconditionError('matrix kind needs B(q)')
        if self.kind == 'expression' and self.kinetic is None:
            raise PreconditionError('expression kind needs a kinetic expression')

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def sample_box(self):
        if self.box is not None:
            return self.box
        if self.frame is not None and self.frame.chart.box is not None:
            return self.frame.chart.box
        return None

    def with_energy(self, k: float) -> 'HamiltonianSpec':
        return replace(self, k=float(k))

    # Evaluation shortcuts

    def value(self, q, p) -> float:
        return hamiltonian_jets(self, q, p, order=0).value

    def gradient(self, q, p):
        j = hamiltonian_jets(self, q, p, order=1)
        return j.Hq, j.Hp

    def potential_value(self, q) -> float:
        return evaluate(self.potential, q)

    def kinetic_value(self, q, p) -> float:
        return self.value(q, p) - self.potential_value(q)

    def kinetic_matrix(self, q, p=None) -> np.ndarray:
        """
        B(q) with K = 1/2 p.B p (times the conformal factor)

        For the expression kind this is the fiber Hessian at p.
        """
        q = np.asarray(q, float)
        if self.kind == 'expression':
            if p is None:
                raise PreconditionError('expression kinetic energy needs p for its fiber Hessian')
            return hamiltonian_jets(self, q, p, order=2).Hpp
        c = 1.0 if self.factor is None else evaluate(self.factor, q)
        if self.kind == 'matrix':
            return c * np.array([[evaluate(e, q) for e in row] for row in self.B])
        F = self.frame.frame_matrix(q)
        g = np.eye(self.frame.d) if self.metric is None else \
            np.array([[evaluate(e, q) for e in row] for row in self.metric])
        return c * F @ np.linalg.solve(g, F.T)

    def annihilator(self, q) -> Optional[np.ndarray]:
        """A covector spanning the distribution's annihilator at q"""
        if self.frame is not None:
            return self.frame.eta_value(q)
        if self.kind == 'matrix':
            w, V = np.linalg.eigh(self.kinetic_matrix(q))
            return V[:, 0]
        return None


@dataclass
class HamiltonianJets:
    """H and its derivatives in z = (q, p)"""
    value: float
    grad: np.ndarray
    hess: np.ndarray
    third: Optional[np.ndarray]
    n: int

    @property
    def Hq(self):
        return self.grad[:self.n]

    @property
    def Hp(self):
        return self.grad[self.n:]

    @property
    def Hqq(self):
        return self.hess[:self.n, :self.n]

    @property
    def Hqp(self):
        """[a, b] = d_qa d_pb H"""
        return self.hess[:self.n, self.n:]

    @property
    def Hpq(self):
        return self.hess[self.n:, :self.n]

    @property
    def Hpp(self):
        return self.hess[self.n:, self.n:]


def _embed(j: JetValue, total: int, offset: int = 0) -> JetValue:
    n = j.dim
    grad = np.zeros(total)
    grad[offset:offset + n] = j.grad
    hess = np.zeros((total, total))
    hess[offset:offset + n, offset:offset + n] = j.hess
    third = None
    if j.order >= 3:
        third = np.zeros((total, total, total))
        third[offset:offset + n, offset:offset + n, offset:offset + n] = j.third
    return JetValue(j.value, grad, hess, third, j.order)


def _zero(total: int, order: int) -> JetValue:
    return JetValue.constant(0.0, total, order)


def _q_jet(e, q, total: int, order: int) -> Optional[JetValue]:
    """Embedded jet of a q-expression, None for the literal zero"""
    if isinstance(e, Const) and e.value == 0.0:
        return None
    return _embed(eval_jet(e, q, order=max(order, 1)), total)


def _jet_inverse(G: List[List[JetValue]]) -> List[List[JetValue]]:
    """Gauss-Jordan on a matrix of jets (no pivoting; G positive definite)"""
    m = len(G)
    total, order = G[0][0].dim, G[0][0].order
    A = [list(row) for row in G]
    inv = [[JetValue.constant(1.0 if r == c else 0.0, total, order) for c in range(m)] for r in range(m)]
    for c in range(m):
        r_piv = reciprocal(A[c][c])
        A[c] = [x * r_piv for x in A[c]]
        inv[c] = [x * r_piv for x in inv[c]]
        for r in range(m):
            if r == c:
                continue
            f = A[r][c]
            A[r] = [A[r][k] - f * A[c][k] for k in range(m)]
            inv[r] = [inv[r][k] - f * inv[c][k] for k in range(m)]
    return inv


def _kinetic_jet(H: HamiltonianSpec, q, p, order: int) -> JetValue:
    n = H.n
    total = 2 * n
    jet_order = max(order, 1)
    if H.kind == 'expression':
        K = eval_jet(H.kinetic, np.concatenate([q, p]), order=jet_order)
    else:
        pj = [JetValue.variable(n + a, p[a], total, jet_order) for a in range(n)]
        if H.kind == 'matrix':
            K = _zero(total, jet_order)
            for a in range(n):
                for b in range(n):
                    B_ab = _q_jet(H.B[a][b], q, total, jet_order)
                    if B_ab is not None:
                        K = K + pj[a] * B_ab * pj[b]
            K = K.scale(0.5)
        else:
            u = []
            for f in H.frame.fields:
                ui = _zero(total, jet_order)
                for a, comp in enumerate(f):
                    fa = _q_jet(comp, q, total, jet_order)
                    if fa is not None:
                        ui = ui + pj[a] * fa
                u.append(ui)
            K = _zero(total, jet_order)
            if H.metric is None:
                for ui in u:
                    K = K + ui * ui
            else:
                G = [[_embed(eval_jet(e, q, order=jet_order), total) for e in row] for row in H.metric]
                Ginv = _jet_inverse(G)
                for i, ui in enumerate(u):
                    for j, uj in enumerate(u):
                        K = K + ui * Ginv[i][j] * uj
            K = K.scale(0.5)
    if H.factor is not None:
        K = _embed(eval_jet(H.factor, q, order=jet_order), total) * K
    return K


def hamiltonian_jets(H: HamiltonianSpec, q, p, order: int = 2) -> HamiltonianJets:
    """
    H and its z = (q, p) derivatives

    Args:
        H: HamiltonianSpec
        q, p: Phase point
        order: 0..3; order 3 fills the third tensor

    Returns:
        HamiltonianJets
    """
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    total = 2 * H.n
    K = _kinetic_jet(H, q, p, order)
    U = _embed(eval_jet(H.potential, q, order=max(order, 1)), total)
    j = K + U
    return HamiltonianJets(j.value, j.grad, j.hess, j.third if order >= 3 else None, H.n)


# Builders

def _momentum_names(names: Sequence[str]) -> List[str]:
    if all(n.startswith('q') and n[1:].isdigit() for n in names):
        return [f'p{n[1:]}' for n in names]
    return [f'p{n}' for n in names]


def frame_hamiltonian(frame: FrameSpec, potential: str = '0', k: float = 0.5,
                      metric: Optional[Sequence[Sequence[str]]] = None,
                      cls: str = 'quad', box=None) -> HamiltonianSpec:
    parser = ExprParser(frame.chart.names)
    g = None
    if metric is not None:
        g = tuple(tuple(parser.parse(str(e)) for e in row) for row in metric)
        if len(g) != frame.d or any(len(row) != frame.d for row in g):
            raise PreconditionError(f'metric must be {frame.d}x{frame.d}')
    return HamiltonianSpec('frame', tuple(frame.chart.names), parser.parse(str(potential)), float(k),
                           cls, frame=frame, metric=g,
                           box=None if box is None else tuple(tuple(b) for b in box))


def legendre_dual_quadratic(metric: Sequence[Sequence[str]], frame: FrameSpec,
                            potential: str = '0', k: float = 0.5,
                            samples: int = 20, seed: int = 0) -> HamiltonianSpec:
    """
    K(q, p) = 1/2 p.F g^-1 F^T p, the Legendre dual of L(q, F c) = 1/2 c.g c

    Raises:
        PreconditionError: g not positive definite at a sample point
    """
    H = frame_hamiltonian(frame, potential, k, metric=metric)
    for q in frame.chart.sample(samples, seed):
        g = np.array([[evaluate(e, q) for e in row] for row in H.metric])
        if not np.allclose(g, g.T, atol=1e-12) or np.min(np.linalg.eigvalsh(0.5 * (g + g.T))) <= 0.0:
            raise PreconditionError(f'metric is not positive definite at {np.round(q, 6).tolist()}')
    return H


def matrix_hamiltonian(names: Sequence[str], B: Sequence[Sequence[str]], potential: str = '0',
                       k: float = 0.5, frame: Optional[FrameSpec] = None,
                       cls: str = 'quad', box=None) -> HamiltonianSpec:
    parser = ExprParser(names)
    n = len(names)
    rows = tuple(tuple(parser.parse(str(e)) for e in row) for row in B)
    if len(rows) != n or any(len(r) != n for r in rows):
        raise PreconditionError(f'B(q) must be {n}x{n}')
    return HamiltonianSpec('matrix', tuple(names), parser.parse(str(potential)), float(k), cls,
                           frame=frame, B=rows,
                           box=None if box is None else tuple(tuple(b) for b in box))


def expression_hamiltonian(names: Sequence[str], kinetic: str, potential: str = '0',
                           k: float = 0.5, frame: Optional[FrameSpec] = None,
                           cls: str = 'rf', box=None,
                           momentum_names: Optional[Sequence[str]] = None) -> HamiltonianSpec:
    """
    Kinetic energy written in q and p

    With a frame attached, h1..hd stand for p.f^1..p.f^d, so a sub-Finsler
    energy reads e.g. '0.5*sqrt(h1^4 + h2^4)'.
    """
    names = list(names)
    pnames = list(momentum_names) if momentum_names else _momentum_names(names)
    n = len(names)
    extra = [f'h{i + 1}' for i in range(frame.d)] if frame is not None else []
    parser = ExprParser(names + pnames + extra)
    K = parser.parse(kinetic)
    if frame is not None:
        h_exprs = {}
        for i, f in enumerate(frame.fields):
            total = None
            for a, comp in enumerate(f):
                if isinstance(comp, Const) and comp.value == 0.0:
                    continue
                term = Mul(Var(n + a, pnames[a]), comp)
                total = term if total is None else Add(total, term)
            h_exprs[2 * n + i] = total if total is not None else Const(0.0)
        K = substitute(K, h_exprs)
    q_parser = ExprParser(names)
    return HamiltonianSpec('expression', tuple(names), q_parser.parse(str(potential)), float(k), cls,
                           frame=frame, kinetic=K,
                           box=None if box is None else tuple(tuple(b) for b in box))


def maupertuis(H: HamiltonianSpec, check: bool = True) -> HamiltonianSpec:
    """
    K/(k - U) at energy level 1

    Raises:
        PreconditionError: (K, U, k) is not supercritical on the sample box
    """
    if check:
        from .supercritical import is_supercritical
        verdict = is_supercritical(H)
        if not verdict['supercritical']:
            raise PreconditionError(f'not supercritical (margin {verdict["margin"]:.4g})')
    scale = Div(Const(1.0), Sub(Const(H.k), H.potential))
    factor = scale if H.factor is None else Mul(H.factor, scale)
    return replace(H, potential=Const(0.0), k=1.0, factor=factor)


# Structural checks

def euler_identity_defect(H: HamiltonianSpec, beta: float = 2.0, samples: int = 20,
                          seed: int = 0) -> Dict:
    """
    max |dK/dp . p - beta K| and max |K(q, lam p) - lam^beta K(q, p)| on random (q, p)
    """
    rng = np.random.default_rng(seed)
    box = H.sample_box or tuple((-1.0, 1.0) for _ in range(H.n))
    euler = 0.0
    homogeneity = 0.0
    for _ in range(samples):
        q = np.array([rng.uniform(lo, hi) for lo, hi in box])
        p = rng.normal(size=H.n)
        lam = rng.uniform(0.2, 3.0)
        U = H.potential_value(q)
        j = hamiltonian_jets(H, q, p, order=1)
        K = j.value - U
        euler = max(euler, abs(float(j.Hp @ p) - beta * K) / max(1.0, abs(K)))
        K_lam = H.value(q, lam * p) - U
        homogeneity = max(homogeneity, abs(K_lam - lam ** beta * K) / max(1.0, abs(K_lam)))
    return {'beta': beta, 'euler_defect': euler, 'homogeneity_defect': homogeneity}


def validate_hamiltonian(H: HamiltonianSpec, samples: int = 20, seed: int = 0,
                         tol: float = 1e-10) -> Dict:
    """
    Fiber degeneracy K(q, p + P) = K(q, p) for P in the annihilator, K(q, -p) = K(q, p)
    for the rf class, and exactly d positive fiber-Hessian eigenvalues

    Returns:
        Dict with valid, errors, warnings, passed_checks, metadata
    """
    rng = np.random.default_rng(seed)
    box = H.sample_box or tuple((-1.0, 1.0) for _ in range(H.n))
    errors, warnings, passed = [], [], []
    flat, parity, rank_bad = 0.0, 0.0, 0
    d = H.n - 1
    for _ in range(samples):
        q = np.array([rng.uniform(lo, hi) for lo, hi in box])
        p = rng.normal(size=H.n)
        K = H.kinetic_value(q, p)
        eta = H.annihilator(q)
        if eta is not None:
            P = rng.normal() * eta
            flat = max(flat, abs(H.kinetic_value(q, p + P) - K) / max(1.0, abs(K)))
        parity = max(parity, abs(H.kinetic_value(q, -p) - K) / max(1.0, abs(K)))
        B = H.kinetic_matrix(q, p)
        w = np.linalg.eigvalsh(0.5 * (B + B.T))
        if int(np.sum(w > 1e-9 * max(1.0, w[-1]))) != d:
            rank_bad += 1
    if H.annihilator(np.zeros(H.n)) is None:
        warnings.append('no annihilator known; fiber degeneracy not checked')
    elif flat > tol:
        errors.append(f'K changes along the annihilator (max {flat:.2e})')
    else:
        passed.append('K(q, p + P) = K(q, p)')
    if parity > tol:
        errors.append(f'K(q, -p) != K(q, p) (max {parity:.2e})')
    else:
        passed.append('K(q, -p) = K(q, p)')
    if rank_bad:
        errors.append(f'fiber Hessian does not have exactly {d} positive eigenvalues at {rank_bad} samples')
    else:
        passed.append(f'fiber Hessian has rank {d}')
    return {
        'valid': not errors,
        'errors': errors,
        'warnings': warnings,
        'passed_checks': passed,
        'metadata': {'samples': samples, 'validated_at': datetime.now().isoformat()},
    }
