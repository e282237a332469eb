"""
Orbit-adapted normal form

Runs the four steps along an orbit segment [0, delta]:

1. straighten the projected orbit            (straighten.py)
2. HJ jets along the characteristic          (hamilton_jacobi.py)
3. flow box of X(q) = H_p(q, dg(q))          (flow_box.py)
4. linear normalization of the Hessian       (linear_normalize.py)

Steps 1 and 3 share the section q0 + N yhat, so their composition is the
single map Xi(s, yhat) = Flow^s(q0 + N yhat) and the normal-form chart is
x = M Xi^{-1}(q). Together with the vertical map of g this is the collapsed
pair (one homogeneous, one vertical) of the composition rule.

A(t), n(t) are sampled on Chebyshev-Lobatto nodes and fitted to Taylor
CurveJets at t = 0. Each invariant is certified on the nodes; a failed
certificate, a Riccati blow-up or an integration failure halves delta.

Usage:
    from normal_form import NormalFormPipeline

    nf = NormalFormPipeline(verbose=True).run(H, orbit, delta=0.5)
    nf.curve.A_at(0.1), nf.certificates
    json.dump(nf.to_dict(), fh)
"""

import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Optional

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from dynamics import HamiltonianSpec, OrbitSegment, hamiltonian_jets
from shared.errors import CertificationError, IntegrationError, PreconditionError, RiccatiBlowUp
from shared.jets import CurveJet, MatrixJet
from shared.symplectic import rank_verdict

from .flow_box import FlowBoxBuilder, FlowBoxJets, HJField
from .hamilton_jacobi import HJJets, HamiltonJacobiSolver
from .linear_normalize import LinearNormalization, linear_normalize
from .straighten import StraighteningMap
from .symplecto import FiberedSymplecto, TaylorChart, collapse_defect


@dataclass
class NormalFormData:
    """A(t), n(t) along [0, delta] with the certificates of the run"""
    delta: float
    t: np.ndarray
    A: np.ndarray
    n: np.ndarray
    n_tilde: Optional[np.ndarray]
    B_full: np.ndarray
    g_hat: np.ndarray
    curve: CurveJet
    M: np.ndarray
    momentum_scale: float
    certificates: Dict
    hj: Optional[HJJets] = None
    box: Optional[FlowBoxJets] = None
    normalization: Optional[LinearNormalization] = None
    metadata: Dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def n_dot0(self) -> np.ndarray:
        return self.curve.n.derivative_at(1, 0.0)[:, 0]

    def sample_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.t - t)))

    def to_dict(self) -> Dict:
        return {
            'delta': self.delta,
            't': self.t.tolist(),
            'A': self.A.tolist(),
            'n': self.n.tolist(),
            'n_tilde': None if self.n_tilde is None else self.n_tilde.tolist(),
            'B_full': self.B_full.tolist(),
            'g_hat': self.g_hat.tolist(),
            'curve': self.curve.to_dict(),
            'M': self.M.tolist(),
            'momentum_scale': self.momentum_scale,
            'certificates': self.certificates,
            'metadata': self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict) -> 'NormalFormData':
        n_tilde = data.get('n_tilde')
        return cls(
            delta=float(data['delta']),
            t=np.array(data['t']),
            A=np.array(data['A']),
            n=np.array(data['n']),
            n_tilde=None if n_tilde is None else np.array(n_tilde),
            B_full=np.array(data['B_full']),
            g_hat=np.array(data['g_hat']),
            curve=CurveJet.from_dict(data['curve']),
            M=np.array(data['M']),
            momentum_scale=float(data.get('momentum_scale', 1.0)),
            certificates=data.get('certificates', {}),
            metadata=data.get('metadata', {}),
        )


def lobatto_nodes(delta: float, count: int) -> np.ndarray:
    k = np.arange(count)
    return 0.5 * delta * (1.0 - np.cos(np.pi * k / (count - 1)))


def fit_taylor(ts: np.ndarray, values: np.ndarray, delta: float, degree: int) -> np.ndarray:
    """Least-squares Chebyshev fit per entry, returned as t-power coefficients at 0"""
    flat = values.reshape(len(ts), -1)
    coeffs = np.zeros((degree + 1, flat.shape[1]))
    for col in range(flat.shape[1]):
        cheb = Chebyshev.fit(ts, flat[:, col], degree, domain=[0.0, delta])
        poly = cheb.convert(kind=Polynomial, domain=[0.0, delta], window=[0.0, delta])
        c = poly.coef
        coeffs[:len(c), col] = c
    return coeffs.reshape((degree + 1,) + values.shape[1:])


class NormalFormPipeline:
    """Four-step normal form with adaptive delta and invariant certificates"""

    CERT_TOLERANCE = 1e-7
    NULL_TOLERANCE = 1e-9
    RESIDUAL_KEYS = ('a_position', 'a_momentum', 'b_order0', 'b_order1', 'b_order2', 'c_order0', 'c_order1',
                     'd_hessian', 'null_closure', 'momentum_identity', 'symplectic', 'collapse')
    MIN_DELTA = 1e-3
    JET_DEGREE = 8
    NODES = 33
    RANK_THRESHOLD = 1e-8

    def __init__(self, verbose: bool = False, cert_tolerance: Optional[float] = None,
                 jet_degree: Optional[int] = None, nodes: Optional[int] = None,
                 min_delta: Optional[float] = None):
        self.verbose = verbose
        self.cert_tolerance = self.CERT_TOLERANCE if cert_tolerance is None else cert_tolerance
        self.jet_degree = self.JET_DEGREE if jet_degree is None else jet_degree
        self.nodes = self.NODES if nodes is None else nodes
        self.min_delta = self.MIN_DELTA if min_delta is None else min_delta

    def _log(self, message: str):
        if self.verbose:
            print(message)

    def run(self, H: HamiltonianSpec, orbit: OrbitSegment, delta: float) -> NormalFormData:
        """
        Raises:
            PreconditionError: orbit or Hessian violates a step precondition
            NewtonFailure: no HJ momentum on the section (never retried)
            RiccatiBlowUp, IntegrationError, CertificationError: still failing
                at the minimum delta
        """
        if orbit.t0 != 0.0:
            raise PreconditionError('normal form expects an orbit starting at t = 0')
        delta = float(min(delta, orbit.t1 - orbit.t0))
        self._log(f'\n{"="*70}')
        self._log(f'🔍 NORMAL FORM: d = {H.n - 1}, delta = {delta:.4g}')
        self._log(f'Timestamp: {datetime.now().strftime("%Y-%m-%d %H:%M:%S")}')
        self._log(f'{"="*70}\n')
        while True:
            try:
                data = self._attempt(H, orbit, delta)
                self._log(f'\n✅ Normal form certified on [0, {delta:.4g}]')
                return data
            except (RiccatiBlowUp, IntegrationError, CertificationError) as e:
                half = 0.5 * delta
                if half < self.min_delta:
                    self._log(f'   ❌ {type(e).__name__}: {e}')
                    raise
                self._log(f'   ⚠️  {type(e).__name__}: {e}; retrying with delta = {half:.4g}')
                delta = half

    def _attempt(self, H: HamiltonianSpec, orbit: OrbitSegment, delta: float) -> NormalFormData:
        n = H.n
        d = n - 1

        self._log('📊 Step 1: straightening the projected orbit...')
        straight = StraighteningMap(orbit)
        straighten_residual = max(
            float(np.max(np.abs(straight.phi(orbit.q(s)) - np.r_[s, np.zeros(d)])))
            for s in np.linspace(0.0, delta, 5))
        self._log(f'   ✓ |phi1(Q(t)) - t e1| = {straighten_residual:.2e}')

        self._log('📊 Step 2: Hamilton-Jacobi jets along the characteristic...')
        hj = HamiltonJacobiSolver(H).solve(orbit, delta)
        self._log(f'   ✓ momentum scale {hj.scale:.12g}')

        self._log('📊 Step 3: flow box...')
        q0 = hj.unpack(0.0)[0]
        box = FlowBoxBuilder(HJField(hj), n).build(q0, delta, hj.N)
        self._log('   ✓ variational jets integrated')

        self._log('📊 Step 4: linear normalization...')
        D1_0 = box.jets(0.0)[0]
        _, g1_0, _, _ = hj.unpack(0.0)
        Ainv0 = np.linalg.inv(D1_0)
        A_full0 = Ainv0 @ hamiltonian_jets(H, q0, g1_0, order=2).Hpp @ Ainv0.T
        lin = linear_normalize(0.5 * (A_full0[1:, 1:] + A_full0[1:, 1:].T))
        M, Mbar = lin.M, lin.Mbar
        Minv = np.linalg.inv(M)
        Mbar_invT = np.linalg.inv(Mbar).T
        self._log(f'   ✓ eigenvalues {np.array2string(lin.eigenvalues, precision=6)}')

        self._log('\n🔍 Sampling and certifying invariants...')
        ts = lobatto_nodes(delta, self.nodes)
        e1 = np.eye(n)[0]
        A_s, n_s, nt_s, B_s, g_s, D1_s, W_s = [], [], [], [], [], [], []
        cert = {key: 0.0 for key in (
            'a_position', 'a_momentum', 'b_order0', 'b_order1', 'b_order2',
            'c_order0', 'c_order1', 'null_closure', 'momentum_identity', 'null_residual')}
        ranks = []
        prev_n = None
        base_orbit = hj.orbit
        for t in ts:
            D1, D2, _ = box.jets(t)
            q, g1, S, T = hj.unpack(t)
            j = hamiltonian_jets(H, q, g1, order=2)
            Ainv = np.linalg.inv(D1)
            A_full = Ainv @ j.Hpp @ Ainv.T
            A = Mbar @ A_full[1:, 1:] @ Mbar.T
            A = 0.5 * (A + A.T)
            B_full = M @ A_full @ M.T

            eta = H.annihilator(q)
            if eta is not None:
                n_full = D1.T @ eta
                nv = Mbar_invT @ n_full[1:]
                cert['null_closure'] = max(cert['null_closure'],
                                       float(np.linalg.norm(A_full @ n_full) / np.linalg.norm(n_full)))
                nt_s.append(eta / np.linalg.norm(eta))
            else:
                nv = np.linalg.eigh(A)[1][:, 0]
            nv = nv / np.linalg.norm(nv)
            if prev_n is None:
                if nv[-1] < 0:
                    nv = -nv
            elif nv @ prev_n < 0:
                nv = -nv
            prev_n = nv

            state = base_orbit.state(t)
            cert['a_position'] = max(cert['a_position'], float(np.linalg.norm(box.base(t) - state[:n])))
            cert['a_momentum'] = max(cert['a_momentum'], float(np.linalg.norm(D1.T @ (state[n:] - g1))))

            r = hj.residuals(t)
            Dx = D1 @ Minv
            r2x = Minv.T @ (D1.T @ r['order2'] @ D1 + np.einsum('m,mab->ab', r['order1'], D2)) @ Minv
            cert['b_order0'] = max(cert['b_order0'], abs(float(r['order0'])))
            cert['b_order1'] = max(cert['b_order1'], float(np.max(np.abs(Dx.T @ r['order1']))))
            cert['b_order2'] = max(cert['b_order2'], float(np.max(np.abs(r2x))))

            cert['c_order0'] = max(cert['c_order0'], float(np.max(np.abs(M @ Ainv @ j.Hp - e1))))
            cert['momentum_identity'] = max(cert['momentum_identity'], float(np.max(np.abs(M @ Ainv @ j.Hpp @ g1 - e1))))
            cert['null_residual'] = max(cert['null_residual'], float(np.linalg.norm(A @ nv)))
            ranks.append(rank_verdict(A, d - 1, self.RANK_THRESHOLD)['rank'])

            A_s.append(A)
            n_s.append(nv)
            B_s.append(B_full)
            g_s.append(np.linalg.inv(M).T @ D1.T @ g1)
            D1_s.append(D1)
            W_s.append(j.hess[n:] @ np.vstack([np.eye(n), S]))

        A_s, n_s, D1_s = np.array(A_s), np.array(n_s), np.array(D1_s)
        dD1 = np.zeros_like(D1_s)
        for a in range(n):
            for b in range(n):
                cheb = Chebyshev.fit(ts, D1_s[:, a, b], self.nodes - 1, domain=[0.0, delta])
                dD1[:, a, b] = cheb.deriv()(ts)
        for k in range(len(ts)):
            resid = dD1[k] - W_s[k] @ D1_s[k]
            cert['c_order1'] = max(cert['c_order1'], float(np.max(np.abs(resid)) / (1.0 + np.max(np.abs(D1_s[k])))))

        cert['d_hessian'] = float(np.max(np.abs(A_s[0] - np.diag([1.0] * (d - 1) + [0.0]))))
        cert['null_rank'] = sorted(set(ranks))
        cert['straighten'] = straighten_residual

        A_coeffs = fit_taylor(ts, A_s, delta, self.jet_degree)
        A_coeffs = 0.5 * (A_coeffs + np.transpose(A_coeffs, (0, 2, 1)))
        A_coeffs[0] = A_s[0]
        n_coeffs = fit_taylor(ts, n_s, delta, self.jet_degree)
        n_coeffs[0] = n_s[0]
        curve = CurveJet(MatrixJet.from_taylor(A_coeffs), MatrixJet.from_taylor(n_coeffs[:, :, None]), delta)
        cert['n_dot0'] = float(np.linalg.norm(n_coeffs[1]))

        mid = 0.5 * delta
        cert['symplectic'], cert['collapse'] = self._map_defects(box, hj, M, Minv, mid)

        self._check(cert, d)
        self._log('   ✓ all invariants within tolerance')
        return NormalFormData(
            delta=delta, t=ts, A=A_s, n=n_s, n_tilde=np.array(nt_s) if nt_s else None,
            B_full=np.array(B_s), g_hat=np.array(g_s), curve=curve, M=M,
            momentum_scale=hj.scale, certificates=cert, hj=hj, box=box, normalization=lin,
            metadata={'certified_at': datetime.now().isoformat(), 'nodes': self.nodes,
                      'jet_degree': self.jet_degree, 'cert_tolerance': self.cert_tolerance})

    @staticmethod
    def _map_defects(box: FlowBoxJets, hj: HJJets, M, Minv, t: float):
        """Symplectic and collapse defects of Psi^g o Psi_Xi near the orbit at time t"""
        n = box.n
        D1, D2, D3 = box.jets(t)
        x_base = M @ np.r_[t, np.zeros(n - 1)]
        forward = TaylorChart(x_base, box.base(t), D1 @ Minv,
                              np.einsum('mab,ax,by->mxy', D2, Minv, Minv),
                              None if D3 is None else np.einsum('mabc,ax,by,cz->mxyz', D3, Minv, Minv, Minv))
        q_hj, g1, S, T = hj.unpack(t)

        def dg(q):
            k = np.asarray(q, float) - q_hj
            return g1 + S @ k + 0.5 * np.einsum('abc,b,c->a', T, k, k), S + np.einsum('abc,c->ab', T, k)

        homog = FiberedSymplecto.homogeneous(forward, n)
        vert = FiberedSymplecto.vertical(dg, n)
        rng = np.random.default_rng(0)
        x = x_base + 1e-2 * rng.normal(size=n)
        p = rng.normal(size=n)
        return vert.after(homog).symplectic_defect(x, p), collapse_defect(homog, vert, x, p)

    def _check(self, cert: Dict, d: int):
        tol = self.cert_tolerance
        failed = [key for key in self.RESIDUAL_KEYS if cert[key] > tol]
        if cert['null_residual'] > self.NULL_TOLERANCE:
            failed.append('null_residual')
        if cert['null_rank'] != [d - 1]:
            failed.append('null_rank')
        if failed:
            worst = ', '.join(f'{k}={cert[k]}' for k in failed)
            raise CertificationError(f'normal-form certificates above tolerance: {worst}')


def normal_form(H: HamiltonianSpec, orbit: OrbitSegment, delta: float, verbose: bool = False,
                **kwargs) -> NormalFormData:
    return NormalFormPipeline(verbose=verbose, **kwargs).run(H, orbit, delta)
