"""
Bracket family of the matrix control system

    B^1_ij = [0 0; E_ij 0],   B^{l+1}_ij = [Y, B^l_ij] + d/dt B^l_ij,   Y(t) = [0 A(t); 0 0]

computed on polynomial jets (no numerical differentiation) and evaluated
at t0. B^l depends on derivatives of A up to order l - 2, so depth L needs
a jet of order >= L - 2.

Usage:
    from mane.brackets import bracket_family

    fam = bracket_family(curve, L=5)
    fam.level(2)          # (K, 2d, 2d) array of B^2_ij(t0)
"""

import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import PreconditionError
from shared.jets import CurveJet, MatrixJet
from shared.symplectic import lower_left, sp_defect, sym_basis


@dataclass
class BracketFamily:
    t0: float
    depth: int
    d: int
    indices: List[Tuple[int, int]]
    matrices: Dict[int, np.ndarray]
    Y: MatrixJet
    jets: Dict[int, List[MatrixJet]] = field(default_factory=dict, repr=False)

    def level(self, l: int) -> np.ndarray:
        if l not in self.matrices:
            raise PreconditionError(f'bracket level {l} not computed (depth {self.depth})')
        return self.matrices[l]

    def get(self, l: int, i: int, j: int) -> np.ndarray:
        """B^l_ij(t0) with 0-based i <= j"""
        if i > j:
            i, j = j, i
        return self.level(l)[self.indices.index((i, j))]

    def members(self, levels: Optional[Sequence[int]] = None) -> List[np.ndarray]:
        levels = range(1, self.depth + 1) if levels is None else levels
        return [B for l in levels for B in self.level(l)]

    def max_sp_defect(self) -> float:
        return max(sp_defect(B) for B in self.members())


def generator_jet(A: CurveJet) -> MatrixJet:
    d = A.dim
    zero = MatrixJet.constant(np.zeros((d, d)))
    return MatrixJet.blocks([[zero, A.A], [zero, zero]])


def bracket_family(A: CurveJet, L: int = 5, t0: float = 0.0) -> BracketFamily:
    """
    Raises:
        PreconditionError: the jet of A is too short for depth L
    """
    if L < 1:
        raise PreconditionError('bracket depth must be at least 1')
    if A.A.order is not None and A.A.order < L - 2:
        raise PreconditionError(f'A has jet order {A.A.order}, depth {L} needs {L - 2}')
    d = A.dim
    Y = generator_jet(A)
    basis = sym_basis(d)
    indices = [ij for ij, _ in basis]
    current = [MatrixJet.constant(lower_left(E)) for _, E in basis]
    jets = {1: current}
    for l in range(1, L):
        current = [Y @ B - B @ Y + B.derivative() for B in current]
        jets[l + 1] = current
    matrices = {l: np.array([B.value(t0) for B in Bs]) for l, Bs in jets.items()}
    return BracketFamily(float(t0), L, d, indices, matrices, Y, jets)
