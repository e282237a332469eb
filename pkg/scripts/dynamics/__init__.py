"""
Hamiltonians H = K + U on co-rank-1 distributions, their flows and orbit annotations
"""

from .hamiltonian import (HamiltonianSpec, HamiltonianJets, hamiltonian_jets, frame_hamiltonian,
                          legendre_dual_quadratic, matrix_hamiltonian, expression_hamiltonian,
                          maupertuis, euler_identity_defect, validate_hamiltonian)
from .flow import OrbitSegment, flow, flow_jacobian, reversibility_defect
from .supercritical import SupercriticalCheck, is_supercritical, maupertuis_comparison
from .neat_times import NeatTimeScanner, annotate_neat_times, is_neat_time

__all__ = [
    'HamiltonianSpec', 'HamiltonianJets', 'hamiltonian_jets', 'frame_hamiltonian',
    'legendre_dual_quadratic', 'matrix_hamiltonian', 'expression_hamiltonian',
    'maupertuis', 'euler_identity_defect', 'validate_hamiltonian',
    'OrbitSegment', 'flow', 'flow_jacobian', 'reversibility_defect',
    'SupercriticalCheck', 'is_supercritical', 'maupertuis_comparison',
    'NeatTimeScanner', 'annotate_neat_times', 'is_neat_time',
]
