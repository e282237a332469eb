"""
Orbit-adapted normal form: straighten, Hamilton-Jacobi jets, flow box and
linear normalization, with certified invariants.
"""

from .symplecto import FiberedSymplecto, TaylorChart, invert_jet, collapse_defect
from .straighten import StraighteningMap, straighten_orbit, complement_basis, orbit_derivatives
from .hamilton_jacobi import HJJets, HamiltonJacobiSolver, solve_hj_jets
from .flow_box import ExpressionField, HJField, FlowBoxJets, FlowBoxBuilder, flow_box
from .linear_normalize import LinearNormalization, LinearNormalizer, linear_normalize
from .pipeline import NormalFormData, NormalFormPipeline, normal_form, fit_taylor, lobatto_nodes

__all__ = [
    'FiberedSymplecto', 'TaylorChart', 'invert_jet', 'collapse_defect',
    'StraighteningMap', 'straighten_orbit', 'complement_basis', 'orbit_derivatives',
    'HJJets', 'HamiltonJacobiSolver', 'solve_hj_jets',
    'ExpressionField', 'HJField', 'FlowBoxJets', 'FlowBoxBuilder', 'flow_box',
    'LinearNormalization', 'LinearNormalizer', 'linear_normalize',
    'NormalFormData', 'NormalFormPipeline', 'normal_form', 'fit_taylor', 'lobatto_nodes',
]
