"""
Linearized transition maps as a matrix control problem: the end-point
differential, its submersion certificate, kinetic realization of perturbed
Hessians and the Poincaré map of a closed orbit.
"""

from .transition import Control, TransitionOperator, ControlProblem, transition_map
from .endpoint import (SubmersionCertificate, DyadicSplineBasis, EndpointDifferential,
                       endpoint_differential, gaussian_bumps, finite_family_submersion)
from .realization import (KineticPerturbation, PerturbationRealizer, realize_perturbation,
                          admissible_perturbation)
from .poincare import LinearizedTransition, TransitionLinearizer, linearized_transition, nondegeneracy

__all__ = [
    'Control', 'TransitionOperator', 'ControlProblem', 'transition_map',
    'SubmersionCertificate', 'DyadicSplineBasis', 'EndpointDifferential',
    'endpoint_differential', 'gaussian_bumps', 'finite_family_submersion',
    'KineticPerturbation', 'PerturbationRealizer', 'realize_perturbation', 'admissible_perturbation',
    'LinearizedTransition', 'TransitionLinearizer', 'linearized_transition', 'nondegeneracy',
]
