"""
Closed-form engine of the bracket argument: the parametric family in the
normalized frame, the xi/eta/zeta/gamma/kappa expansions, aggregated sums,
the reduced matrix M with its scaling limit, and the formula battery.
"""

from .closed_forms import (NormalizedData, basis_matrices, literal_matrices, aggregate_sums, naive_sums,
                           diag_sum, closed_form_error)
from .family import (IndexSets, ParamFamily, derivatives_of_conjugated, conjugated_oracle, alpha_of,
                     check_conjugation_data, random_base, random_conjugation_data, random_family)
from .m_matrix import (MMatrix, m_matrix, m_bar_limit, pq_polynomials, reduced_determinant, scaled_w,
                       m_bar_convergence, b5_corner, span_members, span_kernel_dimension)
from .battery import FormulaBattery, formula_verify

__all__ = [
    'NormalizedData', 'basis_matrices', 'literal_matrices', 'aggregate_sums', 'naive_sums',
    'diag_sum', 'closed_form_error',
    'IndexSets', 'ParamFamily', 'derivatives_of_conjugated', 'conjugated_oracle', 'alpha_of',
    'check_conjugation_data', 'random_base', 'random_conjugation_data', 'random_family',
    'MMatrix', 'm_matrix', 'm_bar_limit', 'pq_polynomials', 'reduced_determinant', 'scaled_w',
    'm_bar_convergence', 'b5_corner', 'span_members', 'span_kernel_dimension',
    'FormulaBattery', 'formula_verify',
]
