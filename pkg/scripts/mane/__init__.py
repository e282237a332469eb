"""
Bracket-generating test for the matrix control system: bracket families,
span certificates against sp(2d) and Monte-Carlo genericity scans.
"""

from .brackets import BracketFamily, bracket_family, generator_jet
from .span import SpanCertificate, span_test, span_sweep
from .genericity import (GenericityScanner, genericity_scan, conjugate_family, sample_admissible,
                         default_null_direction, static_null_direction, random_fixing_rotation,
                         statistics_json)

__all__ = [
    'BracketFamily', 'bracket_family', 'generator_jet',
    'SpanCertificate', 'span_test', 'span_sweep',
    'GenericityScanner', 'genericity_scan', 'conjugate_family', 'sample_admissible',
    'default_null_direction', 'static_null_direction', 'random_fixing_rotation', 'statistics_json',
]
