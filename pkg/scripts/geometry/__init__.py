"""
Co-rank-1 distributions: frames, horizontal curves, regularity classification
"""

from .frame import Chart, FrameSpec, heisenberg_frame, martinet_frame, flat_frame
from .horizontal import Control, HorizontalCurve, integrate_horizontal
from .classify import (RegularityClassifier, RegularityReport, regularity_form,
                       endpoint_differential_rank, classify_curve)

__all__ = [
    'Chart', 'FrameSpec', 'heisenberg_frame', 'martinet_frame', 'flat_frame',
    'Control', 'HorizontalCurve', 'integrate_horizontal',
    'RegularityClassifier', 'RegularityReport', 'regularity_form',
    'endpoint_differential_rank', 'classify_curve',
]
