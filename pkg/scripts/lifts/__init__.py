"""
Pontryagin lifts of horizontal curves: normal covectors, abnormal covectors
and uniqueness of normal lifts over regular curves.
"""

from .lagrangian import ControlLagrangian
from .pontryagin import (NormalLift, AbnormalCovector, PontryaginLifts, lift_normal,
                         abnormal_search, unique_lift_check)

__all__ = [
    'ControlLagrangian',
    'NormalLift', 'AbnormalCovector', 'PontryaginLifts', 'lift_normal',
    'abnormal_search', 'unique_lift_check',
]
