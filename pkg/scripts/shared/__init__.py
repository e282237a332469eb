"""
Shared building blocks for subrq

This package provides reusable components for:
- Polynomial matrix jets and the CurveJet type (jets.py)
- Symplectic linear algebra and rank verdicts (symplectic.py)
- The exception hierarchy (errors.py)
- Settings from .env.local and the environment (load_env.py)

All folders import from here to keep tolerances and conventions in one place.
"""

__version__ = '1.0.0'
