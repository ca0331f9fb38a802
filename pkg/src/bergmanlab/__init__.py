"""Numerical laboratory for weighted Bergman spaces on model domains:
invariant-ball geometry, kernel machinery, relative density, weighted
three-sphere estimates, and the sampling/domination experiments built on top.
"""

__version__ = "0.1.0"

from . import geometry, util  # noqa: F401
