"""Discrete curvature-dimension conditions and dimensional Wasserstein contraction.

Finite-difference generators on circles and intervals, their Gamma calculus,
heat semigroups, exact one-dimensional W2 distances, and numerical checks of
the equivalence between the curvature-dimension condition and dimensional
contraction of the heat flow, with its functional-inequality consequences.
"""

from .grid import CurvatureParams, build_generator, build_grid, check_pointwise_cd, estimate_best_R
from .harness import ContractionExperiment, Space, reference_space
from .report import CheckReport
from .transport import w2

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "ContractionExperiment",
    "CurvatureParams",
    "Space",
    "build_generator",
    "build_grid",
    "check_pointwise_cd",
    "estimate_best_R",
    "reference_space",
    "w2",
]
