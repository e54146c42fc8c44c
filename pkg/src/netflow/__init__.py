"""Curvature flow of regular planar networks.

Simulation of trees of curves meeting at 120-degree triple junctions with
endpoints fixed on a convex boundary, plus the diagnostic toolkit: Gaussian
density and its monotonicity, parabolic rescaling, tangent-flow
classification, singularity detection and surgery-based restarts.
"""

from . import diagnostics, events, geometry, io, junctions, scenarios, solver
from .errors import NetworkFlowError

__all__ = [
    "NetworkFlowError",
    "diagnostics",
    "events",
    "geometry",
    "io",
    "junctions",
    "scenarios",
    "solver",
]

__version__ = "0.1.0"
