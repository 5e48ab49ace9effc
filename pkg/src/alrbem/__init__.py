"""Boundary integral solver for plasmonic shell transmission problems.

Modules
-------
medium        material primitives and derived wavenumbers
geometry      smooth closed contours, shells and flat-facet boxes
kernels       Green's functions and their derivatives
boundary_ops  Nystrom boundary operators and field evaluation
transmission  block system, field reconstruction, norms and energy terms
oracle        separable series solutions for circles and balls
resonance     loss sweeps, blow-up classification and diagnostics
"""

from .geometry import Circle, Ellipse, FlatBottomEllipse, FlatSlabRegion, make_contour, make_shell
from .medium import MediumParams, upper_sqrt
from .oracle import AnnulusConfig, annulus_solve, ball_series_solve, critical_radii
from .resonance import Problem, classify, eta_sweep
from .transmission import SourceSpec, energy_residual, h1_norm, reconstruct_fields, solve

__version__ = "0.1.0"

__all__ = [
    "Circle", "Ellipse", "FlatBottomEllipse", "FlatSlabRegion", "make_contour", "make_shell",
    "MediumParams", "upper_sqrt", "AnnulusConfig", "annulus_solve", "ball_series_solve",
    "critical_radii", "Problem", "classify", "eta_sweep", "SourceSpec", "energy_residual",
    "h1_norm", "reconstruct_fields", "solve",
]
