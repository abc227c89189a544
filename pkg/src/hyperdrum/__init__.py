"""Laplacian eigenmodes of compact hyperbolic 3-manifolds.

Modes are expanded in hyperspherical Bessel functions times spherical
harmonics; periodicity under the face-pairing group turns the
eigenvalue problem into a nullspace hunt, and eigenvalues show up as
sharp minima of the residual chi^2(k).
"""

__version__ = "0.1.0"

from .basis import ModeCoefficients, evaluate_mode, evaluate_mode_many
from .formats import FormatError, parse_manifold, read_mode, write_mode
from .geometry import GeometryError, HPoint, Isometry
from .solver import (Eigenmode, ScanConfig, ScanResult, SolverError,
                     detect_minima, refine_all, refine_minimum, scan)
from .tiling import (GeneratorSet, ManifoldSpec, TilingError,
                     domain_volume_mc, estimate_diameter, matched_circle,
                     sample_domain_points)
from .validation import (ValidationError, check_bounds, circles_test,
                         eigenvalue_bounds, goe_test, normalize_mode,
                         overlap, weyl_staircase)

__all__ = [
    "ModeCoefficients", "evaluate_mode", "evaluate_mode_many",
    "FormatError", "parse_manifold", "read_mode", "write_mode",
    "GeometryError", "HPoint", "Isometry",
    "Eigenmode", "ScanConfig", "ScanResult", "SolverError",
    "detect_minima", "refine_all", "refine_minimum", "scan",
    "GeneratorSet", "ManifoldSpec", "TilingError",
    "domain_volume_mc", "estimate_diameter", "matched_circle",
    "sample_domain_points",
    "ValidationError", "check_bounds", "circles_test",
    "eigenvalue_bounds", "goe_test", "normalize_mode", "overlap",
    "weyl_staircase",
    "__version__",
]
