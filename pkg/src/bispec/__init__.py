"""Numerical checks of spectral enclosures for bilaplacians with complex potentials.

Radial finite-volume discretization of ``Delta^2 + V`` in dimension
``d >= 5`` per angular sector, with sharp-constant estimates, eigenvalue
persistence tests, weighted resolvent norms and multiplier identities.
"""
from .core import (
    AngularSector,
    CheckReport,
    ConvergenceError,
    DimensionError,
    InvalidArgument,
    Potential,
    RadialGrid,
    Region,
    SpectralPoint,
    classify_region,
    gauge_wavenumber,
    principal_sqrt,
    sharp_constants,
    weighted_hardy_constant,
)
from .discretize import (
    BandedOperator,
    BoundaryConditions,
    GridTooCoarse,
    NearSingular,
    SingularPotential,
    build_bilaplacian,
    build_hamiltonian,
    build_radial_laplacian,
    verify_factorization,
)
from .identities import verify_A, verify_S1, verify_S2
from .inequalities import (
    ConstantKind,
    admissibility,
    admissible_threshold,
    cone_threshold,
    estimate_constant,
    smallness_coefficient,
)
from .resolvent import solve_resolvent, sweep_resolvent_norm, weighted_resolvent_norm
from .spectra import check_cone_enclosure, check_total_absence, eigenvalues

__version__ = "0.1.0"

__all__ = [
    "AngularSector",
    "BandedOperator",
    "BoundaryConditions",
    "CheckReport",
    "ConstantKind",
    "ConvergenceError",
    "DimensionError",
    "GridTooCoarse",
    "InvalidArgument",
    "NearSingular",
    "Potential",
    "RadialGrid",
    "Region",
    "SingularPotential",
    "SpectralPoint",
    "admissibility",
    "admissible_threshold",
    "build_bilaplacian",
    "build_hamiltonian",
    "build_radial_laplacian",
    "check_cone_enclosure",
    "check_total_absence",
    "classify_region",
    "cone_threshold",
    "eigenvalues",
    "estimate_constant",
    "gauge_wavenumber",
    "principal_sqrt",
    "sharp_constants",
    "smallness_coefficient",
    "solve_resolvent",
    "sweep_resolvent_norm",
    "verify_A",
    "verify_S1",
    "verify_S2",
    "verify_factorization",
    "weighted_hardy_constant",
    "weighted_resolvent_norm",
]
