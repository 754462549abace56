"""Discrete Rayleigh estimates of the sharp constants, potential smallness
coefficients and the closed-form admissibility thresholds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize

from .core import (
    AngularSector,
    InvalidArgument,
    Potential,
    RadialGrid,
    require_dimension,
    sharp_constants,
    weighted_hardy_constant,
)
from .discretize import (
    _check_consistent,
    _require_fine,
    gradient_form,
    laplacian_form,
    mass_form,
    potential_values,
)

DENSE_LIMIT = 1500


# ---------------------------------------------------------------------------
# Pencil eigenproblems
# ---------------------------------------------------------------------------

def _as_sparse(B):
    if sp.issparse(B):
        return B.tocsc()
    return sp.diags(np.asarray(B, dtype=float)).tocsc()


def pencil_extreme(A, B, which: str = "min", method: str = "auto", tol: float = 1e-12) -> float:
    """Extreme generalized eigenvalue of the symmetric pencil ``A x = lam B x``.

    Parameters
    ----------
    A, B : sparse matrix or 1-d array (diagonal)
        Real symmetric forms.  For ``which='min'`` both must be positive
        definite; for ``which='max'`` only ``B`` must be.
    which : {'min', 'max'}
    method : {'auto', 'iterative', 'dense'}
        ``iterative`` is shift-invert Lanczos about 0 for the minimum and
        ``B``-inner-product Lanczos for the maximum.  ``dense`` calls LAPACK
        ``sygvd`` and serves as the oracle on small problems.
    """
    if which not in ("min", "max"):
        raise InvalidArgument(f"which must be 'min' or 'max', got {which!r}")
    A, B = _as_sparse(A), _as_sparse(B)
    n = A.shape[0]
    if method == "auto":
        method = "dense" if n <= 400 else "iterative"
    if method == "dense":
        if n > DENSE_LIMIT:
            raise InvalidArgument(f"dense pencil solve limited to n <= {DENSE_LIMIT}")
        idx = [0, 0] if which == "min" else [n - 1, n - 1]
        return float(sl.eigh(A.toarray(), B.toarray(), eigvals_only=True, subset_by_index=idx)[0])
    if method != "iterative":
        raise InvalidArgument(f"unknown method {method!r}")
    # a generic start vector; ones is orthogonal to odd-symmetry eigenvectors
    v0 = np.random.default_rng(0).standard_normal(n)
    if which == "min":
        vals = spla.eigsh(A, k=1, M=B, sigma=0.0, which="LM", tol=tol, v0=v0,
                          return_eigenvectors=False)
    else:
        vals = spla.eigsh(A, k=1, M=B, which="LA", tol=tol, v0=v0, maxiter=50 * n,
                          return_eigenvectors=False)
    return float(vals[0])


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

class ConstantKind(str, Enum):
    HARDY = "hardy"
    RELLICH = "rellich"
    HARDY_RELLICH = "hardy_rellich"
    WEIGHTED_HARDY = "weighted_hardy"


@dataclass(frozen=True)
class ConstantEstimate:
    """Discrete minimum Rayleigh quotient against its closed form."""

    kind: ConstantKind
    analytic: float
    discrete: float
    n: int
    R: float
    d: int
    ell: int
    gamma: float | None = None

    @property
    def relative_gap(self) -> float:
        return self.discrete / self.analytic - 1.0

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "gamma": self.gamma, "analytic": self.analytic,
                "discrete": self.discrete, "relative_gap": self.relative_gap,
                "n": self.n, "R": self.R, "d": self.d, "sector": self.ell}


def constant_pencil(kind, grid: RadialGrid, sector: AngularSector, gamma: float | None = None):
    """Numerator and denominator forms of an inequality and its sharp constant."""
    kind = ConstantKind(kind)
    d = grid.d
    c = sharp_constants(d)
    if kind is ConstantKind.HARDY:
        return gradient_form(grid, sector), mass_form(grid, -1), c.C_H
    if kind is ConstantKind.RELLICH:
        return laplacian_form(grid, sector), mass_form(grid, -2), c.C_R
    if kind is ConstantKind.HARDY_RELLICH:
        return laplacian_form(grid, sector), gradient_form(grid, sector, -1), c.C_HR
    if gamma is None:
        raise InvalidArgument("weighted Hardy needs gamma")
    return (gradient_form(grid, sector, gamma), mass_form(grid, gamma - 1),
            weighted_hardy_constant(d, gamma))


def estimate_constant(kind, d, grid: RadialGrid, sector: AngularSector | None = None,
                      gamma: float | None = None, method: str = "auto") -> ConstantEstimate:
    """Minimum discrete Rayleigh quotient of one of the sharp inequalities.

    Parameters
    ----------
    kind : ConstantKind or str
        ``hardy``, ``rellich``, ``hardy_rellich`` or ``weighted_hardy``.
    d : int
    grid : RadialGrid
    sector : AngularSector, optional
        Defaults to the radial sector.
    gamma : float, optional
        Weight exponent for ``weighted_hardy``.
    """
    d = require_dimension(d)
    sector = sector or AngularSector(0, d)
    _check_consistent(d, sector, grid)
    _require_fine(grid)
    kind = ConstantKind(kind)
    A, B, analytic = constant_pencil(kind, grid, sector, gamma)
    if kind is ConstantKind.WEIGHTED_HARDY and analytic <= 0:
        raise InvalidArgument("weighted Hardy constant vanishes for this gamma")
    discrete = pencil_extreme(A, B, "min", method)
    return ConstantEstimate(kind, analytic, discrete, grid.n, grid.R, d, sector.ell,
                            gamma if kind is ConstantKind.WEIGHTED_HARDY else None)


# ---------------------------------------------------------------------------
# Potential coefficients
# ---------------------------------------------------------------------------

def _potential_weight(V: Potential, grid: RadialGrid) -> np.ndarray:
    v = potential_values(V, grid)
    return grid.quad_weights * grid.nodes**4 * np.abs(v) ** 2


def smallness_coefficient(V: Potential, d, grid: RadialGrid, sector: AngularSector | None = None,
                          method: str = "auto") -> float:
    """Smallest ``a`` with ``int r^4 |V|^2 |psi|^2 <= a^2 int |grad psi|^2 / r^2``
    on the discrete sector space."""
    sector = sector or AngularSector(0, d)
    _check_consistent(d, sector, grid)
    M = _potential_weight(V, grid)
    if not np.any(M):
        return 0.0
    lam = pencil_extreme(M, gradient_form(grid, sector, -1), "max", method)
    return math.sqrt(max(lam, 0.0))


def rellich_smallness_coefficient(V: Potential, d, grid: RadialGrid,
                                  sector: AngularSector | None = None,
                                  method: str = "auto") -> float:
    """Smallest ``a`` with ``int r^4 |V|^2 |psi|^2 <= a^2 int |Delta psi|^2``."""
    sector = sector or AngularSector(0, d)
    _check_consistent(d, sector, grid)
    M = _potential_weight(V, grid)
    if not np.any(M):
        return 0.0
    lam = pencil_extreme(M, laplacian_form(grid, sector), "max", method)
    return math.sqrt(max(lam, 0.0))


def radial_virial(V: Potential, grid: RadialGrid) -> np.ndarray:
    """Nodal values of ``x . grad V = r V'(r)``.

    Analytic families use their exact derivative.  Sampled values and sharp
    steps use centered differences with one-sided ends.
    """
    r = grid.nodes
    dV = V.derivative(r)
    if dV is None:
        dV = np.gradient(potential_values(V, grid), grid.h, edge_order=2)
    return r * dV


def repulsivity_coefficient(V: Potential, d, grid: RadialGrid, sector: AngularSector | None = None,
                            method: str = "auto") -> float:
    """Smallest ``a`` with ``(1/4) int [x.grad V]_+ |psi|^2 <= a int |Delta psi|^2``.

    Raises
    ------
    InvalidArgument
        If ``V`` is not real-valued.
    """
    if not V.is_real:
        raise InvalidArgument("repulsivity needs a real-valued potential")
    sector = sector or AngularSector(0, d)
    _check_consistent(d, sector, grid)
    P = 0.25 * grid.quad_weights * np.maximum(radial_virial(V, grid).real, 0.0)
    if not np.any(P):
        return 0.0
    return max(pencil_extreme(P, laplacian_form(grid, sector), "max", method), 0.0)


# ---------------------------------------------------------------------------
# Closed-form thresholds
# ---------------------------------------------------------------------------

def threshold_coefficients(d) -> tuple[float, float]:
    """Coefficients ``(p, q)`` of ``F(a, d) = p a + q a^(3/2)``."""
    d = require_dimension(d)
    CH = sharp_constants(d).C_H
    p = 4 * d**2 * (d - 3) / ((d - 2) * (d - 4)) / math.sqrt(CH)
    q = 4 * d * math.sqrt(d) / ((d - 4) * math.sqrt((d - 2) * (d - 4))) / CH**0.75
    return p, q


def threshold_function(a: float, d) -> float:
    """Left side ``F(a, d)`` of the total-absence smallness condition."""
    if a < 0:
        raise InvalidArgument("a must be non-negative")
    p, q = threshold_coefficients(d)
    return p * a + q * a**1.5


def admissible_threshold(d) -> float:
    """Unique positive root ``a*`` of ``F(a, d) = 1`` by bisection."""
    p, _ = threshold_coefficients(d)
    hi = 1.0 / p  # F(1/p) >= 1
    return float(optimize.bisect(lambda a: threshold_function(a, d) - 1.0, 0.0, hi,
                                 xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))


def cone_threshold(delta: float, d) -> float:
    """Supremum ``sqrt(C_R) delta/(1 + delta)`` of admissible cone coefficients."""
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    return math.sqrt(sharp_constants(d).C_R) * delta / (1.0 + delta)


def sa_constants(d, a: float) -> tuple[float, float]:
    """Constants ``(c, c_tilde)`` for repulsive self-adjoint potentials.

    ``c_tilde = 2(d-2)/(d(d-4)(1-a))`` bounds ``||Delta u|| / ||r^2 f||``
    and ``c = c_tilde / sqrt(C_R)`` bounds ``||u/r^2|| / ||r^2 f||``.
    """
    d = require_dimension(d)
    if not 0 <= a < 1:
        raise InvalidArgument("a must lie in [0, 1)")
    ct = 2 * (d - 2) / (d * (d - 4)) / (1 - a)
    return ct / math.sqrt(sharp_constants(d).C_R), ct


def nsa_constant(d, a: float) -> float:
    """``sqrt(C_HR) / (sqrt(C_R) sqrt(C_HR) - a)`` for ``Re z < 0`` a priori bounds."""
    c = sharp_constants(d)
    pole = math.sqrt(c.C_R) * math.sqrt(c.C_HR)
    if not 0 <= a < pole:
        raise InvalidArgument(f"a must lie in [0, {pole})")
    return math.sqrt(c.C_HR) / (pole - a)


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    """Measured smallness coefficient against the total-absence threshold.

    ``a_measured`` is the maximum over the scanned sectors at radius ``R``;
    ``a_measured_2R`` repeats it at ``2R`` with the same spacing.
    """

    a_measured: float
    a_star: float
    d: int
    n: int
    R: float
    potential: dict
    sectors: tuple = (0, 1, 2)
    a_measured_2R: float | None = None
    per_sector: dict = field(default_factory=dict)

    @property
    def admissible(self) -> bool:
        a = self.a_measured if self.a_measured_2R is None else max(self.a_measured, self.a_measured_2R)
        return a < self.a_star

    def to_dict(self) -> dict:
        return {"a_measured": self.a_measured, "a_measured_2R": self.a_measured_2R,
                "a_star": self.a_star, "admissible": self.admissible, "d": self.d,
                "n": self.n, "R": self.R, "sectors": list(self.sectors),
                "per_sector": {str(k): v for k, v in self.per_sector.items()},
                "potential": self.potential}


def admissibility(V: Potential, d, n: int, R: float, sectors=(0, 1, 2),
                  r_doubling: bool = True) -> AdmissibilityReport:
    """Evaluate the total-absence smallness hypothesis for ``V``."""
    d = require_dimension(d)
    grid = RadialGrid(n, R, d)
    per = {ell: smallness_coefficient(V, d, grid, AngularSector(ell, d)) for ell in sectors}
    a2 = None
    if r_doubling:
        g2 = grid.extended(2)
        a2 = max(smallness_coefficient(V, d, g2, AngularSector(ell, d)) for ell in sectors)
    return AdmissibilityReport(max(per.values()), admissible_threshold(d), d, n, R,
                               V.descriptor(), tuple(sectors), a2, per)
