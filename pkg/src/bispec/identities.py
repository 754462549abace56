"""Quadrature residuals of the multiplier identities.

For ``Delta^2 u - z u = f``::

    (S1)  ||Delta u||^2 - Re z ||u||^2 = Re <f, u>
    (S2)  -Im z ||u||^2               = Im <f, u>

and for compactly supported ``u`` with ``Delta^2 u + V u - z u = f + g``,
``z`` and ``V`` real::

    (A)   4 ||Delta u||^2 - <x.grad V u, u> = Re <f + g, (2 x.grad + d) u>

Derivative terms are discrete (sector Laplacian, centered radial
difference); integrals use the grid quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import Polynomial

from .core import AngularSector, InvalidArgument, Potential, RadialGrid, require_dimension
from .discretize import centered_derivative, delta_norm, weighted_norm
from .inequalities import radial_virial

FLOOR = 1e-300


class Identity(str, Enum):
    S1 = "S1"
    S2 = "S2"
    A = "A"


@dataclass(frozen=True)
class IdentityResidual:
    """Both sides of an identity and ``|lhs - rhs| / max(|lhs|, |rhs|, floor)``."""

    identity: Identity
    lhs: float
    rhs: float
    n: int
    R: float
    d: int
    ell: int
    floor: float = FLOOR

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), abs(self.rhs), self.floor)

    def to_dict(self) -> dict:
        return {"identity": self.identity.value, "lhs": self.lhs, "rhs": self.rhs,
                "residual": self.residual, "n": self.n, "R": self.R, "d": self.d,
                "sector": self.ell}


def _inner(f, u, grid: RadialGrid) -> complex:
    """Weighted ``int f conj(u)``."""
    return complex(np.sum(grid.quad_weights * np.asarray(f) * np.conj(u)))


def _setup(u, f, grid, d, sector):
    d = grid.d if d is None else require_dimension(d)
    if d != grid.d:
        raise InvalidArgument("dimension mismatch between d and grid")
    sector = sector or AngularSector(0, d)
    u = np.asarray(u, dtype=complex)
    f = np.asarray(f, dtype=complex)
    if u.shape != (grid.n,) or f.shape != (grid.n,):
        raise InvalidArgument("u and f must be sampled on the grid")
    return d, sector, u, f


def verify_S1(u, f, z, grid: RadialGrid, d=None, sector: AngularSector | None = None,
              floor: float = FLOOR) -> IdentityResidual:
    """Real-part energy identity."""
    d, sector, u, f = _setup(u, f, grid, d, sector)
    z = complex(z)
    lhs = delta_norm(u, grid, d, sector) ** 2 - z.real * weighted_norm(u, grid) ** 2
    rhs = _inner(f, u, grid).real
    return IdentityResidual(Identity.S1, lhs, rhs, grid.n, grid.R, d, sector.ell, floor)


def verify_S2(u, f, z, grid: RadialGrid, d=None, sector: AngularSector | None = None,
              floor: float = FLOOR) -> IdentityResidual:
    """Imaginary-part identity."""
    d, sector, u, f = _setup(u, f, grid, d, sector)
    z = complex(z)
    lhs = -z.imag * weighted_norm(u, grid) ** 2
    rhs = _inner(f, u, grid).imag
    return IdentityResidual(Identity.S2, lhs, rhs, grid.n, grid.R, d, sector.ell, floor)


def verify_A(u, V: Potential, f, g, z, grid: RadialGrid, d=None,
             sector: AngularSector | None = None, support_tol: float = 1e-12,
             floor: float = FLOOR) -> IdentityResidual:
    """Dilation (virial) identity.

    Raises
    ------
    InvalidArgument
        If ``V`` or ``z`` is not real, or if ``u`` does not vanish (to
        ``support_tol`` relative) on the outer tenth of the grid.
    """
    d, sector, u, f = _setup(u, f, grid, d, sector)
    g = np.zeros(grid.n, dtype=complex) if g is None else np.asarray(g, dtype=complex)
    if complex(z).imag != 0:
        raise InvalidArgument("the dilation identity needs real z")
    if not V.is_real:
        raise InvalidArgument("the dilation identity needs a real potential")
    tail = np.abs(u[int(0.9 * grid.n):])
    if tail.size and tail.max() > support_tol * max(np.abs(u).max(), FLOOR):
        raise InvalidArgument("u must be compactly supported inside (0, R)")
    r = grid.nodes
    virial = radial_virial(V, grid).real
    lhs = 4 * delta_norm(u, grid, d, sector) ** 2 - float(np.sum(grid.quad_weights * virial * np.abs(u) ** 2))
    Au = 2 * r * centered_derivative(u, grid) + d * u
    rhs = _inner(f + g, Au, grid).real
    return IdentityResidual(Identity.A, lhs, rhs, grid.n, grid.R, d, sector.ell, floor)


def refinement_rate(hs, residuals) -> float:
    """Least-squares slope of ``log(residual)`` against ``log(h)``."""
    hs, res = np.asarray(hs, float), np.asarray(residuals, float)
    if np.any(res <= 0):
        return math.nan
    return float(np.polyfit(np.log(hs), np.log(res), 1)[0])


# ---------------------------------------------------------------------------
# Manufactured radial functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManufacturedRadial:
    """``u(r) = r^ell Q(r^2) exp(-lam r^2)`` with its exact Laplacians.

    Uses ``Delta_ell (r^ell F(t)) = r^ell (4 t F'' + 2 (d + 2 ell) F')`` with
    ``t = r^2``.  Writing ``F = P(t) exp(-lam t)`` keeps everything in
    polynomial arithmetic.
    """

    coeffs: tuple
    lam: complex
    ell: int
    d: int

    def _poly(self):
        return Polynomial(np.asarray(self.coeffs, dtype=complex))

    def _lap_poly(self, P):
        lam, d, ell = complex(self.lam), self.d, self.ell
        t = Polynomial([0, 1])
        dP, ddP = P.deriv(1), P.deriv(2)
        return 4 * t * (ddP - 2 * lam * dP + lam**2 * P) + 2 * (d + 2 * ell) * (dP - lam * P)

    def _eval(self, P, r):
        r = np.asarray(r, dtype=float)
        t = r**2
        return r**self.ell * P(t) * np.exp(-complex(self.lam) * t)

    def u(self, r):
        return self._eval(self._poly(), r)

    def laplacian(self, r):
        return self._eval(self._lap_poly(self._poly()), r)

    def bilaplacian(self, r):
        return self._eval(self._lap_poly(self._lap_poly(self._poly())), r)

    def dr(self, r):
        r = np.asarray(r, dtype=float)
        P, lam, t = self._poly(), complex(self.lam), r**2
        F = P(t) * np.exp(-lam * t)
        dF = (P.deriv(1)(t) - lam * P(t)) * np.exp(-lam * t)
        return self.ell * r ** (self.ell - 1) * F + r**self.ell * 2 * r * dF if self.ell else 2 * r * dF


def manufactured_suite(d: int = 5, count: int = 10, seed: int = 0) -> list[ManufacturedRadial]:
    """Reproducible family of smooth, rapidly decaying manufactured inputs."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        deg = int(rng.integers(0, 3))
        coeffs = tuple(complex(a, b) for a, b in rng.normal(size=(deg + 1, 2)))
        lam = complex(rng.uniform(0.8, 1.5), rng.uniform(-0.5, 0.5))
        out.append(ManufacturedRadial(coeffs, lam, k % 3, d))
    return out
