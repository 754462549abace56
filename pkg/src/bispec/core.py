"""Domain types, complex-plane geometry and closed-form constants.

Everything here is immutable and cheap.  Radial integrals omit the surface
factor |S^{d-1}|, which cancels in every ratio the package checks.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any

import numpy as np


class InvalidArgument(ValueError):
    """Raised for inputs outside an operation's domain."""


class DimensionError(InvalidArgument):
    """Raised when the space dimension is below 5."""


def require_dimension(d) -> int:
    """Validate the space dimension and return it as an int.

    Parameters
    ----------
    d : int
        Space dimension.

    Raises
    ------
    DimensionError
        If ``d`` is not an integer or ``d <= 4``.
    """
    if isinstance(d, bool) or int(d) != d:
        raise DimensionError(f"dimension must be an integer, got {d!r}")
    d = int(d)
    if d <= 4:
        raise DimensionError(f"requires d >= 5 (got d = {d})")
    return d


def _finite_complex(z) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidArgument(f"non-finite complex value {z!r}")
    return z


# ---------------------------------------------------------------------------
# Complex-plane geometry
# ---------------------------------------------------------------------------

class Region(str, Enum):
    SPOS = "SPos"
    SNEG = "SNeg"


def principal_sqrt(z) -> complex:
    """Principal square root with the cut on the negative real axis.

    On the cut the limit from ``Im z > 0`` is taken, so ``-1 -> 1j``.
    Signed zeros in the imaginary part are discarded for that reason.
    """
    z = _finite_complex(z)
    if z.imag == 0.0:
        if z.real >= 0.0:
            return complex(math.sqrt(z.real), 0.0)
        return complex(0.0, math.sqrt(-z.real))
    return cmath.sqrt(z)


def sign_plus(x: float) -> float:
    """Sign function with ``sign_plus(0) = +1``."""
    return -1.0 if x < 0 else 1.0


def gauge_wavenumber(z, zero_sign: float = 1.0) -> float:
    """Gauge wavenumber ``(Re sqrt z)^(1/2) * sgn(Im sqrt z)``.

    Parameters
    ----------
    z : complex
    zero_sign : float
        Value used for ``sgn(0)``; +1 selects the outgoing gauge on the
        positive real axis.
    """
    s = principal_sqrt(z)
    sgn = zero_sign if s.imag == 0.0 else math.copysign(1.0, s.imag)
    return math.sqrt(s.real) * sgn


def classify_region(z, delta: float) -> tuple[Region, bool]:
    """Return the half-plane region of ``z`` and membership in the cone
    ``|Im z| <= delta Re z``."""
    z = _finite_complex(z)
    if not delta > 0:
        raise InvalidArgument(f"cone aperture must be positive, got {delta!r}")
    region = Region.SPOS if z.real >= 0 else Region.SNEG
    return region, abs(z.imag) <= delta * z.real


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter with its derived quantities."""

    z: complex
    sqrt_z: complex
    region: Region
    gauge_k: float

    @classmethod
    def from_z(cls, z, zero_sign: float = 1.0) -> "SpectralPoint":
        z = _finite_complex(z)
        return cls(
            z=z,
            sqrt_z=principal_sqrt(z),
            region=Region.SPOS if z.real >= 0 else Region.SNEG,
            gauge_k=gauge_wavenumber(z, zero_sign),
        )


# ---------------------------------------------------------------------------
# Grids and sectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Offset uniform mesh ``r_i = (i + 1/2) h`` on ``(0, R)``.

    Attributes
    ----------
    n : int
        Number of nodes.
    R : float
        Truncation radius.
    d : int
        Space dimension; sets the measure ``r^(d-1) dr``.
    """

    n: int
    R: float
    d: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgument(f"n must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.R) and self.R > 0):
            raise InvalidArgument(f"R must be positive and finite, got {self.R!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "d", require_dimension(self.d))

    @property
    def h(self) -> float:
        return self.R / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        r = (np.arange(self.n) + 0.5) * self.h
        r.flags.writeable = False
        return r

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Weights ``h r_i^(d-1)`` of the measure ``r^(d-1) dr``."""
        w = self.h * self.nodes ** (self.d - 1)
        w.flags.writeable = False
        return w

    @cached_property
    def faces(self) -> np.ndarray:
        """Cell faces ``(j + 1) h``, the last one at ``R``."""
        rho = (np.arange(self.n) + 1.0) * self.h
        rho.flags.writeable = False
        return rho

    @cached_property
    def face_weights(self) -> np.ndarray:
        """Face quadrature weights; the face at ``R`` carries half a cell."""
        om = self.h * self.faces ** (self.d - 1)
        om[-1] *= 0.5
        om.flags.writeable = False
        return om

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.n * factor, self.R, self.d)

    def extended(self, factor: int = 2) -> "RadialGrid":
        """Same spacing, radius multiplied by ``factor``."""
        return RadialGrid(self.n * factor, self.R * factor, self.d)

    def descriptor(self) -> dict:
        return {"n": self.n, "R": self.R, "d": self.d}


@dataclass(frozen=True)
class AngularSector:
    """Spherical-harmonic sector of degree ``ell``."""

    ell: int
    d: int

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 0:
            raise InvalidArgument(f"ell must be a non-negative integer, got {self.ell!r}")
        object.__setattr__(self, "ell", int(self.ell))
        object.__setattr__(self, "d", require_dimension(self.d))

    @property
    def c_ell(self) -> float:
        return float(self.ell * (self.ell + self.d - 2))


def apply_gauge(u, z, grid: RadialGrid, zero_sign: float = 1.0) -> np.ndarray:
    """Multiply ``u`` by ``exp(-i k r)`` with the gauge wavenumber of ``z``."""
    u = np.asarray(u)
    if not np.all(np.isfinite(u)):
        raise InvalidArgument("non-finite values in u")
    k = gauge_wavenumber(z, zero_sign)
    return np.exp(-1j * k * grid.nodes) * u


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

def _bump_profile(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


def _bump_profile_dt(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    tm = t[m]
    out[m] = np.exp(1.0 - 1.0 / (1.0 - tm**2)) * (-2.0 * tm / (1.0 - tm**2) ** 2)
    return out


def _smooth_heaviside(s):
    """C-infinity transition from 0 (s <= 0) to 1 (s >= 1)."""
    s = np.asarray(s, dtype=float)

    def psi(x):
        out = np.zeros_like(x)
        m = x > 0
        out[m] = np.exp(-1.0 / x[m])
        return out

    a, b = psi(s), psi(1.0 - s)
    return a / (a + b)


def _smooth_heaviside_ds(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = (s > 0) & (s < 1)
    x = s[m]
    a, b = np.exp(-1.0 / x), np.exp(-1.0 / (1.0 - x))
    da, db = a / x**2, -b / (1.0 - x) ** 2
    out[m] = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return out


class PotentialKind(str, Enum):
    ZERO = "zero"
    RELLICH = "rellich"
    BUMP = "bump"
    STEP = "step"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class Potential:
    """Complex radial potential.

    Use the named constructors: :meth:`zero`, :meth:`rellich`, :meth:`bump`,
    :meth:`step` and :meth:`sampled`.
    """

    kind: PotentialKind
    params: tuple = ()
    values: Any = field(default=None, compare=False, repr=False)
    grid: Any = field(default=None, compare=False, repr=False)

    @classmethod
    def zero(cls) -> "Potential":
        return cls(PotentialKind.ZERO)

    @classmethod
    def rellich(cls, alpha) -> "Potential":
        """``alpha / r**4``."""
        return cls(PotentialKind.RELLICH, (_finite_complex(alpha),))

    @classmethod
    def bump(cls, height, center: float, width: float) -> "Potential":
        """``height * exp(1 - 1/(1 - t^2))`` for ``|t| < 1``, ``t = (r - center)/width``."""
        if not width > 0:
            raise InvalidArgument("bump width must be positive")
        if center - width < 0:
            raise InvalidArgument("bump support must lie in r >= 0")
        return cls(PotentialKind.BUMP, (_finite_complex(height), float(center), float(width)))

    @classmethod
    def step(cls, height, radius: float, smoothing: float = 0.0) -> "Potential":
        """``height`` on ``r < radius`` and 0 beyond.

        With ``smoothing > 0`` the drop happens smoothly on
        ``[radius - smoothing, radius]``.
        """
        if not radius > 0:
            raise InvalidArgument("step radius must be positive")
        if not (0 <= smoothing <= radius):
            raise InvalidArgument("step smoothing must lie in [0, radius]")
        return cls(PotentialKind.STEP, (_finite_complex(height), float(radius), float(smoothing)))

    @classmethod
    def sampled(cls, values, grid: RadialGrid) -> "Potential":
        v = np.array(values, dtype=complex)
        if v.shape != (grid.n,):
            raise InvalidArgument(f"sampled potential has {v.size} values, grid has {grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("sampled potential has non-finite values")
        v.flags.writeable = False
        return cls(PotentialKind.SAMPLED, (), v, grid)

    # -- evaluation -------------------------------------------------------
    def _check_sampled(self, r):
        if not (r.shape == self.grid.nodes.shape and np.array_equal(r, self.grid.nodes)):
            raise InvalidArgument("sampled potential can only be evaluated on its own grid")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k is PotentialKind.ZERO:
            return np.zeros(r.shape, dtype=complex)
        if k is PotentialKind.RELLICH:
            with np.errstate(divide="ignore", invalid="ignore"):
                return self.params[0] / r**4 + 0j
        if k is PotentialKind.BUMP:
            hgt, c, wd = self.params
            return hgt * _bump_profile((r - c) / wd) + 0j
        if k is PotentialKind.STEP:
            hgt, rad, eps = self.params
            if eps == 0:
                return np.where(r < rad, hgt, 0.0) + 0j
            return hgt * (1.0 - _smooth_heaviside((r - (rad - eps)) / eps)) + 0j
        self._check_sampled(r)
        return np.array(self.values)

    def derivative(self, r) -> np.ndarray | None:
        """Radial derivative ``V'(r)``; ``None`` when it is not a function
        (sampled values or a sharp step)."""
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k is PotentialKind.ZERO:
            return np.zeros(r.shape, dtype=complex)
        if k is PotentialKind.RELLICH:
            return -4.0 * self.params[0] / r**5 + 0j
        if k is PotentialKind.BUMP:
            hgt, c, wd = self.params
            return hgt * _bump_profile_dt((r - c) / wd) / wd + 0j
        if k is PotentialKind.STEP:
            hgt, rad, eps = self.params
            if eps == 0:
                return None
            return -hgt * _smooth_heaviside_ds((r - (rad - eps)) / eps) / eps + 0j
        return None

    @property
    def is_real(self) -> bool:
        if self.kind is PotentialKind.ZERO:
            return True
        if self.kind is PotentialKind.SAMPLED:
            return bool(np.all(np.imag(self.values) == 0))
        return complex(self.params[0]).imag == 0.0

    def scaled(self, c) -> "Potential":
        """Multiply the coupling by ``c``."""
        c = _finite_complex(c)
        if self.kind is PotentialKind.ZERO:
            return self
        if self.kind is PotentialKind.SAMPLED:
            return Potential.sampled(c * np.asarray(self.values), self.grid)
        return Potential(self.kind, (c * self.params[0],) + tuple(self.params[1:]))

    def conjugate(self) -> "Potential":
        if self.kind is PotentialKind.ZERO:
            return self
        if self.kind is PotentialKind.SAMPLED:
            return Potential.sampled(np.conj(self.values), self.grid)
        return Potential(self.kind, (complex(self.params[0]).conjugate(),) + tuple(self.params[1:]))

    def descriptor(self) -> dict:
        k = self.kind
        if k is PotentialKind.ZERO:
            return {"kind": "zero"}
        if k is PotentialKind.RELLICH:
            return {"kind": "rellich", "alpha": self.params[0]}
        if k is PotentialKind.BUMP:
            return {"kind": "bump", "height": self.params[0], "center": self.params[1],
                    "width": self.params[2]}
        if k is PotentialKind.STEP:
            return {"kind": "step", "height": self.params[0], "radius": self.params[1],
                    "smoothing": self.params[2]}
        return {"kind": "sampled", "n": int(self.values.size), "R": self.grid.R}


# ---------------------------------------------------------------------------
# Closed-form constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SharpConstants:
    """Sharp Hardy, Rellich and Hardy-Rellich constants in dimension ``d``."""

    d: int
    C_H: float
    C_R: float
    C_HR: float


def sharp_constants(d) -> SharpConstants:
    """``C_H = (d-2)^2/4``, ``C_R = d^2 (d-4)^2/16``, ``C_HR = d^2/4``."""
    d = require_dimension(d)
    return SharpConstants(d=d, C_H=(d - 2) ** 2 / 4, C_R=d**2 * (d - 4) ** 2 / 16, C_HR=d**2 / 4)


def weighted_hardy_constant(d, gamma: float) -> float:
    """Sharp constant ``(d - 2 + 2 gamma)^2 / 4`` of the weighted Hardy
    inequality ``int |x|^(2 gamma) |grad psi|^2 >= C int |x|^(2 gamma - 2) |psi|^2``."""
    d = require_dimension(d)
    return (d - 2 + 2 * gamma) ** 2 / 4


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    """Outcome of a theorem-level verification.

    ``passed`` is ``None`` when the hypothesis is unmet: the check is then
    informative only.  ``margin`` is ``bound - measured`` (non-negative
    means the inequality held).
    """

    name: str
    measured: float
    bound: float
    hypothesis_met: bool = True
    passed: bool | None = None
    trend: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed is None and self.hypothesis_met:
            self.passed = bool(self.measured <= self.bound)

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "margin": self.margin,
            "hypothesis_met": self.hypothesis_met,
            "passed": self.passed,
            "trend": self.trend,
            "details": self.details,
        }


class ConvergenceError(RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    Attributes
    ----------
    best : object
        Last iterate or best estimate available.
    residual : float
        Residual or relative change at exit.
    """

    def __init__(self, message, best=None, residual=math.nan):
        super().__init__(message)
        self.best = best
        self.residual = residual
