"""Resolvent solves, weighted resolvent norms and a priori estimate checks.

Two solution concepts are used:

* Navier-truncated solves of ``(H - z) u = f`` on ``(0, R)``, for
  ``Re z < 0`` and off the real axis;
* radiating solves for ``Re z >= 0``, through the factorization
  ``Delta^2 - z = (Delta - a)(Delta + a)`` with ``a = sqrt z`` and exact
  exterior closures (Hankel for the outgoing factor, Macdonald for the
  decaying one).  These approximate the whole-space solution selected by
  the limiting absorption principle, which the truncated Navier problem
  cannot do on the positive real axis.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    AngularSector,
    CheckReport,
    ConvergenceError,
    InvalidArgument,
    Potential,
    RadialGrid,
    SpectralPoint,
    gauge_wavenumber,
    principal_sqrt,
    require_dimension,
    sharp_constants,
)
from .discretize import (
    BandedLU,
    BandedOperator,
    BoundaryConditions,
    NEAR_SINGULAR,
    NearSingular,
    build_hamiltonian,
    decaying_log_derivative,
    delta_norm,
    laplacian_matrix,
    outgoing_log_derivative,
    potential_values,
    weighted_norm,
)
from .inequalities import nsa_constant, repulsivity_coefficient, sa_constants, smallness_coefficient

SLACK = 0.02


def bump_source(center: float = 2.0, width: float = 1.0, amplitude: complex = 1.0) -> Callable:
    """Smooth compactly supported right side ``amplitude * exp(1 - 1/(1 - t^2))``."""
    def f(r):
        t = (np.asarray(r, dtype=float) - center) / width
        out = np.zeros(t.shape, dtype=complex)
        m = np.abs(t) < 1
        out[m] = amplitude * np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
        return out
    return f


def _sample(f, grid: RadialGrid) -> np.ndarray:
    if callable(f):
        return np.asarray(f(grid.nodes), dtype=complex)
    f = np.asarray(f, dtype=complex)
    if f.shape != (grid.n,):
        raise InvalidArgument(f"right side has shape {f.shape}, grid has {grid.n} nodes")
    return f


def _finite(f):
    if not np.all(np.isfinite(f)):
        raise InvalidArgument("right side has non-finite values")


# ---------------------------------------------------------------------------
# Truncated (Navier) solves
# ---------------------------------------------------------------------------

@dataclass
class ResolventSolve:
    """Solution of ``(H - z) u = f`` with its diagnostics.

    ``backward_residual`` is the normwise backward error
    ``||r|| / (||H - z|| ||u|| + ||f||)``; ``relative_residual`` is
    ``||r|| / ||f||``.  All norms are weighted.
    """

    z: SpectralPoint
    f: np.ndarray
    u: np.ndarray
    condition_flag: float
    backward_residual: float
    relative_residual: float = math.nan


def factor_shifted(H: BandedOperator, z, max_condition: float = NEAR_SINGULAR) -> BandedLU:
    """Banded LU of the symmetrized ``H - z``; its 1-norm condition is the
    condition in the weighted space."""
    return BandedLU(H.symmetrized_operator().shifted(z), max_condition=max_condition)


def solve_resolvent(H: BandedOperator, z, f, max_condition: float = NEAR_SINGULAR,
                    lu: BandedLU | None = None) -> ResolventSolve:
    """Solve ``(H - z) u = f`` by banded LU.

    Raises
    ------
    NearSingular
        When the condition estimate exceeds ``max_condition``.
    """
    pt = SpectralPoint.from_z(z)
    f = _sample(f, H.grid)
    _finite(f)
    Hz = H.symmetrized_operator().shifted(pt.z)
    lu = lu or BandedLU(Hz, max_condition=max_condition)
    s = np.sqrt(H.grid.quad_weights)
    u = lu.solve(s * f) / s
    num = weighted_norm(H @ u - pt.z * u - f, H.grid)
    nf = weighted_norm(f, H.grid)
    # the symmetrized matrix is symmetric up to the shift, so its 1-norm bounds the 2-norm
    nA = float(np.abs(Hz.ab).sum(axis=0).max())
    den = nA * weighted_norm(u, H.grid) + nf
    return ResolventSolve(pt, f, u, lu.condition_flag, num / den if den else 0.0,
                          num / nf if nf else 0.0)


def weighted_resolvent_norm(H: BandedOperator, z, tol: float = 1e-6, maxiter: int = 300,
                            seed: int = 0, max_condition: float = NEAR_SINGULAR, return_info: bool = False):
    """Norm of ``g -> r^-2 (H - z)^-1 (r^-2 g)`` in the weighted ``L^2``.

    Power iteration on ``T^H T``; each step costs one solve and one adjoint
    solve with the same factorization.
    """
    lu = factor_shifted(H, z, max_condition)
    D = H.grid.nodes ** -2.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(H.n) + 1j * rng.standard_normal(H.n)
    x /= np.linalg.norm(x)
    lam_old, lam = 0.0, 0.0
    for it in range(1, maxiter + 1):
        y = D * lu.solve(D * x)
        y = D * lu.solve(D * y, adjoint=True)
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            break
        x = y / lam
        if abs(lam - lam_old) <= tol * lam:
            break
        lam_old = lam
    else:
        raise ConvergenceError("power iteration stagnated", best=math.sqrt(lam),
                               residual=abs(lam - lam_old) / lam)
    val = math.sqrt(lam)
    if return_info:
        return val, {"iterations": it, "condition_flag": lu.condition_flag}
    return val


@dataclass
class SweepResult:
    """Weighted resolvent norms over a grid of spectral parameters."""

    z_grid: np.ndarray
    norms: np.ndarray
    condition_flags: np.ndarray
    z_used: np.ndarray
    n: int
    R: float
    ell: int
    bound: float | None = None
    failures: list = field(default_factory=list)

    @property
    def sup_norm(self) -> float:
        ok = np.isfinite(self.norms)
        return float(self.norms[ok].max()) if np.any(ok) else math.nan

    def rows(self) -> list[dict]:
        return [{"re_z": float(z.real), "im_z": float(z.imag), "norm": float(v),
                 "condition_flag": float(c), "sector": self.ell, "R": self.R, "n": self.n}
                for z, v, c in zip(self.z_used, self.norms, self.condition_flags)]

    def to_dict(self) -> dict:
        return {"sup_norm": self.sup_norm, "bound": self.bound, "n": self.n, "R": self.R,
                "sector": self.ell, "points": len(self.z_grid), "failures": self.failures}


def _norm_with_retry(H, z, tol, max_condition, seed=0):
    """Norm at ``z``; on a near-singular factorization retry once at
    ``z + 1e-3 |z| i sgn(Im z)``.  Returns ``(norm, cond, z_used, error)``."""
    z = complex(z)
    tries = [z, z + 1e-3 * abs(z) * 1j * (-1.0 if z.imag < 0 else 1.0)]
    err = None
    for zz in tries:
        try:
            val, info = weighted_resolvent_norm(H, zz, tol=tol, seed=seed,
                                                max_condition=max_condition, return_info=True)
            return val, info["condition_flag"], zz, None
        except (NearSingular, ConvergenceError) as exc:
            err = exc
    cond = getattr(err, "condition_flag", math.nan)
    return math.nan, cond, z, f"{type(err).__name__}: {err}"


def sweep_resolvent_norm(H: BandedOperator, z_grid, tol: float = 1e-6,
                         max_condition: float = NEAR_SINGULAR, bound: float | None = None,
                         jobs: int = 1, seed: int = 0) -> SweepResult:
    """:func:`weighted_resolvent_norm` over ``z_grid``.

    Failures are recorded per point; the sweep always completes.
    """
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=complex))

    def one(z):
        return _norm_with_retry(H, z, tol, max_condition, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(one, z_grid))
    else:
        out = [one(z) for z in z_grid]
    norms = np.array([o[0] for o in out], dtype=float)
    conds = np.array([o[1] for o in out], dtype=float)
    used = np.array([o[2] for o in out], dtype=complex)
    failures = [{"re_z": float(z.real), "im_z": float(z.imag), "error": o[3]}
                for z, o in zip(z_grid, out) if o[3] is not None]
    return SweepResult(z_grid, norms, conds, used, H.n, H.grid.R, H.sector.ell, bound, failures)


def all_quadrant_grid(n_modulus: int = 10, n_angle: int = 10, rmin: float = 0.01,
                      rmax: float = 100.0) -> np.ndarray:
    """Log-spaced moduli times angles ``2 pi (k + 1/2)/n_angle``.

    The half-step offset keeps every point off the real axis.
    """
    mods = np.geomspace(rmin, rmax, n_modulus)
    angles = 2 * np.pi * (np.arange(n_angle) + 0.5) / n_angle
    return (mods[:, None] * np.exp(1j * angles)[None, :]).ravel()


def left_half_plane_grid(n_modulus: int = 10, n_angle: int = 5, rmin: float = 0.01,
                         rmax: float = 100.0) -> np.ndarray:
    """Points with ``Re z < 0``: angles ``pi/2 + pi (k + 1/2)/n_angle``."""
    mods = np.geomspace(rmin, rmax, n_modulus)
    angles = np.pi / 2 + np.pi * (np.arange(n_angle) + 0.5) / n_angle
    return (mods[:, None] * np.exp(1j * angles)[None, :]).ravel()


# ---------------------------------------------------------------------------
# Radiating solves
# ---------------------------------------------------------------------------

def solve_helmholtz(kappa, f, grid: RadialGrid, sector: AngularSector | None = None,
                    sign: int = +1) -> np.ndarray:
    """Whole-space-like solution of ``(Delta + sign kappa) u = f``.

    ``sign = +1`` closes with the outgoing (radiating) exterior solution,
    ``sign = -1`` with the decaying one.
    """
    sector = sector or AngularSector(0, grid.d)
    f = _sample(f, grid)
    _finite(f)
    kappa = complex(kappa)
    if sign > 0:
        beta = outgoing_log_derivative(kappa, grid.d, sector.ell, grid.R)
    else:
        beta = decaying_log_derivative(kappa, grid.d, sector.ell, grid.R)
    L = laplacian_matrix(grid, sector, BoundaryConditions.robin(beta))
    A = (L + sign * kappa * sp.identity(grid.n, format="csr")).tocsc()
    return spla.spsolve(A, f)


def solve_radiating(z, f, grid: RadialGrid, V: Potential | None = None,
                    sector: AngularSector | None = None):
    """Radiating solution of ``(Delta^2 + V - z) u = f`` for ``z != 0``.

    With ``w = Delta u`` and ``a = sqrt z`` the pair ``p = u - w/a``,
    ``q = u + w/a`` satisfies::

        (Delta + a) p = (-f + V u)/a,   (Delta - a) q = (f - V u)/a,

    closed with the outgoing and decaying exterior solutions respectively.

    Returns
    -------
    u, w : ndarray
        The solution and its Laplacian.
    """
    sector = sector or AngularSector(0, grid.d)
    z = complex(z)
    if z == 0:
        raise InvalidArgument("the radiating factorization needs z != 0")
    f = _sample(f, grid)
    _finite(f)
    a = principal_sqrt(z)
    d, ell, R = grid.d, sector.ell, grid.R
    Lp = laplacian_matrix(grid, sector, BoundaryConditions.robin(outgoing_log_derivative(a, d, ell, R)))
    Lq = laplacian_matrix(grid, sector, BoundaryConditions.robin(decaying_log_derivative(a, d, ell, R)))
    I = sp.identity(grid.n, format="csr")
    v = np.zeros(grid.n) if V is None else potential_values(V, grid)
    if not np.any(v):
        p = spla.spsolve((Lp + a * I).tocsc(), -f / a)
        q = spla.spsolve((Lq - a * I).tocsc(), f / a)
    else:
        Vd = sp.diags(v / (2 * a))
        A = sp.bmat([[Lp + a * I - Vd, -Vd], [Vd, Lq - a * I + Vd]]).tocsc()
        x = spla.spsolve(A, np.concatenate([-f / a, f / a]))
        p, q = x[: grid.n], x[grid.n:]
    return (p + q) / 2, a * (q - p) / 2


def solve_whole_space(z, f, grid: RadialGrid, V: Potential | None = None,
                      sector: AngularSector | None = None):
    """Solution and Laplacian: Navier truncation for ``Re z < 0`` or
    ``z = 0``, radiating closure otherwise."""
    sector = sector or AngularSector(0, grid.d)
    z = complex(z)
    if z.real < 0 or z == 0:
        H = build_hamiltonian(grid.d, sector, grid, V or Potential.zero())
        u = solve_resolvent(H, z, f, max_condition=math.inf).u
        return u, laplacian_matrix(grid, sector) @ u
    return solve_radiating(z, f, grid, V, sector)


# ---------------------------------------------------------------------------
# Gauged functionals
# ---------------------------------------------------------------------------

def gauged_gradient_functional(u, grid: RadialGrid, k: float) -> float:
    """``sum_j ||grad (d_j u)^-||^2`` for radial ``u``, gauge ``exp(-i k r)``.

    Uses the radial identity ``int [(d-1)|g|^2/r^2 + |(e^{-ikr} g)'|^2] r^(d-1) dr``
    with ``g = u'`` taken at the interior faces and its derivative at the
    nodes between them.
    """
    u = np.asarray(u)
    h, d = grid.h, grid.d
    rho = grid.faces[:-1]
    g = np.diff(u) / h
    first = (d - 1) * np.sum(h * rho ** (d - 3) * np.abs(g) ** 2)
    G = np.exp(-1j * k * rho) * g
    second = np.sum(grid.quad_weights[1:-1] * np.abs(np.diff(G) / h) ** 2)
    return float(first + second)


def gauged_gradient_norm(u, grid: RadialGrid, k: float, p: float = 0.0) -> float:
    """``|| r^p grad (e^{-ikr} u) ||`` at the interior faces."""
    u = np.asarray(u)
    rho = grid.faces[:-1]
    U = np.exp(-1j * k * grid.nodes) * u
    g = np.diff(U) / grid.h
    return float(np.sqrt(np.sum(grid.h * rho ** (grid.d - 1 + 2 * p) * np.abs(g) ** 2)))


# ---------------------------------------------------------------------------
# A priori checks
# ---------------------------------------------------------------------------

def _two_radii(grid: RadialGrid, r_doubling: bool, f):
    grids = [grid]
    if r_doubling and callable(f):
        grids.append(grid.extended(2))
    return grids


def apriori_check_neg(H: BandedOperator, z, f, V: Potential | None = None,
                      slack: float = SLACK) -> CheckReport:
    """``||Delta u|| <= c ||r^2 f||`` for ``Re z < 0``.

    ``c = C_R^{-1/2}`` for the free operator and ``c_{a,d}`` with ``a`` the
    smallness coefficient of ``V`` otherwise; the bound carries ``slack``.
    """
    z = complex(z)
    if not z.real < 0:
        raise InvalidArgument("requires Re z < 0")
    V = V or Potential.zero()
    grid, sector, d = H.grid, H.sector, H.d
    a = smallness_coefficient(V, d, grid, sector)
    c = sharp_constants(d)
    hyp = True
    if a == 0.0:
        const = 1 / math.sqrt(c.C_R)
    else:
        try:
            const = nsa_constant(d, a)
        except InvalidArgument:
            const, hyp = math.inf, False
    sol = solve_resolvent(H, z, f, max_condition=math.inf)
    F = weighted_norm(sol.f, grid, 2)
    ratio = delta_norm(sol.u, grid, d, sector) / F if F else 0.0
    return CheckReport("apriori_neg", ratio, const * (1 + slack), hypothesis_met=hyp,
                       details={"z": z, "a": a, "constant": const, "n": grid.n, "R": grid.R,
                                "sector": sector.ell, "backward_residual": sol.backward_residual})


def apriori_quantities(z, f, grid: RadialGrid) -> dict:
    """Radiating free solve and the gauged/ungauged gradient functionals."""
    z = complex(z)
    u, w = solve_whole_space(z, f, grid)
    k = gauge_wavenumber(z)
    fv = _sample(f, grid)
    return {"gauged": gauged_gradient_functional(u, grid, k),
            "ungauged": gauged_gradient_functional(u, grid, 0.0),
            "F": weighted_norm(fv, grid, 2), "k": k, "delta_norm": weighted_norm(w, grid)}


def apriori_check_pos(z, f, grid: RadialGrid, r_doubling: bool = True) -> CheckReport:
    """Quadratic a priori inequality for ``Re z >= 0`` (free operator, radial data).

    With ``X = ||grad (d_j u)^-||^2`` (one direction; all ``d`` are equal for
    radial ``u``) and ``F = ||r^2 f||`` checks
    ``X <= A F X^(1/2) + B F^(3/2) X^(1/4)``,
    ``A = 4d(d-3)/((d-2)(d-4))``, ``B = 4/((d-4) sqrt((d-2)(d-4)))``.
    The same inequality for the full sum is recorded in ``details``.
    """
    z = complex(z)
    if z.real < 0:
        raise InvalidArgument("requires Re z >= 0")
    d = grid.d
    A = 4 * d * (d - 3) / ((d - 2) * (d - 4))
    B = 4 / ((d - 4) * math.sqrt((d - 2) * (d - 4)))
    out = []
    for g in _two_radii(grid, r_doubling, f):
        q = apriori_quantities(z, f, g)
        S, F = q["gauged"], q["F"]
        X = S / d
        out.append({"R": g.R, "n": g.n, "X": X, "rhs": A * F * X**0.5 + B * F**1.5 * X**0.25,
                    "sum": S, "sum_rhs": A * F * S**0.5 + B * F**1.5 * S**0.25,
                    "ungauged": q["ungauged"], "F": F, "k": q["k"],
                    "uniform_ratio": math.sqrt(d * S) / F if F else 0.0})
    first = out[0]
    trend = {}
    if len(out) > 1:
        trend = {"gauged_R": out[0]["sum"], "gauged_2R": out[1]["sum"],
                 "ungauged_R": out[0]["ungauged"], "ungauged_2R": out[1]["ungauged"]}
    return CheckReport("apriori_pos", first["X"], first["rhs"], trend=trend,
                       details={"z": z, "per_radius": out,
                                "sum_form_holds": all(o["sum"] <= o["sum_rhs"] for o in out)})


def gauge_contrast(z, f, grid: RadialGrid, grow_factor: float = 1.5,
                   stable_tol: float = 0.10) -> CheckReport:
    """Ungauged functional grows under R-doubling while the gauged one is stable.

    ``measured`` is the relative change of the gauged functional; it must
    stay below ``stable_tol`` and the ungauged one must grow by at least
    ``grow_factor`` for the check to pass.
    """
    q1 = apriori_quantities(z, f, grid)
    q2 = apriori_quantities(z, f, grid.extended(2))
    change = abs(q2["gauged"] / q1["gauged"] - 1)
    growth = q2["ungauged"] / q1["ungauged"]
    rep = CheckReport("gauge_contrast", change, stable_tol,
                      trend={"gauged_R": q1["gauged"], "gauged_2R": q2["gauged"],
                             "ungauged_R": q1["ungauged"], "ungauged_2R": q2["ungauged"]},
                      details={"z": complex(z), "k": q1["k"], "ungauged_growth": growth,
                               "grow_factor": grow_factor, "n": grid.n, "R": grid.R})
    rep.passed = bool(change <= stable_tol and growth >= grow_factor)
    return rep


def schrodinger_checks(kappa, f, grid: RadialGrid, slack: float = SLACK) -> list[CheckReport]:
    """Gauged gradient bound for ``(Delta + kappa) u = f`` and the weighted
    gradient bound for ``(Delta - kappa) v = f``.

    Requires ``Re kappa >= |Im kappa|``.  The gauge is
    ``exp(-i (Re kappa)^(1/2) sgn(Im kappa) r)``.
    """
    kappa = complex(kappa)
    d = grid.d
    fv = _sample(f, grid)
    hyp = kappa.real >= abs(kappa.imag) and kappa != 0
    k = math.sqrt(max(kappa.real, 0.0)) * (-1.0 if kappa.imag < 0 else 1.0)
    Fx = weighted_norm(fv, grid, 1)
    F2 = weighted_norm(fv, grid, 2)
    if not hyp:
        return [CheckReport("schrodinger_gauged", math.nan, math.nan, hypothesis_met=False,
                            details={"kappa": kappa}),
                CheckReport("schrodinger_weighted", math.nan, math.nan, hypothesis_met=False,
                            details={"kappa": kappa})]
    u = solve_helmholtz(kappa, fv, grid, sign=+1)
    X = gauged_gradient_norm(u, grid, k)
    rhs = 2 * d * (d - 3) / (d - 2) * Fx * X + math.sqrt(2) / math.sqrt(d - 2) * Fx**1.5 * X**0.5
    r1 = CheckReport("schrodinger_gauged", X**2, rhs,
                     details={"kappa": kappa, "k": k, "n": grid.n, "R": grid.R})
    v = solve_helmholtz(kappa, fv, grid, sign=-1)
    ratio = gauged_gradient_norm(v, grid, 0.0, p=1) / F2 if F2 else 0.0
    r2 = CheckReport("schrodinger_weighted", ratio, 2 / (d - 4) * (1 + slack),
                     details={"kappa": kappa, "constant": 2 / (d - 4), "n": grid.n, "R": grid.R})
    return [r1, r2]


def potential_chain_check(V: Potential, d, grid: RadialGrid, psi, z=0.0,
                          sector: AngularSector | None = None) -> list[CheckReport]:
    """``||r^2 V psi||`` against the gauged-gradient and Laplacian chains.

    ``a`` is the discrete smallness coefficient of ``V``.  For radial ``psi``
    the sum over directions equals ``sqrt(d S)`` with ``S`` the gauged
    functional.
    """
    d = require_dimension(d)
    sector = sector or AngularSector(0, d)
    c = sharp_constants(d)
    a = smallness_coefficient(V, d, grid, sector)
    p = _sample(psi, grid)
    lhs = weighted_norm(potential_values(V, grid) * p, grid, 2)
    S = gauged_gradient_functional(p, grid, gauge_wavenumber(z))
    r1 = CheckReport("potential_chain_gradient", lhs, a / math.sqrt(c.C_H) * math.sqrt(d * S),
                     details={"a": a, "z": complex(z)})
    r2 = CheckReport("potential_chain_laplacian", lhs,
                     a / math.sqrt(c.C_HR) * delta_norm(p, grid, d, sector), details={"a": a})
    return [r1, r2]


def sa_apriori_check(V: Potential, z: float, f, grid: RadialGrid, slack: float = SLACK,
                     r_doubling: bool = True) -> list[CheckReport]:
    """Self-adjoint bounds ``||Delta u|| <= c~ ||r^2 f||`` and
    ``||u/r^2|| <= c ||r^2 f||`` for real ``V`` and real ``z``.

    ``a`` is the repulsivity coefficient; the hypothesis is ``a < 1``.
    Each report carries the ratios at ``R`` and ``2R`` in ``trend``; the
    measured value is the one at ``R``.
    """
    z = complex(z)
    if z.imag != 0:
        raise InvalidArgument("the self-adjoint track needs real z")
    if not V.is_real:
        raise InvalidArgument("the self-adjoint track needs a real potential")
    d = grid.d
    a = repulsivity_coefficient(V, d, grid)
    hyp = a < 1
    c, ct = sa_constants(d, a) if hyp else (math.inf, math.inf)
    ratios = []
    for g in _two_radii(grid, r_doubling, f):
        u, w = solve_whole_space(z, f, g, V)
        F = weighted_norm(_sample(f, g), g, 2)
        ratios.append((weighted_norm(w, g) / F, weighted_norm(u, g, -2) / F))
    tr_d = {"R": ratios[0][0]} | ({"2R": ratios[1][0]} if len(ratios) > 1 else {})
    tr_u = {"R": ratios[0][1]} | ({"2R": ratios[1][1]} if len(ratios) > 1 else {})
    det = {"z": z.real, "a": a, "n": grid.n, "R": grid.R, "potential": V.descriptor()}
    return [CheckReport("sa_delta", ratios[0][0], ct * (1 + slack), hypothesis_met=hyp,
                        trend=tr_d, details=det | {"constant": ct}),
            CheckReport("sa_weighted", ratios[0][1], c * (1 + slack), hypothesis_met=hyp,
                        trend=tr_u, details=det | {"constant": c})]
