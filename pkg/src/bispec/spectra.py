"""Eigenvalues of the truncated Hamiltonian and enclosure/absence verdicts.

A truncated problem always has a dense discrete spectrum close to
``[0, inf)``.  Genuine point spectrum is separated from it by doubling the
truncation radius at fixed spacing: artifact eigenvalues drift toward the
half-line, persistent ones stay put.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse.linalg as spla

from .core import (
    AngularSector,
    CheckReport,
    ConvergenceError,
    InvalidArgument,
    Potential,
    RadialGrid,
    require_dimension,
)
from .discretize import BandedLU, BandedOperator, NearSingular, build_hamiltonian
from .inequalities import (
    admissibility,
    cone_threshold,
    rellich_smallness_coefficient,
)

DENSE_LIMIT = 1500


@dataclass
class EigenResult:
    """Eigenvalues with their residuals ``||H v - lam v|| / ||v||`` (weighted norm)."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    method: str
    ell: int
    grid: dict
    scale: float
    arnoldi: dict = field(default_factory=dict)


def _spectral_scale(Hs) -> float:
    """Cheap upper bound on ``||H||``: the largest absolute row sum."""
    return float(abs(Hs).sum(axis=1).max())


def eigenvalues(H: BandedOperator, k: int | None = None, shift: complex = 0.0,
                method: str = "auto", ncv: int | None = None, max_restarts: int = 30,
                tol: float = 1e-10) -> EigenResult:
    """Eigenvalues of a banded operator.

    Parameters
    ----------
    H : BandedOperator
    k : int, optional
        Number of eigenvalues nearest ``shift``.  ``None`` asks for all
        (dense only).
    shift : complex
    method : {'auto', 'dense', 'arnoldi'}
        ``dense`` is LAPACK QR on the symmetrized matrix (``n <= 1500``);
        ``arnoldi`` is shift-invert ARPACK with the banded LU as inverse.
    ncv : int, optional
        Krylov dimension, default ``max(4 k, 20)``.
    max_restarts : int
    tol : float

    Raises
    ------
    NearSingular
        If the shift is an eigenvalue to working precision.
    ConvergenceError
        If ARPACK does not converge; ``best`` holds the converged part.
    """
    n = H.n
    Hs = H.symmetrized()
    scale = _spectral_scale(Hs)
    if k is not None and not 1 <= k <= n:
        raise InvalidArgument(f"k must lie in [1, {n}]")
    if method == "auto":
        method = "dense" if (k is None or n <= 400) else "arnoldi"
    if method == "dense":
        if n > DENSE_LIMIT:
            raise InvalidArgument(f"dense eigensolve limited to n <= {DENSE_LIMIT}")
        A = Hs.toarray()
        if H.is_real():
            lam, vecs = sl.eigh(A.real)
            lam = lam.astype(complex)
        else:
            lam, vecs = sl.eig(A)
        if k is not None:
            idx = np.argsort(np.abs(lam - shift), kind="stable")[:k]
            lam, vecs = lam[idx], vecs[:, idx]
        info = {}
    elif method == "arnoldi":
        if k is None:
            raise InvalidArgument("arnoldi needs k")
        shift = complex(shift)
        lu = BandedLU(H.symmetrized_operator().shifted(shift), max_condition=math.inf)
        opinv = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(np.ravel(x)), dtype=complex)
        ncv = min(n, ncv or max(4 * k, 20))
        rng = np.random.default_rng(0)
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        try:
            lam, vecs = spla.eigs(Hs.astype(complex), k=k, sigma=shift, OPinv=opinv, ncv=ncv,
                                  maxiter=max_restarts * ncv, tol=tol, v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError("Arnoldi did not converge", best=exc.eigenvalues) from exc
        info = {"shift": shift, "krylov_dim": ncv, "max_restarts": max_restarts, "tol": tol}
    else:
        raise InvalidArgument(f"unknown method {method!r}")
    res = np.linalg.norm(Hs @ vecs - vecs * lam, axis=0) / np.linalg.norm(vecs, axis=0)
    order = np.lexsort((lam.imag, lam.real))
    return EigenResult(lam[order], res[order], "DenseQR" if method == "dense" else
                       "ShiftInvertArnoldi", H.sector.ell, H.grid.descriptor(), scale, info)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def distance_to_half_line(lam) -> np.ndarray:
    """Distance of each eigenvalue to ``[0, inf)``."""
    lam = np.asarray(lam, dtype=complex)
    return np.where(lam.real >= 0, np.abs(lam.imag), np.abs(lam))


def resolution_limit(grid: RadialGrid, window: float = 1e-3) -> float:
    """Largest ``|lam|`` treated as resolved: ``window * (4/h^2)^2``.

    ``(4/h^2)^2`` bounds the free discrete bilaplacian; eigenvalues near it
    are grid-scale modes (for example of a singular potential pinned at the
    first node) and say nothing about the continuum operator.
    """
    return window * (4.0 / grid.h**2) ** 2


@dataclass
class AbsenceVerdict:
    """Candidate off-axis eigenvalues and their behaviour under R-doubling."""

    candidate_eigenvalues: np.ndarray
    sectors: np.ndarray
    distance_R: np.ndarray
    distance_2R: np.ndarray
    matched_2R: np.ndarray
    persistent: np.ndarray
    R: float
    n: int
    d: int
    hypothesis_met: bool
    potential: dict = field(default_factory=dict)
    admissibility: dict = field(default_factory=dict)

    @property
    def persistent_eigenvalues(self) -> np.ndarray:
        return self.candidate_eigenvalues[self.persistent]

    @property
    def passed(self) -> bool | None:
        """``True`` when no persistent candidate exists; ``None`` if the
        hypothesis is unmet (the verdict is then informative only)."""
        if not self.hypothesis_met:
            return None
        return not bool(np.any(self.persistent))

    def to_dict(self) -> dict:
        return {
            "R": self.R, "n": self.n, "d": self.d,
            "hypothesis_met": self.hypothesis_met, "passed": self.passed,
            "potential": self.potential, "admissibility": self.admissibility,
            "candidates": [
                {"eigenvalue": complex(l), "sector": int(s), "distance_R": float(a),
                 "distance_2R": float(b), "matched_2R": complex(m), "persistent": bool(p)}
                for l, s, a, b, m, p in zip(self.candidate_eigenvalues, self.sectors,
                                            self.distance_R, self.distance_2R,
                                            self.matched_2R, self.persistent)
            ],
        }


def _all_or_near(H, method, k, shift):
    if method == "dense":
        return eigenvalues(H, method="dense").eigenvalues
    for sh in (shift, shift + 1e-6 * (1 + abs(shift)) * 1j):
        try:
            return eigenvalues(H, k=min(k, H.n - 2), shift=sh, method="arnoldi").eigenvalues
        except NearSingular:
            continue
    raise NearSingular("shift coincides with an eigenvalue", math.inf)


def persistent_candidates(V: Potential, d, n: int, R: float, sectors=(0, 1, 2, 3),
                          tol: float = 1e-3, drift: float = 1.5, window: float = 1e-3,
                          method: str = "auto", arnoldi_k: int = 80):
    """Off-axis eigenvalues at radius ``R`` and whether they persist at ``2R``.

    Returns ``(lam, sector, dist_R, dist_2R, matched, persistent)`` arrays.
    A candidate has distance to ``[0, inf)`` above ``tol`` and modulus
    below :func:`resolution_limit`.  It is persistent when its nearest
    eigenvalue at ``2R`` (same spacing) has distance above ``dist_R/drift``.

    ``method='dense'`` uses full spectra; ``'arnoldi'`` the ``arnoldi_k``
    eigenvalues nearest 0 at ``R`` and a few around each candidate at
    ``2R``.  ``'auto'`` picks dense while ``2n <= 1500``.
    """
    d = require_dimension(d)
    if method == "auto":
        method = "dense" if 2 * n <= DENSE_LIMIT else "arnoldi"
    g1 = RadialGrid(n, R, d)
    g2 = g1.extended(2)
    cap = resolution_limit(g1, window)
    out = [[] for _ in range(6)]
    for ell in sectors:
        s = AngularSector(ell, d)
        e1 = _all_or_near(build_hamiltonian(d, s, g1, V), method, arnoldi_k, 0.0)
        d1 = distance_to_half_line(e1)
        keep = (d1 > tol) & (np.abs(e1) <= cap)
        if not np.any(keep):
            continue
        H2 = build_hamiltonian(d, s, g2, V)
        e2 = _all_or_near(H2, "dense", 0, 0.0) if method == "dense" else None
        for lam, dist in zip(e1[keep], d1[keep]):
            near = e2 if e2 is not None else _all_or_near(H2, "arnoldi", 4, complex(lam))
            mu = near[np.argmin(np.abs(near - lam))]
            d2 = float(distance_to_half_line(mu))
            for lst, val in zip(out, (lam, ell, dist, d2, mu, d2 > dist / drift)):
                lst.append(val)
    lam, sec, d1, d2, mu, pers = out
    return (np.array(lam, dtype=complex), np.array(sec, dtype=int), np.array(d1, dtype=float),
            np.array(d2, dtype=float), np.array(mu, dtype=complex), np.array(pers, dtype=bool))


def check_total_absence(V: Potential, d, n: int, R: float, sectors=(0, 1, 2, 3),
                        tol: float = 1e-3, drift: float = 1.5, window: float = 1e-3,
                        method: str = "auto", candidates=None) -> AbsenceVerdict:
    """Look for persistent eigenvalues off ``[0, inf)``.

    The hypothesis is the total-absence smallness condition, evaluated by
    :func:`bispec.inequalities.admissibility` at ``R`` and ``2R``.
    """
    adm = admissibility(V, d, n, R)
    if candidates is None:
        candidates = persistent_candidates(V, d, n, R, sectors, tol, drift, window, method)
    lam, sec, d1, d2, mu, pers = candidates
    return AbsenceVerdict(lam, sec, d1, d2, mu, pers, R, n, d, adm.admissible,
                          V.descriptor(), adm.to_dict())


def check_cone_enclosure(V: Potential, d, delta: float, n: int, R: float, sectors=(0, 1, 2, 3),
                         angular_tol: float = 1e-3, tol: float = 1e-3, drift: float = 1.5,
                         window: float = 1e-3, method: str = "auto",
                         candidates=None) -> CheckReport:
    """Check that persistent eigenvalues lie in ``|Im z| <= delta Re z``.

    ``measured`` is the worst angular excess ``(|Im lam| - delta Re lam)/|lam|``
    over persistent eigenvalues (``-inf`` when there are none); the bound is
    ``angular_tol``.  The hypothesis compares the Rellich-type smallness
    coefficient (max over sectors, at ``R`` and ``2R``) with the cone threshold.
    ``candidates`` may pass a precomputed :func:`persistent_candidates` result.
    """
    d = require_dimension(d)
    g1 = RadialGrid(n, R, d)
    a_R = max(rellich_smallness_coefficient(V, d, g1, AngularSector(l, d)) for l in sectors)
    a_2R = max(rellich_smallness_coefficient(V, d, g1.extended(2), AngularSector(l, d))
               for l in sectors)
    thr = cone_threshold(delta, d)
    hyp = max(a_R, a_2R) < thr
    if candidates is None:
        candidates = persistent_candidates(V, d, n, R, sectors, tol, drift, window, method)
    lam, sec, d1, d2, mu, pers = candidates
    p = lam[pers]
    excess = (np.abs(p.imag) - delta * p.real) / np.abs(p) if p.size else np.array([])
    measured = float(excess.max()) if excess.size else -math.inf
    return CheckReport(
        "cone_enclosure", measured, angular_tol, hypothesis_met=hyp,
        trend={"a_delta_R": a_R, "a_delta_2R": a_2R},
        details={"delta": delta, "cone_threshold": thr, "n": n, "R": R, "d": d,
                 "sectors": list(sectors), "potential": V.descriptor(),
                 "persistent_eigenvalues": [complex(x) for x in p],
                 "persistent_sectors": [int(s) for s in sec[pers]]},
    )
