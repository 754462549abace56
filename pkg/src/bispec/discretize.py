"""Banded radial discretizations of the sector Laplacian and bilaplacian.

The Laplacian is a conservative (flux-form) central-difference stencil on the
offset grid::

    (L u)_i = [rho_i^(d-1) (u_{i+1} - u_i) - rho_{i-1}^(d-1) (u_i - u_{i-1})]
              / (h^2 r_i^(d-1))  -  c_ell u_i / r_i^2

with faces ``rho_j = (j + 1) h``.  No face sits at the origin, so no origin
condition is needed.  In matrix form ``L = -W^{-1} K`` with ``W`` the
quadrature weights and ``K = G^T Omega G + c_ell W/r^2`` symmetric.  ``L`` is
therefore self-adjoint in the weighted inner product, and ``W^{1/2} L W^{-1/2}``
is a symmetric matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy import special
from scipy.linalg import lapack

from .core import (
    AngularSector,
    InvalidArgument,
    Potential,
    RadialGrid,
    principal_sqrt,
    require_dimension,
)

MIN_NODES = 8
# Applied to the equilibrated matrix (see BandedLU).
NEAR_SINGULAR = 1e12


class GridTooCoarse(InvalidArgument):
    """Raised when a grid has fewer than ``MIN_NODES`` nodes."""


class SingularPotential(InvalidArgument):
    """Raised when a potential is not finite at some node."""


class NearSingular(RuntimeError):
    """Raised when a shifted factorization is singular or ill-conditioned.

    Attributes
    ----------
    condition_flag : float
        Estimated 1-norm condition number (``inf`` for exact singularity).
    """

    def __init__(self, message, condition_flag=math.inf):
        super().__init__(message)
        self.condition_flag = condition_flag


@dataclass(frozen=True)
class BoundaryConditions:
    """Outer closure at ``r = R``.

    ``dirichlet``: ``u(R) = 0``.  ``navier``: ``u(R) = (Delta u)(R) = 0``.
    ``robin``: ``u'(R) = beta u(R)``, used for radiating and decaying
    exterior closures.  The origin needs no condition on the offset grid.
    """

    outer: str = "dirichlet"
    beta: complex | None = None
    origin: str = "offset"

    def __post_init__(self):
        if self.outer not in ("dirichlet", "navier", "robin"):
            raise InvalidArgument(f"unknown outer condition {self.outer!r}")
        if (self.outer == "robin") != (self.beta is not None):
            raise InvalidArgument("robin closure needs beta; other closures take none")

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def navier(cls):
        return cls("navier")

    @classmethod
    def robin(cls, beta):
        return cls("robin", complex(beta))


@dataclass(frozen=True, eq=False)
class BandedOperator:
    """Banded square matrix with grid and sector metadata.

    ``ab`` uses the ``scipy.linalg.solve_banded`` layout:
    ``ab[ku + i - j, j] = A[i, j]``.  The matrix acts on nodal values; its
    natural inner product is the weighted one of ``grid``.
    """

    ab: np.ndarray
    kl: int
    ku: int
    grid: RadialGrid
    sector: AngularSector
    bc: BoundaryConditions
    kind: str = "operator"

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    @property
    def d(self) -> int:
        return self.grid.d

    lower_bw = property(lambda self: self.kl)
    upper_bw = property(lambda self: self.ku)

    @classmethod
    def from_sparse(cls, A, grid, sector, bc, kind="operator", kl=None, ku=None):
        A = sp.dia_matrix(A)
        offs = A.offsets
        kl = int(max(0, -offs.min())) if kl is None else kl
        ku = int(max(0, offs.max())) if ku is None else ku
        n = A.shape[0]
        ab = np.zeros((kl + ku + 1, n), dtype=complex)
        for off, row in zip(offs, A.data):
            if -kl <= off <= ku:
                ab[ku - off, :] += row[:n]
            elif np.any(row != 0):
                raise ValueError("matrix entries outside the declared band")
        # dia storage may hold junk in the unused corners
        for k in range(1, ku + 1):
            ab[ku - k, :k] = 0
        for k in range(1, kl + 1):
            ab[ku + k, n - k:] = 0
        ab.flags.writeable = False
        return cls(ab, kl, ku, grid, sector, bc, kind)

    @cached_property
    def sparse(self) -> sp.csr_matrix:
        n = self.n
        offs = list(range(self.ku, -self.kl - 1, -1))
        # dia_matrix wants data aligned by column, which is what ab holds
        return sp.dia_matrix((np.array(self.ab), offs), shape=(n, n)).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.sparse.toarray()

    def diagonal(self) -> np.ndarray:
        return np.array(self.ab[self.ku])

    def __matmul__(self, x):
        return self.sparse @ x

    def is_real(self) -> bool:
        return bool(np.all(self.ab.imag == 0))

    def plus_diagonal(self, v, kind=None) -> "BandedOperator":
        ab = np.array(self.ab)
        ab[self.ku] += v
        ab.flags.writeable = False
        return BandedOperator(ab, self.kl, self.ku, self.grid, self.sector, self.bc,
                              kind or self.kind)

    def shifted(self, z) -> "BandedOperator":
        """``A - z I``."""
        return self.plus_diagonal(-complex(z) * np.ones(self.n))

    def symmetrized(self) -> sp.csr_matrix:
        """``W^{1/2} A W^{-1/2}``: complex symmetric (real symmetric for real V)."""
        s = np.sqrt(self.grid.quad_weights)
        return (sp.diags(s) @ self.sparse @ sp.diags(1.0 / s)).tocsr()

    def symmetrized_operator(self) -> "BandedOperator":
        """:meth:`symmetrized` as a banded operator.  Its Euclidean norms
        are the weighted norms of the original."""
        return BandedOperator.from_sparse(self.symmetrized(), self.grid, self.sector, self.bc,
                                          self.kind + "-symmetrized", self.kl, self.ku)


def _require_fine(grid: RadialGrid):
    if grid.n < MIN_NODES:
        raise GridTooCoarse(f"grid too coarse: n = {grid.n} < {MIN_NODES}")


def _check_consistent(d, sector: AngularSector, grid: RadialGrid):
    d = require_dimension(d)
    if sector.d != d or grid.d != d:
        raise InvalidArgument("dimension mismatch between d, sector and grid")
    return d


# ---------------------------------------------------------------------------
# Quadratic forms
# ---------------------------------------------------------------------------

def staggered_gradient(grid: RadialGrid, dirichlet: bool = True) -> sp.csr_matrix:
    """Face differences ``(u_{j+1} - u_j)/h``.

    The last row is the face at ``R``: with ``dirichlet`` it uses the ghost
    value ``u_n = -u_{n-1}``; otherwise it is zero (flux closed separately).
    """
    n, h = grid.n, grid.h
    main = -np.ones(n) / h
    main[-1] = -2.0 / h if dirichlet else 0.0
    return sp.diags([main, np.ones(n - 1) / h], [0, 1], format="csr")


def centrifugal_weights(grid: RadialGrid, ell: int, p: float = 0.0) -> np.ndarray:
    """Cell integrals of ``r^(2p - 2) r^(d-1) (r / r_i)^ell``.

    Weights of the angular term ``c_ell |psi|^2 / r^2``; integrating the
    local profile ``psi ~ r^ell`` keeps the origin cell exact for ``r^ell``.
    """
    e = grid.d - 2 + 2 * p + ell
    if e <= 0:
        raise InvalidArgument("angular weight is not integrable at the origin")
    rho = np.arange(grid.n + 1) * grid.h
    return np.diff(rho**e) / (e * grid.nodes**ell)


def gradient_form(grid: RadialGrid, sector: AngularSector, p: float = 0.0) -> sp.csr_matrix:
    """Form of ``int r^(2p) |grad psi|^2`` on Dirichlet data (symmetric, tridiagonal)."""
    G = staggered_gradient(grid)
    om = grid.face_weights * grid.faces ** (2 * p)
    K = G.T @ sp.diags(om) @ G
    if sector.c_ell:
        K = K + sp.diags(sector.c_ell * centrifugal_weights(grid, sector.ell, p))
    return K.tocsr()


def mass_form(grid: RadialGrid, p: float = 0.0) -> np.ndarray:
    """Diagonal of the form ``int r^(2p) |psi|^2``."""
    return grid.quad_weights * grid.nodes ** (2 * p)


def laplacian_form(grid: RadialGrid, sector: AngularSector) -> sp.csr_matrix:
    """Form of ``int |Delta psi|^2``: ``K W^{-1} K`` (symmetric, pentadiagonal)."""
    K = gradient_form(grid, sector)
    return (K @ sp.diags(1.0 / grid.quad_weights) @ K).tocsr()


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def _stiffness(grid: RadialGrid, sector: AngularSector, bc: BoundaryConditions):
    if bc.outer == "robin":
        G = staggered_gradient(grid, dirichlet=False)
        K = G.T @ sp.diags(grid.face_weights) @ G
        if sector.c_ell:
            K = K + sp.diags(sector.c_ell * centrifugal_weights(grid, sector.ell))
        K = K.astype(complex)
        beta, h, R, d = bc.beta, grid.h, grid.R, grid.d
        corner = sp.csr_matrix(([-R ** (d - 1) * beta / (1 - beta * h / 2)],
                                ([grid.n - 1], [grid.n - 1])), shape=K.shape)
        return (K + corner).tocsr()
    return gradient_form(grid, sector)


def laplacian_matrix(grid: RadialGrid, sector: AngularSector, bc=None) -> sp.csr_matrix:
    """Sparse sector Laplacian ``-W^{-1} K`` for a Dirichlet or Robin closure."""
    bc = bc or BoundaryConditions.dirichlet()
    K = _stiffness(grid, sector, bc)
    return (-sp.diags(1.0 / grid.quad_weights) @ K).tocsr()


def build_radial_laplacian(d, sector: AngularSector, grid: RadialGrid,
                           bc: BoundaryConditions | None = None) -> BandedOperator:
    """Tridiagonal sector Laplacian ``u'' + (d-1)/r u' - c_ell u/r^2``.

    Parameters
    ----------
    d : int
    sector : AngularSector
    grid : RadialGrid
    bc : BoundaryConditions, optional
        Dirichlet (default) or Robin.

    Raises
    ------
    GridTooCoarse
        If ``grid.n < 8``.
    """
    _check_consistent(d, sector, grid)
    _require_fine(grid)
    bc = bc or BoundaryConditions.dirichlet()
    if bc.outer == "navier":
        raise InvalidArgument("the Laplacian takes a Dirichlet or Robin closure")
    L = laplacian_matrix(grid, sector, bc)
    return BandedOperator.from_sparse(L, grid, sector, bc, "laplacian", 1, 1)


def build_bilaplacian(d, sector: AngularSector, grid: RadialGrid) -> BandedOperator:
    """Navier bilaplacian ``L @ L`` with ``L`` the Dirichlet sector Laplacian."""
    _check_consistent(d, sector, grid)
    _require_fine(grid)
    L = laplacian_matrix(grid, sector)
    return BandedOperator.from_sparse(L @ L, grid, sector, BoundaryConditions.navier(),
                                      "bilaplacian", 2, 2)


def potential_values(V: Potential, grid: RadialGrid) -> np.ndarray:
    """Nodal values of ``V``; raises :class:`SingularPotential` if any is not finite."""
    with np.errstate(all="ignore"):
        v = np.asarray(V(grid.nodes), dtype=complex)
    if not np.all(np.isfinite(v)):
        raise SingularPotential("potential is not finite at every node")
    return v


def build_hamiltonian(d, sector: AngularSector, grid: RadialGrid, V: Potential) -> BandedOperator:
    """``Delta^2 + V`` with the Navier closure."""
    B = build_bilaplacian(d, sector, grid)
    return B.plus_diagonal(potential_values(V, grid), "hamiltonian")


# ---------------------------------------------------------------------------
# Banded LU
# ---------------------------------------------------------------------------

class BandedLU:
    """LAPACK ``zgbtrf`` factorization of a banded matrix.

    The matrix is equilibrated symmetrically, ``S A S`` with
    ``S = |diag A|^(-1/2)``, before factoring.  This removes the ``r^-4``
    grading near the origin, so the condition estimate (of ``S A S``) measures
    closeness to singularity rather than the spread of the diagonal.

    Parameters
    ----------
    A : BandedOperator or sparse matrix
    kl, ku : int, optional
        Bandwidths, required when ``A`` is sparse.
    max_condition : float
        Factorizations with a larger condition estimate raise
        :class:`NearSingular`.  Pass ``inf`` to skip the estimate.
    """

    def __init__(self, A, kl=None, ku=None, max_condition: float = NEAR_SINGULAR):
        if isinstance(A, BandedOperator):
            kl, ku, ab = A.kl, A.ku, A.ab
        else:
            op = BandedOperator.from_sparse(A, None, None, None, kl=kl, ku=ku)
            kl, ku, ab = op.kl, op.ku, op.ab
        n = ab.shape[1]
        self.n, self.kl, self.ku = n, kl, ku
        diag = np.abs(ab[ku])
        scale = np.ones(n)
        np.divide(1.0, np.sqrt(diag), out=scale, where=diag > 0)
        self._scale = scale
        rows = np.arange(n)[None, :] + np.arange(-ku, kl + 1)[:, None]
        ab = ab * scale[np.clip(rows, 0, n - 1)] * scale[None, :]
        work = np.zeros((2 * kl + ku + 1, n), dtype=complex)
        work[kl:, :] = ab
        self._norm1 = float(np.abs(ab).sum(axis=0).max())
        lu, piv, info = lapack.zgbtrf(work, kl, ku)
        if info > 0:
            raise NearSingular(f"exactly singular pivot at row {info - 1}", math.inf)
        if info < 0:
            raise ValueError(f"zgbtrf argument {-info} invalid")
        self._lu, self._piv = lu, piv
        self.condition_flag = math.nan
        if math.isfinite(max_condition):
            self.condition_flag = self.condition_estimate()
            if not self.condition_flag <= max_condition:
                raise NearSingular(f"condition estimate {self.condition_flag:.3e} exceeds "
                                   f"{max_condition:.1e}", self.condition_flag)

    def _solve_scaled(self, b, adjoint=False):
        x, info = lapack.zgbtrs(self._lu, self.kl, self.ku, b, self._piv, trans=2 if adjoint else 0)
        if info != 0:
            raise ValueError(f"zgbtrs failed with info={info}")
        return x

    def solve(self, b, adjoint: bool = False) -> np.ndarray:
        """Solve ``A x = b`` (or ``A^H x = b``)."""
        b = np.asarray(b, dtype=complex)
        s = self._scale if b.ndim == 1 else self._scale[:, None]
        return s * self._solve_scaled(s * b, adjoint)

    def condition_estimate(self) -> float:
        """1-norm condition estimate of the equilibrated matrix.

        Deterministic Hager-Higham iteration (the scheme behind LAPACK's
        ``xLACN2``), which scipy does not expose for banded factors.
        """
        n = self.n

        def sign(y):
            a = np.abs(y)
            return np.where(a > 0, y / np.where(a > 0, a, 1.0), 1.0)

        y = self._solve_scaled(np.full(n, 1.0 / n, dtype=complex))
        est = float(np.abs(y).sum())
        j_prev = -1
        for _ in range(5):
            z = self._solve_scaled(sign(y), adjoint=True)
            j = int(np.argmax(np.abs(z)))
            if j == j_prev:
                break
            e = np.zeros(n, dtype=complex)
            e[j] = 1.0
            y = self._solve_scaled(e)
            new = float(np.abs(y).sum())
            if new <= est:
                break
            est, j_prev = new, j
        alt = (-1.0) ** np.arange(n) * (1.0 + np.arange(n) / max(n - 1, 1))
        est = max(est, 2.0 * float(np.abs(self._solve_scaled(alt.astype(complex))).sum()) / (3 * n))
        return self._norm1 * est


# ---------------------------------------------------------------------------
# Factorization check
# ---------------------------------------------------------------------------

def _two_norm_lower(M, iters: int = 40, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[0]) + 0j
    x /= np.linalg.norm(x)
    MH = M.conj().T.tocsr()
    s = 0.0
    for _ in range(iters):
        y = MH @ (M @ x)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        s = math.sqrt(ny)
    return s


def verify_factorization(d, sector: AngularSector, grid: RadialGrid, z) -> float:
    """Relative residual of ``(L - sqrt z)(L + sqrt z) = L^2 - z`` at matrix level.

    Computed on the symmetrized matrices, so the spectral norm is the
    weighted operator norm.  The numerator uses the upper bound
    ``sqrt(||E||_1 ||E||_inf)`` and the denominator a power-iteration lower
    bound, so the ratio over-estimates the true one.
    """
    _check_consistent(d, sector, grid)
    s = principal_sqrt(z)
    z = complex(z)
    Ls = build_radial_laplacian(d, sector, grid).symmetrized().astype(complex)
    I = sp.identity(grid.n, dtype=complex, format="csr")
    lhs = (Ls - s * I) @ (Ls + s * I)
    rhs = (Ls @ Ls - z * I).tocsr()
    E = (lhs - rhs).tocsr()
    absE = abs(E)
    num = math.sqrt(float(absE.sum(axis=0).max()) * float(absE.sum(axis=1).max())) if E.nnz else 0.0
    if num == 0.0:
        return 0.0
    return num / _two_norm_lower(rhs)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def weighted_norm(u, grid: RadialGrid, p: float = 0.0) -> float:
    """``(sum_i w_i r_i^(2p) |u_i|^2)^(1/2)``."""
    u = np.asarray(u)
    return float(np.sqrt(np.sum(mass_form(grid, p) * np.abs(u) ** 2)))


def radial_derivative_faces(u, grid: RadialGrid, boundary: str = "free") -> np.ndarray:
    """Radial derivative at the faces ``rho_j``.

    ``boundary='dirichlet'`` closes the face at ``R`` with ``u(R) = 0``;
    ``'free'`` extrapolates the last interior difference there.
    """
    u = np.asarray(u)
    h = grid.h
    g = np.empty(u.shape, dtype=np.result_type(u, float))
    g[:-1] = np.diff(u) / h
    if boundary == "dirichlet":
        g[-1] = -2.0 * u[-1] / h
    elif boundary == "free":
        g[-1] = g[-2]
    else:
        raise InvalidArgument(f"unknown boundary mode {boundary!r}")
    return g


def centered_derivative(u, grid: RadialGrid) -> np.ndarray:
    """Nodal radial derivative by centered differences.

    At the first node the even reflection ``u_{-1} = u_0`` is used (regular
    at the origin); at the last node a one-sided second-order stencil.
    """
    u = np.asarray(u)
    h = grid.h
    D = np.empty(u.shape, dtype=np.result_type(u, float))
    D[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    D[0] = (u[1] - u[0]) / (2 * h)
    D[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return D


def gradient_seminorm(u, grid: RadialGrid, p: float = 0.0, sector: AngularSector | None = None,
                      boundary: str = "free") -> float:
    """``(int r^(2p) (|u'|^2 + c_ell |u|^2/r^2))^(1/2)`` by face quadrature."""
    g = radial_derivative_faces(u, grid, boundary)
    total = np.sum(grid.face_weights * grid.faces ** (2 * p) * np.abs(g) ** 2)
    if sector is not None and sector.c_ell:
        total += sector.c_ell * weighted_norm(u, grid, p - 1) ** 2
    return float(np.sqrt(total))


def delta_norm(u, grid: RadialGrid, d=None, sector: AngularSector | None = None) -> float:
    """``||L u||`` with ``L`` the Dirichlet sector Laplacian."""
    sector = sector or AngularSector(0, grid.d)
    L = laplacian_matrix(grid, sector)
    return weighted_norm(L @ np.asarray(u), grid, 0.0)


# ---------------------------------------------------------------------------
# Exterior closures
# ---------------------------------------------------------------------------

def outgoing_log_derivative(kappa, d, ell: int, R: float) -> complex:
    """``u'/u`` at ``R`` of the radiating exterior solution of ``(Delta + kappa) u = 0``.

    The exterior solution is ``r^(1 - d/2) H^(1)_nu(s r)`` with
    ``nu = ell + d/2 - 1`` and ``s = sqrt(kappa)``, ``Im s >= 0``.
    """
    kappa = complex(kappa)
    nu = ell + d / 2 - 1
    if kappa == 0:
        return complex((2 - d - ell) / R)
    s = principal_sqrt(kappa)
    if s.imag < 0:
        s = -s
    x = s * R
    return (1 - d / 2) / R + s * special.hankel1e(nu - 1, x) / special.hankel1e(nu, x) - nu / R


def decaying_log_derivative(kappa, d, ell: int, R: float) -> complex:
    """``u'/u`` at ``R`` of the decaying exterior solution of ``(Delta - kappa) u = 0``.

    The exterior solution is ``r^(1 - d/2) K_nu(t r)`` with ``t`` the
    principal root of ``kappa``.
    """
    kappa = complex(kappa)
    nu = ell + d / 2 - 1
    if kappa == 0:
        return complex((2 - d - ell) / R)
    t = principal_sqrt(kappa)
    x = t * R
    return (1 - d / 2) / R - t * special.kve(nu - 1, x) / special.kve(nu, x) - nu / R
