import math

import numpy as np
import pytest
from scipy import integrate

from bispec.core import (
    AngularSector,
    InvalidArgument,
    Potential,
    RadialGrid,
    gauge_wavenumber,
    sharp_constants,
)
from bispec.discretize import NearSingular, build_hamiltonian, laplacian_matrix
from bispec.resolvent import (
    all_quadrant_grid,
    apriori_check_neg,
    apriori_check_pos,
    bump_source,
    gauge_contrast,
    gauged_gradient_functional,
    left_half_plane_grid,
    potential_chain_check,
    sa_apriori_check,
    schrodinger_checks,
    solve_helmholtz,
    solve_radiating,
    solve_resolvent,
    sweep_resolvent_norm,
    weighted_resolvent_norm,
)
from bispec.spectra import eigenvalues

S0 = AngularSector(0, 5)
F = bump_source()


def free(n=400, R=10.0, ell=0):
    return build_hamiltonian(5, AngularSector(ell, 5), RadialGrid(n, R, 5), Potential.zero())


class TestSolve:
    @pytest.mark.parametrize("z", [-1.0, 2 + 3j, -0.5 - 4j])
    def test_recovers_known_solution(self, z):
        H = build_hamiltonian(5, AngularSector(1, 5), RadialGrid(300, 8.0, 5),
                              Potential.rellich(0.2 - 0.1j))
        w = np.exp(-H.grid.nodes**2) * (1 + 1j * H.grid.nodes)
        sol = solve_resolvent(H, z, H @ w - z * w)
        np.testing.assert_allclose(sol.u, w, rtol=1e-10, atol=1e-10 * np.abs(w).max())
        assert sol.backward_residual <= 1e-10

    def test_zero_source(self):
        sol = solve_resolvent(free(), -1.0, np.zeros(400))
        assert not np.any(sol.u)

    def test_rejects_bad_source(self):
        f = np.ones(400)
        f[3] = np.inf
        with pytest.raises(InvalidArgument):
            solve_resolvent(free(), -1.0, f)
        with pytest.raises(InvalidArgument):
            solve_resolvent(free(), -1.0, np.ones(10))

    def test_exact_eigenvalue_is_flagged(self):
        H = build_hamiltonian(5, S0, RadialGrid(200, 10.0, 5), Potential.bump(-50.0, 2.0, 0.5))
        lam = eigenvalues(H, k=1, shift=-18.0, method="dense").eigenvalues[0]
        with pytest.raises(NearSingular):
            solve_resolvent(H, lam, F)


class TestWeightedNorm:
    def test_free_bound(self):
        c = sharp_constants(5)
        assert weighted_resolvent_norm(free(), -1.0) <= 1.02 / c.C_R

    def test_scaling_covariance(self):
        # x -> 2x maps z to 16 z; the weighted norm is dimensionless
        a = weighted_resolvent_norm(free(400, 10.0), -1 + 0.5j)
        b = weighted_resolvent_norm(free(400, 5.0), 16 * (-1 + 0.5j))
        assert b == pytest.approx(a, rel=1e-8)

    def test_grows_near_pole(self):
        H = build_hamiltonian(5, S0, RadialGrid(400, 10.0, 5), Potential.bump(-50.0, 2.0, 0.5))
        lam = eigenvalues(H, k=1, shift=-18.0, method="arnoldi").eigenvalues[0]
        Hr = build_hamiltonian(5, S0, RadialGrid(400, 10.0, 5), Potential.rellich(0.005j))
        sup = sweep_resolvent_norm(Hr, all_quadrant_grid(5, 4)).sup_norm
        assert weighted_resolvent_norm(H, lam + 1e-3) > 10 * sup

    def test_deterministic(self):
        assert weighted_resolvent_norm(free(), 1j, seed=3) == weighted_resolvent_norm(free(), 1j,
                                                                                      seed=3)


class TestSweep:
    def test_single_point(self):
        H = free()
        sw = sweep_resolvent_norm(H, [2 - 1j])
        assert sw.norms[0] == weighted_resolvent_norm(H, 2 - 1j)
        assert sw.sup_norm == sw.norms[0]

    def test_parallel_matches_serial(self):
        H = free(300)
        zs = all_quadrant_grid(3, 4)
        a = sweep_resolvent_norm(H, zs, jobs=1)
        b = sweep_resolvent_norm(H, zs, jobs=3)
        np.testing.assert_array_equal(a.norms, b.norms)

    def test_retry_off_pole(self):
        H = build_hamiltonian(5, S0, RadialGrid(200, 10.0, 5), Potential.bump(-50.0, 2.0, 0.5))
        lam = eigenvalues(H, k=1, shift=-18.0, method="dense").eigenvalues[0]
        sw = sweep_resolvent_norm(H, [lam])
        assert np.isfinite(sw.norms[0]) and not sw.failures
        assert sw.z_used[0] == pytest.approx(lam + 1e-3 * abs(lam) * 1j)

    def test_rows(self):
        sw = sweep_resolvent_norm(free(100), [1j, -1j])
        assert set(sw.rows()[0]) == {"re_z", "im_z", "norm", "condition_flag", "sector", "R", "n"}

    def test_grids(self):
        zs = all_quadrant_grid()
        assert zs.size == 100 and np.all(zs.imag != 0)
        assert {(np.sign(z.real), np.sign(z.imag)) for z in zs} == {(1, 1), (-1, 1), (-1, -1),
                                                                     (1, -1)}
        assert np.abs(zs).min() == pytest.approx(0.01) and np.abs(zs).max() == pytest.approx(100)
        left = left_half_plane_grid(10, 5)
        assert left.size == 50 and np.all(left.real < 0)


def _cartesian_gauged_sum(u, x, k, e1=1e-5, e2=1e-3):
    """sum_j |grad(e^{-ik|x|} d_j U)|^2 for U(x) = u(|x|), by nested central differences."""
    d = x.size
    eye = np.eye(d)

    def U(y):
        return u(np.linalg.norm(y))

    def phi(y, j):
        du = (U(y + e1 * eye[j]) - U(y - e1 * eye[j])) / (2 * e1)
        return np.exp(-1j * k * np.linalg.norm(y)) * du

    total = 0.0
    for j in range(d):
        for i in range(d):
            g = (phi(x + e2 * eye[i], j) - phi(x - e2 * eye[i], j)) / (2 * e2)
            total += abs(g) ** 2
    return total


class TestGaugedGradient:
    def test_radial_identity_against_cartesian_differences(self):
        # sum_j |grad (e^{-ikr} d_j u)|^2 = |G'|^2 + (d-1) |G|^2 / r^2, G = e^{-ikr} u'
        rng = np.random.default_rng(11)
        zs = [4.0, 1 + 1j, -1.0, 2 - 3j, 0.0]
        for _ in range(20):
            c = complex(*rng.normal(size=2))
            lam = rng.uniform(0.5, 1.5)

            def u(r, c=c, lam=lam):
                return (1 + c * r**2) * np.exp(-lam * r**2)

            def du(r, c=c, lam=lam):
                return (2 * c * r - 2 * lam * r * (1 + c * r**2)) * np.exp(-lam * r**2)

            def ddu(r, c=c, lam=lam):
                p = 1 + c * r**2
                return (2 * c - 2 * lam * p - 8 * lam * c * r**2 + 4 * lam**2 * r**2 * p) \
                    * np.exp(-lam * r**2)

            for z in zs:
                k = gauge_wavenumber(z)
                x = rng.normal(size=5)
                x *= rng.uniform(0.5, 2.0) / np.linalg.norm(x)
                r = np.linalg.norm(x)
                G = np.exp(-1j * k * r) * du(r)
                dG = np.exp(-1j * k * r) * (ddu(r) - 1j * k * du(r))
                closed = abs(dG) ** 2 + 4 * abs(G) ** 2 / r**2
                assert _cartesian_gauged_sum(u, x, k) == pytest.approx(closed, rel=1e-4)

    def test_discrete_functional_converges(self):
        d, k = 5, math.sqrt(2)
        u = lambda r: (1 + 0.5j * r**2) * np.exp(-r**2)  # noqa: E731
        du = lambda r: (1j * r - 2 * r * (1 + 0.5j * r**2)) * np.exp(-r**2)  # noqa: E731
        ddu = lambda r: (1j - 2 * (1 + 0.5j * r**2) - 4j * r**2  # noqa: E731
                         + 4 * r**2 * (1 + 0.5j * r**2)) * np.exp(-r**2)

        def density(r):
            G = np.exp(-1j * k * r) * du(r)
            dG = np.exp(-1j * k * r) * (ddu(r) - 1j * k * du(r))
            return (abs(dG) ** 2 + (d - 1) * abs(G) ** 2 / r**2) * r ** (d - 1)

        exact = integrate.quad(density, 0, 8, limit=200, epsabs=1e-14)[0]
        errs = []
        for n in (500, 1000, 2000):
            g = RadialGrid(n, 8.0, d)
            errs.append(abs(gauged_gradient_functional(u(g.nodes), g, k) / exact - 1))
        assert errs[-1] < 1e-4
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.15)

    def test_zero(self):
        g = RadialGrid(100, 5.0, 5)
        assert gauged_gradient_functional(np.zeros(100), g, 1.0) == 0.0


class TestRadiating:
    @pytest.mark.parametrize("z", [4.0, 4 + 1j, 2j])
    def test_independent_of_truncation(self, z):
        g = RadialGrid(1000, 10.0, 5)
        u, w = solve_radiating(z, F, g)
        u2, w2 = solve_radiating(z, F, g.extended(2))
        assert np.abs(u - u2[:1000]).max() <= 1e-3 * np.abs(u).max()
        assert np.abs(w - w2[:1000]).max() <= 1e-3 * np.abs(w).max()

    def test_satisfies_equation_inside(self):
        g = RadialGrid(1000, 10.0, 5)
        V = Potential.bump(1.0, 2.0, 1.0)
        u, w = solve_radiating(4.0, F, g, V)
        L = laplacian_matrix(g, S0)
        inner = g.nodes < 9.0
        np.testing.assert_allclose((L @ u)[inner], w[inner], atol=1e-10 * np.abs(w).max())
        res = L @ w + V(g.nodes) * u - 4.0 * u - F(g.nodes)
        assert np.abs(res[inner]).max() <= 1e-8 * np.abs(F(g.nodes)).max()

    def test_second_order(self):
        vals = []
        for n in (500, 1000, 2000):
            g = RadialGrid(n, 10.0, 5)
            u, _ = solve_radiating(4.0, F, g, Potential.bump(1.0, 2.0, 1.0))
            vals.append(np.interp(2.0, g.nodes, u.real) + 1j * np.interp(2.0, g.nodes, u.imag))
        d = np.abs(np.diff(vals))
        assert d[0] / d[1] == pytest.approx(4, rel=0.1)

    def test_zero_z_rejected(self):
        with pytest.raises(InvalidArgument):
            solve_radiating(0.0, F, RadialGrid(100, 5.0, 5))

    def test_helmholtz_zero_source(self):
        assert not np.any(solve_helmholtz(1.0, np.zeros(100), RadialGrid(100, 5.0, 5)))


class TestAprioriChecks:
    def test_negative_free(self):
        rep = apriori_check_neg(free(1000), -1.0, F)
        assert rep.passed and rep.bound == pytest.approx(0.8 * 1.02)

    def test_negative_near_zero(self):
        rep = apriori_check_neg(free(1000), -1e-4 + 1e-4j, F)
        assert rep.passed

    def test_negative_rellich(self):
        H = build_hamiltonian(5, S0, RadialGrid(1000, 10.0, 5), Potential.rellich(0.1))
        rep = apriori_check_neg(H, -5.0, F, Potential.rellich(0.1))
        assert rep.hypothesis_met and rep.passed
        assert 0 < rep.details["a"] < 0.2

    def test_negative_requires_left_half(self):
        with pytest.raises(InvalidArgument):
            apriori_check_neg(free(), 1.0, F)

    @pytest.mark.parametrize("z", [0.0, 4.0, 1 + 1j])
    def test_positive(self, z):
        rep = apriori_check_pos(z, F, RadialGrid(1000, 10.0, 5))
        assert rep.passed and rep.details["sum_form_holds"]

    def test_positive_requires_right_half(self):
        with pytest.raises(InvalidArgument):
            apriori_check_pos(-1.0, F, RadialGrid(100, 5.0, 5))

    def test_positive_zero_source(self):
        rep = apriori_check_pos(4.0, np.zeros(200), RadialGrid(200, 5.0, 5))
        assert rep.measured == 0.0 and rep.passed

    def test_gauge_contrast(self):
        rep = gauge_contrast(4.0, F, RadialGrid(1000, 10.0, 5))
        assert rep.passed and rep.details["ungauged_growth"] >= 1.5

    @pytest.mark.parametrize("kappa", [1.0, 1 + 1j, 5.0])
    def test_schrodinger(self, kappa):
        gauged, weighted = schrodinger_checks(kappa, F, RadialGrid(2000, 20.0, 5))
        assert gauged.passed and weighted.passed
        assert weighted.bound == pytest.approx(2.0 * 1.02)

    def test_schrodinger_outside_wedge(self):
        reps = schrodinger_checks(1 + 2j, F, RadialGrid(200, 10.0, 5))
        assert all(r.hypothesis_met is False and r.passed is None for r in reps)

    def test_schrodinger_zero_source(self):
        gauged, weighted = schrodinger_checks(1.0, np.zeros(200), RadialGrid(200, 10.0, 5))
        assert gauged.measured == 0.0 and weighted.measured == 0.0

    def test_potential_chain(self):
        g = RadialGrid(1000, 10.0, 5)
        psi = bump_source(2.0, 1.0)
        zero = potential_chain_check(Potential.zero(), 5, g, psi)
        assert all(r.measured == 0.0 and r.bound == 0.0 and r.passed for r in zero)
        grad, lap = potential_chain_check(Potential.rellich(0.5), 5, g, psi)
        assert grad.passed and lap.passed
        assert lap.details["a"] < 1.0

    @pytest.mark.parametrize("V", [Potential.zero(), Potential.rellich(0.1)])
    @pytest.mark.parametrize("z", [-10.0, 0.0, 10.0])
    def test_self_adjoint(self, V, z):
        rd, ru = sa_apriori_check(V, z, F, RadialGrid(1000, 10.0, 5))
        assert rd.details["a"] == 0.0
        assert rd.bound == pytest.approx(1.2 * 1.02) and ru.bound == pytest.approx(0.96 * 1.02)
        assert rd.passed and ru.passed

    def test_self_adjoint_rejects(self):
        g = RadialGrid(100, 5.0, 5)
        with pytest.raises(InvalidArgument):
            sa_apriori_check(Potential.zero(), 1j, F, g)
        with pytest.raises(InvalidArgument):
            sa_apriori_check(Potential.rellich(1j), 1.0, F, g)
