import math

import numpy as np
import pytest
import scipy.linalg as sl

from bispec.core import AngularSector, InvalidArgument, Potential, RadialGrid
from bispec.discretize import build_hamiltonian
from bispec.spectra import (
    check_cone_enclosure,
    check_total_absence,
    distance_to_half_line,
    eigenvalues,
    persistent_candidates,
    resolution_limit,
)

S0 = AngularSector(0, 5)


def hamiltonian(V, n=200, R=10.0, ell=0):
    return build_hamiltonian(5, AngularSector(ell, 5), RadialGrid(n, R, 5), V)


class TestEigenvalues:
    @pytest.mark.parametrize("method", ["dense", "arnoldi"])
    def test_residuals_small(self, method):
        H = hamiltonian(Potential.bump(-20 + 5j, 2.0, 0.7), ell=1)
        res = eigenvalues(H, k=10, shift=-5.0, method=method)
        assert np.all(res.residuals <= 1e-8 * res.scale)
        assert res.method == ("DenseQR" if method == "dense" else "ShiftInvertArnoldi")

    def test_dense_and_arnoldi_agree(self):
        H = hamiltonian(Potential.rellich(0.2 + 0.3j), n=300, ell=2)
        dense = eigenvalues(H, k=12, shift=1.0, method="dense").eigenvalues
        arn = eigenvalues(H, k=12, shift=1.0, method="arnoldi").eigenvalues
        np.testing.assert_allclose(np.sort_complex(arn), np.sort_complex(dense), rtol=1e-6)

    def test_real_potential_gives_real_spectrum(self):
        lam = eigenvalues(hamiltonian(Potential.step(-30.0, 2.0, 1.0))).eigenvalues
        assert np.abs(lam.imag).max() <= 1e-8 * np.abs(lam).max()

    def test_first_order_perturbation(self):
        # eigenvalue shifts of alpha/r^4 match <v, V v> for the free eigenvectors
        g = RadialGrid(200, 10.0, 5)
        free = build_hamiltonian(5, S0, g, Potential.zero()).symmetrized().toarray().real
        lam0, vecs = sl.eigh(free)
        V = Potential.rellich(0.01j)
        lam = eigenvalues(build_hamiltonian(5, S0, g, V)).eigenvalues
        lam = lam[np.argsort(lam.real)]
        first = np.einsum("ij,i,ij->j", vecs, V(g.nodes), vecs)
        shift = lam[:8] - lam0[:8]
        np.testing.assert_allclose(shift, first[:8], rtol=1e-2)

    def test_sorted_and_counted(self):
        res = eigenvalues(hamiltonian(Potential.zero(), n=50))
        assert res.eigenvalues.size == 50
        assert np.all(np.diff(res.eigenvalues.real) >= 0)

    def test_bad_arguments(self):
        H = hamiltonian(Potential.zero(), n=50)
        with pytest.raises(InvalidArgument):
            eigenvalues(H, k=0)
        with pytest.raises(InvalidArgument):
            eigenvalues(H, method="arnoldi")
        with pytest.raises(InvalidArgument):
            eigenvalues(H, k=3, method="lanczos")
        with pytest.raises(InvalidArgument):
            eigenvalues(hamiltonian(Potential.zero(), n=1600), method="dense")


class TestHelpers:
    def test_distance(self):
        d = distance_to_half_line([2 + 1j, -3 + 4j, 5.0])
        np.testing.assert_allclose(d, [1.0, 5.0, 0.0])

    def test_resolution_limit(self):
        g = RadialGrid(100, 10.0, 5)
        assert resolution_limit(g) == pytest.approx(1e-3 * (4 / 0.01) ** 2)


class TestAbsence:
    def test_free(self):
        v = check_total_absence(Potential.zero(), 5, 200, 10.0)
        assert v.candidate_eigenvalues.size == 0
        assert v.hypothesis_met and v.passed

    def test_small_rellich(self):
        v = check_total_absence(Potential.rellich(0.01j), 5, 300, 10.0)
        assert v.hypothesis_met and v.passed
        assert v.to_dict()["passed"] is True

    def test_deep_bump_persists(self):
        v = check_total_absence(Potential.bump(-50.0, 2.0, 0.5), 5, 300, 10.0, sectors=(0,))
        assert not v.hypothesis_met and v.passed is None
        neg = v.persistent_eigenvalues
        assert neg.size >= 1 and np.all(neg.real < 0)
        assert np.all(np.abs(v.matched_2R[v.persistent] - neg) < 1e-3 * np.abs(neg))

    def test_conjugation_symmetry(self):
        a = persistent_candidates(Potential.bump(-50 + 20j, 2.0, 0.5), 5, 300, 10.0, sectors=(0, 1))
        b = persistent_candidates(Potential.bump(-50 - 20j, 2.0, 0.5), 5, 300, 10.0, sectors=(0, 1))
        pa = np.sort_complex(a[0][a[5]])
        pb = np.sort_complex(np.conj(b[0][b[5]]))
        assert pa.size >= 1
        np.testing.assert_allclose(pa, pb, rtol=1e-6)

    def test_repulsive_has_no_negative_persistent(self):
        v = check_total_absence(Potential.step(1.0, 3.0, 2.0), 5, 300, 10.0)
        assert not np.any(v.persistent_eigenvalues.real < -1e-3)

    def test_arnoldi_path_matches_dense(self):
        V = Potential.bump(-50.0, 2.0, 0.5)
        dense = persistent_candidates(V, 5, 300, 10.0, sectors=(0,), method="dense")
        arn = persistent_candidates(V, 5, 300, 10.0, sectors=(0,), method="arnoldi")
        np.testing.assert_allclose(np.sort_complex(arn[0][arn[5]]),
                                   np.sort_complex(dense[0][dense[5]]), rtol=1e-8)


class TestCone:
    def test_free_is_vacuous(self):
        rep = check_cone_enclosure(Potential.zero(), 5, 1.0, 200, 10.0)
        assert rep.hypothesis_met and rep.passed and rep.measured == -math.inf

    def test_imaginary_rellich(self):
        rep = check_cone_enclosure(Potential.rellich(0.1j), 5, 1.0, 300, 10.0)
        assert rep.hypothesis_met and rep.passed
        # approaches 0.1 / sqrt(C_R) = 0.08 from below, logarithmically in R/h
        a_R, a_2R = rep.trend["a_delta_R"], rep.trend["a_delta_2R"]
        assert 0.05 < a_R < a_2R < 0.08
        assert rep.details["cone_threshold"] == pytest.approx(0.625)

    def test_deep_well_outside_cone(self):
        rep = check_cone_enclosure(Potential.step(-100.0, 1.0), 5, 1.0, 300, 10.0)
        assert not rep.hypothesis_met and rep.passed is None
        neg = rep.details["persistent_eigenvalues"]
        assert neg and all(z.real < 0 for z in neg)
        assert rep.measured == pytest.approx(1.0)

    def test_precomputed_candidates(self):
        V = Potential.bump(-50.0, 2.0, 0.5)
        cand = persistent_candidates(V, 5, 300, 10.0, sectors=(0,))
        a = check_cone_enclosure(V, 5, 1.0, 300, 10.0, sectors=(0,), candidates=cand)
        b = check_total_absence(V, 5, 300, 10.0, sectors=(0,), candidates=cand)
        assert a.details["persistent_eigenvalues"] == list(b.persistent_eigenvalues)
