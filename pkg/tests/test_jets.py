"""Spectral kernel tests: eigenvalues, sigma_k, Garding branches, frames.

Derived expectations are computed by independent oracles inside the tests:
characteristic-polynomial roots for spectra, brute-force subset sums for
sigma_k, numpy polynomial roots for the Garding branches.
"""
import itertools

import numpy as np
import pytest

from subeq.errors import DomainError, InputError
from subeq.jets import (
    Jet,
    SymMatrix,
    eigenvalues_sym,
    eigenvalues_sym_batch,
    garding_eigenvalues,
    garding_eigenvalues_batch,
    quasilinear_T,
    sigma_k,
    trace_on_frame,
)
from subeq.profiles import AProfile


def rand_sym(rng, m, n=None):
    shape = (m, m) if n is None else (n, m, m)
    B = rng.standard_normal(shape)
    return B + np.swapaxes(B, -1, -2)


class TestEigenvalues:
    def test_identity(self):
        assert np.allclose(eigenvalues_sym(SymMatrix.identity(3)), [1, 1, 1])

    def test_diagonal_sorted(self):
        ev = eigenvalues_sym(SymMatrix.from_diag([3.0, 1.0, 2.0]))
        assert np.allclose(ev, [1, 2, 3])

    def test_against_charpoly_roots(self):
        # oracle: roots of det(A - t I) via numpy.roots on the characteristic
        # polynomial coefficients
        rng = np.random.default_rng(7)
        for _ in range(25):
            A = rand_sym(rng, 4)
            coeffs = np.poly(A)
            roots = np.sort(np.real(np.roots(coeffs)))
            ev = eigenvalues_sym(SymMatrix.from_full(A))
            assert np.abs(ev - roots).max() < 1e-9

    def test_reconstruction_residual(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            A = rand_sym(rng, 5)
            w, Q = np.linalg.eigh(A)
            resid = np.abs(A - (Q * w) @ Q.T).max()
            assert resid <= 1e-12 * (1 + np.abs(A).max())

    def test_weyl_monotonicity(self):
        rng = np.random.default_rng(11)
        for m in (2, 3, 5, 8):
            A = rand_sym(rng, m, 64)
            B = rng.standard_normal((64, m, m))
            P = np.einsum("nik,njk->nij", B, B)
            assert np.all(eigenvalues_sym_batch(A + P) >= eigenvalues_sym_batch(A) - 1e-9)

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError):
            SymMatrix.from_full(np.array([[np.nan, 0.0], [0.0, 1.0]]))
        with pytest.raises(InputError):
            SymMatrix.from_full(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_dimension_cap(self):
        with pytest.raises(InputError):
            SymMatrix.from_full(np.eye(9))


class TestSigmaK:
    def test_basic_123(self):
        assert sigma_k([1, 2, 3], 1) == 6.0
        assert sigma_k([1, 2, 3], 2) == 11.0
        assert sigma_k([1, 2, 3], 3) == 6.0

    def test_against_subset_enumeration(self):
        rng = np.random.default_rng(5)
        for m in (2, 4, 6):
            lam = rng.standard_normal(m) * 3
            for k in range(1, m + 1):
                brute = sum(np.prod([lam[i] for i in c])
                            for c in itertools.combinations(range(m), k))
                assert abs(sigma_k(lam, k) - brute) < 1e-10 * (1 + abs(brute))

    def test_out_of_range(self):
        with pytest.raises(InputError):
            sigma_k([1.0, 2.0], 3)
        with pytest.raises(InputError):
            sigma_k([1.0, 2.0], 0)


class TestGarding:
    def test_k1_is_mean(self):
        # sigma_1(lambda + t) = 6 + 3t: single root at -2
        mu = garding_eigenvalues(SymMatrix.from_diag([1.0, 2.0, 3.0]), 1)
        assert np.allclose(mu, [2.0])

    def test_k2_quadratic_oracle(self):
        # 3t^2 + 12t + 11 = 0 solved exactly
        roots = np.roots([3.0, 12.0, 11.0])
        expect = np.sort(-roots)
        mu = garding_eigenvalues(SymMatrix.from_diag([1.0, 2.0, 3.0]), 2)
        assert np.abs(mu - expect).max() < 1e-12
        assert np.allclose(mu, [2 - 1 / np.sqrt(3), 2 + 1 / np.sqrt(3)])

    def test_k_equals_m_is_spectrum(self):
        rng = np.random.default_rng(1)
        for m in (2, 3, 5):
            A = SymMatrix.from_full(rand_sym(rng, m))
            assert np.abs(garding_eigenvalues(A, m) - eigenvalues_sym(A)).max() < 1e-9

    def test_polyroot_oracle_random(self):
        # oracle: numpy.roots on the coefficients of sigma_k(lambda + t)
        rng = np.random.default_rng(9)
        for m in (3, 4, 6):
            lam = np.sort(rng.standard_normal(m) * 2)
            for k in range(1, m + 1):
                coeffs = np.zeros(k + 1)
                for j in range(k + 1):
                    # coefficient of t^j in sigma_k(lambda + t)
                    from math import comb
                    s = sigma_k(lam, k - j) if k - j >= 1 else 1.0
                    coeffs[j] = s * comb(m - (k - j), j)
                roots = np.sort(np.real(np.roots(coeffs[::-1])))
                expect = -roots[::-1]
                A = SymMatrix.from_diag(lam)
                mu = garding_eigenvalues(A, k)
                assert np.abs(mu - expect).max() < 1e-8 * (1 + np.abs(lam).max() ** k)

    def test_duality_identity(self):
        # mu_j(-A) = -mu_{k-j+1}(A), m <= 6, 1000 samples
        rng = np.random.default_rng(2)
        for m in range(2, 7):
            A = rand_sym(rng, m, 200)
            for k in range(1, m + 1):
                mu = garding_eigenvalues_batch(A, k)
                mun = garding_eigenvalues_batch(-A, k)
                assert np.abs(mun + mu[:, ::-1]).max() <= 1e-9

    def test_psd_monotonicity(self):
        rng = np.random.default_rng(4)
        for m in (2, 4, 6):
            A = rand_sym(rng, m, 200)
            B = rng.standard_normal((200, m, m))
            P = np.einsum("nik,njk->nij", B, B) / m
            for k in range(1, m + 1):
                mu = garding_eigenvalues_batch(A, k)
                mup = garding_eigenvalues_batch(A + P, k)
                assert np.all(mup >= mu - 1e-9)

    def test_shift_equivariance_and_permutation(self):
        rng = np.random.default_rng(6)
        lam = rng.standard_normal(5)
        from subeq.jets import _garding_from_eigs_batch
        for k in (1, 3, 5):
            mu = _garding_from_eigs_batch(lam[None], k)[0]
            mu_s = _garding_from_eigs_batch((lam + 0.7)[None], k)[0]
            assert np.abs(mu_s - (mu + 0.7)).max() < 1e-9
            perm = rng.permutation(5)
            mu_p = _garding_from_eigs_batch(lam[perm][None], k)[0]
            assert np.abs(mu_p - mu).max() < 1e-9

    def test_out_of_range(self):
        with pytest.raises(InputError):
            garding_eigenvalues(SymMatrix.identity(3), 4)


class TestTraceOnFrame:
    def test_full_basis_is_trace(self):
        A = SymMatrix.from_diag([1.0, 2.0, 3.0])
        assert trace_on_frame(A, np.eye(3)) == pytest.approx(6.0)

    def test_coordinate_plane(self):
        A = SymMatrix.from_diag([1.0, 2.0, 3.0])
        assert trace_on_frame(A, np.eye(3)[:2]) == pytest.approx(3.0)

    def test_minmax_characterization_sampled(self):
        # min over 10^4 random k-frames approaches the sum of the k smallest
        # eigenvalues; the random search keeps half its budget for gaussian
        # jitters of the incumbent (still random frames, Gram-Schmidt applied)
        rng = np.random.default_rng(12)
        A = SymMatrix.from_full(rand_sym(rng, 4))
        ev = eigenvalues_sym(A)
        k = 2
        best = np.inf
        best_Q = None
        for it in range(10_000):
            seed = rng.standard_normal((4, k))
            if best_Q is not None and it % 2:
                seed = best_Q + 0.05 * seed
            Q, _ = np.linalg.qr(seed)
            val = trace_on_frame(A, Q.T)
            if val < best:
                best, best_Q = val, Q
        assert best >= ev[:k].sum() - 1e-9
        assert best - ev[:k].sum() <= 1e-2

    def test_nonorthonormal_rejected(self):
        A = SymMatrix.identity(2)
        with pytest.raises(InputError):
            trace_on_frame(A, np.array([[1.0, 1.0]]))


class TestQuasilinearT:
    def test_laplacian_profile_identity(self):
        T = quasilinear_T(np.array([0.3, -0.4]), AProfile.constant(1.0))
        assert np.abs(T.full - np.eye(2)).max() < 1e-14

    def test_mean_curvature_eigenvalues(self):
        # direct differentiation: lam1 = a + t a' at t=1, lam2 = a(1)
        a = lambda t: (1 + t**2) ** -0.5
        da = lambda t: -t * (1 + t**2) ** -1.5
        expect = sorted([a(1.0) + da(1.0), a(1.0)])
        T = quasilinear_T(np.array([1.0, 0.0]), AProfile.mean_curvature())
        assert np.allclose(np.linalg.eigvalsh(T.full), expect)
        assert np.allclose(expect, [2**-1.5, 2**-0.5])

    def test_k_laplacian_eigenvalues(self):
        # lam1 = (k-1) t^{k-2}, lam2 = t^{k-2} at k=3, t=2
        T = quasilinear_T(np.array([0.0, 2.0]), AProfile.k_laplacian(3))
        assert np.allclose(sorted(np.linalg.eigvalsh(T.full)), [2.0, 4.0])

    def test_eigenvector_structure(self):
        rng = np.random.default_rng(8)
        p = rng.standard_normal(3)
        prof = AProfile.mean_curvature()
        T = quasilinear_T(p, prof).full
        t = np.linalg.norm(p)
        assert np.abs(T @ p - float(prof.lam1(t)) * p).max() < 1e-12
        q = np.array([p[1], -p[0], 0.0])
        assert np.abs(T @ q - float(prof.lam2(t)) * q).max() < 1e-12

    def test_zero_gradient_domain_error(self):
        with pytest.raises(DomainError):
            quasilinear_T(np.zeros(2), AProfile.constant(1.0))


class TestJetType:
    def test_dimension_agreement(self):
        with pytest.raises(InputError):
            Jet(0.0, np.zeros(3), SymMatrix.identity(2))

    def test_negation(self):
        j = Jet(1.0, np.array([1.0, 0.0]), SymMatrix.identity(2))
        nj = -j
        assert nj.r == -1.0 and np.all(nj.p == -j.p)
        assert np.allclose(nj.A.full, -np.eye(2))
