"""Catalog, duality, set algebra, jet-equivalence and fiber-distance tests."""
import numpy as np
import pytest

from subeq.errors import ConstructionError, InputError
from subeq.jets import Jet, SymMatrix
from subeq.profiles import AProfile, Profile
from subeq.subequations import (
    JetEquivalence,
    Region,
    apply_jet_equivalence,
    audit_PNT,
    below_zero_cap,
    contains,
    distance_to_boundary,
    dual,
    eikonal,
    eikonal_relaxed,
    hessian_branch,
    inf_laplacian,
    intersect,
    laplace,
    linear_jetequiv,
    obstacle,
    plurisub_trace,
    quasilinear,
    sigma_branch,
    union,
    whole_space,
)

LIN = Profile.linear(1.0)
ZERO = Profile.linear(0.0)
XI1 = Profile.table([-1.0, 0.0], [1.0, 0.0])


def catalog(m):
    return [
        eikonal(1.0, m=m),
        eikonal(XI1, m=m),
        laplace(LIN, m=m),
        hessian_branch(1, LIN, m=m),
        hessian_branch(m, LIN, m=m),
        plurisub_trace(max(1, m - 1), LIN, m=m),
        sigma_branch(1, min(2, m), LIN, m=m),
        quasilinear(AProfile.mean_curvature(), LIN, m=m),
        quasilinear(AProfile.k_laplacian(3.0), LIN, m=m),
        inf_laplacian(ZERO, m=m),
    ]


def rand_jets(rng, m, n, scale=2.0):
    r = scale * rng.standard_normal(n)
    p = scale * rng.standard_normal((n, m))
    B = rng.standard_normal((n, m, m))
    return r, p, B + np.swapaxes(B, 1, 2)


class TestContains:
    def test_eikonal_regions(self):
        E = eikonal(1.0, m=2)
        mk = lambda pn: Jet(0.0, np.array([pn, 0.0]), SymMatrix.zero(2))
        assert contains(E, None, mk(0.5)) is Region.INTERIOR
        assert contains(E, None, mk(1.0)) is Region.BOUNDARY
        assert contains(E, None, mk(1.5)) is Region.EXTERIOR

    def test_laplace_interior(self):
        F = laplace(LIN, m=2)
        j = Jet(-2.0, np.zeros(2), SymMatrix.zero(2))
        assert contains(F, None, j) is Region.INTERIOR  # tr 0 = 0 > -2

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            contains(laplace(LIN, m=2), None, Jet(0.0, np.zeros(3), SymMatrix.zero(3)))


class TestDuality:
    def test_dual_eikonal_table(self):
        # dual(E with xi=1) = {|p| >= 1}
        Ed = dual(eikonal(1.0, m=2))
        half = Jet(0.0, np.array([0.5, 0.0]), SymMatrix.zero(2))
        two = Jet(0.0, np.array([2.0, 0.0]), SymMatrix.zero(2))
        assert contains(Ed, None, half) is Region.EXTERIOR
        assert contains(Ed, None, two) is Region.INTERIOR

    def test_dual_hessian_branch_table(self):
        # dual({lambda_k >= f(r)}) = {lambda_{m-k+1} >= -f(-r)}
        rng = np.random.default_rng(0)
        m, k = 4, 2
        F = hessian_branch(k, LIN, m=m)
        Fd = dual(F)
        r, p, A = rand_jets(rng, m, 2000)
        expect = np.linalg.eigvalsh(A)[:, m - k] - (-LIN(-r))
        got = Fd.value(None, r, p, A)
        assert np.abs(got - expect).max() < 1e-12

    def test_dual_value_identity(self):
        # the definition: dual G (J) = -G(-J), exact for every member
        rng = np.random.default_rng(1)
        for m in (2, 3, 4):
            for F in catalog(m):
                r, p, A = rand_jets(rng, m, 500)
                lhs = dual(F).value(None, r, p, A)
                rhs = -F.value(None, -r, -p, -A)
                assert np.abs(lhs - rhs).max() < 1e-12, F.meta.tag

    def test_involution_classification(self):
        rng = np.random.default_rng(2)
        tol = 1e-9
        for m in (2, 3, 4):
            for F in catalog(m):
                r, p, A = rand_jets(rng, m, 2000)
                g0 = F.value(None, r, p, A)
                g2 = dual(dual(F)).value(None, r, p, A)
                off = np.abs(g0) > tol
                assert np.all(np.sign(g0[off]) == np.sign(g2[off])), F.meta.tag

    def test_order_reversal(self):
        # F1 subset F2 (sampled) => dual(F2) subset dual(F1)
        rng = np.random.default_rng(3)
        m = 3
        F1 = hessian_branch(1, ZERO, m=m)   # lambda_1 >= 0
        F2 = laplace(ZERO, m=m)             # tr >= 0 (larger set)
        r, p, A = rand_jets(rng, m, 4000)
        in1 = F1.value(None, r, p, A) > 0
        in2 = F2.value(None, r, p, A) > 0
        assert np.all(in2[in1])
        d2 = dual(F2).value(None, r, p, A) > 1e-12
        d1 = dual(F1).value(None, r, p, A) > -1e-12
        assert np.all(d1[d2])

    def test_inf_laplacian_self_dual_sampled(self):
        rng = np.random.default_rng(4)
        F = inf_laplacian(0.0, m=3)
        r, p, A = rand_jets(rng, 3, 10_000)
        g = F.value(None, r, p, A)
        gd = dual(F).value(None, r, p, A)
        off = np.abs(g) > 1e-9
        assert np.all(np.sign(g[off]) == np.sign(gd[off]))

    def test_demorgan_identity(self):
        # dual(F cap E) classifies as union(dual F, dual E) on 10^4 jets
        rng = np.random.default_rng(5)
        m = 3
        F = laplace(LIN, m=m)
        E = eikonal(1.0, m=m)
        r, p, A = rand_jets(rng, m, 10_000)
        lhs = dual(intersect(F, E)).value(None, r, p, A)
        rhs = union(dual(F), dual(E)).value(None, r, p, A)
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_dual_relaxed_eikonal(self):
        m = 2
        eta = np.array([0.0, 0.5, 1.0])
        E = eikonal_relaxed(1.0, eta, m=m)
        rng = np.random.default_rng(6)
        r, p, A = rand_jets(rng, m, 3)
        x = np.arange(3)
        lhs = dual(E).value(x, r, p, A)
        rhs = -E.value(x, -r, -p, -A)
        assert np.abs(lhs - rhs).max() < 1e-12
        assert np.abs(dual(dual(E)).value(x, r, p, A) - E.value(x, r, p, A)).max() < 1e-12


class TestSetAlgebra:
    def test_intersection_identity_element(self):
        rng = np.random.default_rng(7)
        F = laplace(LIN, m=2)
        r, p, A = rand_jets(rng, 2, 1000)
        got = intersect(F, whole_space(2)).value(None, r, p, A)
        expect = np.minimum(F.value(None, r, p, A), 1.0)
        assert np.abs(got - expect).max() < 1e-14
        # classification agrees with F everywhere
        assert np.all((got > 0) == (F.value(None, r, p, A) > 0))

    def test_eikonal_constraint_binds(self):
        # laplace cap E_xi at |p| just above xi(-1): exterior
        F = intersect(laplace(LIN, m=2), eikonal(XI1, m=2))
        pmag = float(XI1(-1.0)) + 0.1
        j = Jet(-1.0, np.array([pmag, 0.0]), SymMatrix.zero(2))
        assert contains(F, None, j) is Region.EXTERIOR

    def test_gradient_dependence_merged(self):
        F = intersect(laplace(LIN, m=2), eikonal(1.0, m=2))
        assert F.meta.depends_on_gradient


class TestObstacle:
    def test_absent_obstacle_is_identity(self):
        rng = np.random.default_rng(8)
        F = laplace(LIN, m=2)
        Fg = obstacle(F, 1e30)
        r, p, A = rand_jets(rng, 2, 1000)
        assert np.all((Fg.value(None, r, p, A) > 0) == (F.value(None, r, p, A) > 0))

    def test_binding_cap(self):
        F = laplace(LIN, m=2)
        g = np.array([0.5, -0.5])
        Fg = obstacle(F, g)
        j = Jet(0.2, np.zeros(2), SymMatrix.from_diag([5.0, 5.0]))
        assert contains(Fg, 0, j) is Region.INTERIOR
        assert contains(Fg, 1, j) is Region.EXTERIOR  # r > g regardless of (p, A)

    def test_dual_obstacle_identity(self):
        # dual(F^g) = dual(F) union {r <= -g(x)}, sampled
        rng = np.random.default_rng(9)
        F = laplace(LIN, m=2)
        g = rng.standard_normal(50)
        Fg = obstacle(F, g)
        r, p, A = rand_jets(rng, 2, 5000)
        x = rng.integers(0, 50, size=5000)
        lhs = dual(Fg).value(x, r, p, A)
        rhs = np.maximum(dual(F).value(x, r, p, A), -g[x] - r)
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_zero_cap(self):
        H = below_zero_cap(2)
        assert contains(H, None, Jet(-1.0, np.zeros(2), SymMatrix.zero(2))) is Region.INTERIOR
        assert contains(H, None, Jet(1.0, np.zeros(2), SymMatrix.zero(2))) is Region.EXTERIOR


class TestClosureConvention:
    def test_quasilinear_matches_laplace_off_zero(self):
        # a == 1 gives T(p) = I: identical classification to laplace for p != 0
        rng = np.random.default_rng(10)
        m = 3
        Q = quasilinear(AProfile.constant(1.0), LIN, m=m)
        L = laplace(LIN, m=m)
        r, p, A = rand_jets(rng, m, 10_000)
        keep = np.linalg.norm(p, axis=1) > 1e-12
        gq = Q.value(None, r, p, A)[keep]
        gl = L.value(None, r, p, A)[keep]
        assert np.abs(gq - gl).max() < 1e-10

    def test_inf_laplacian_interior_example(self):
        F = inf_laplacian(0.0, m=3)
        j = Jet(0.0, np.array([1.0, 0.0, 0.0]), SymMatrix.from_diag([1.0, -5.0, -5.0]))
        assert contains(F, None, j) is Region.INTERIOR  # A(p,p) = 1 > 0

    def test_p_zero_limsup(self):
        # at p = 0 the value is the limsup along p -> 0: lambda_max for (E8)
        F = inf_laplacian(0.0, m=2)
        A = np.array([[[2.0, 0.0], [0.0, -7.0]]])
        v0 = F.value(None, np.zeros(1), np.zeros((1, 2)), A)[0]
        assert v0 == pytest.approx(2.0)
        # approachable: small p along the top eigenvector gives values near 2
        v_eps = F.value(None, np.zeros(1), np.array([[1e-9, 0.0]]), A)[0]
        assert v_eps == pytest.approx(2.0)

    def test_duality_away_from_zero_exact(self):
        rng = np.random.default_rng(11)
        F = quasilinear(AProfile.k_laplacian(3.0), LIN, m=2)
        r, p, A = rand_jets(rng, 2, 5000)
        keep = np.linalg.norm(p, axis=1) > 1e-9
        lhs = dual(F).value(None, r, p, A)[keep]
        rhs = (-F.value(None, -r, -p, -A))[keep]
        assert np.abs(lhs - rhs).max() < 1e-12


class TestJetEquivalence:
    def test_identity_unchanged(self):
        rng = np.random.default_rng(12)
        F = laplace(LIN, m=2)
        psi = JetEquivalence(2, np.eye(2), np.eye(2))
        G = apply_jet_equivalence(psi, F)
        r, p, A = rand_jets(rng, 2, 1000)
        assert np.abs(G.value(None, r, p, A) - F.value(None, r, p, A)).max() < 1e-14

    def test_linear_operator_trace_oracle(self):
        # T = diag(4,1), W=0, B=0, b=1, f(r)=r: membership is tr(T A) >= r
        rng = np.random.default_rng(13)
        T = np.diag([4.0, 1.0])
        FL = linear_jetequiv(T, f=LIN)
        r, p, A = rand_jets(rng, 2, 10_000)
        lhs = FL.value(None, r, p, A)
        rhs = np.einsum("ij,nji->n", T, A) - r
        assert np.abs(lhs - rhs).max() < 1e-10

    def test_full_linear_operator(self):
        # tr(T A) + <W, p> + B >= b f(r)
        rng = np.random.default_rng(14)
        T = np.array([[2.0, 0.5], [0.5, 1.0]])
        W = np.array([0.3, -0.7])
        B, b = 0.9, 2.0
        FL = linear_jetequiv(T, W, B, b, f=LIN)
        r, p, A = rand_jets(rng, 2, 5000)
        lhs = FL.value(None, r, p, A)
        rhs = (np.einsum("ij,nji->n", T, A) + p @ W + B) / b - r
        assert np.abs(lhs - rhs).max() < 1e-10

    def test_duality_commutes(self):
        # dual of the transported member = transport of the dual model
        rng = np.random.default_rng(15)
        T = np.diag([4.0, 1.0])
        FL = linear_jetequiv(T, f=LIN)
        r, p, A = rand_jets(rng, 2, 5000)
        lhs = dual(FL).value(None, r, p, A)
        rhs = -FL.value(None, -r, -p, -A)
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_invertibility_checked(self):
        with pytest.raises(ConstructionError):
            JetEquivalence(2, np.zeros((2, 2)), np.eye(2))

    def test_roundtrip_inverse(self):
        rng = np.random.default_rng(16)
        L = rng.standard_normal((2, 2, 2))
        L = 0.5 * (L + np.swapaxes(L, 1, 2))
        psi = JetEquivalence(2, np.array([[2.0, 0.0], [1.0, 1.0]]),
                             np.array([[1.0, 0.3], [0.0, 0.5]]), L)
        r, p, A = rand_jets(rng, 2, 100)
        r2, p2, A2 = psi.apply(None, r, p, A)
        r3, p3, A3 = psi.inverse_apply(None, r2, p2, A2)
        assert np.abs(r3 - r).max() < 1e-10
        assert np.abs(p3 - p).max() < 1e-10
        assert np.abs(A3 - A).max() < 1e-10


class TestDistanceToBoundary:
    def test_eikonal_analytic(self):
        E = eikonal(1.0, m=2)
        d = distance_to_boundary(E, None, Jet(0.0, np.array([0.25, 0.0]), SymMatrix.zero(2)))
        assert d.found and abs(d.value - 0.75) < 1e-6

    def test_laplace_ray_oracle(self):
        # dense-ray oracle: minimum crossing distance over many random fiber rays
        F = laplace(ZERO, m=2)
        jet = Jet(0.0, np.zeros(2), SymMatrix.identity(2))
        d = distance_to_boundary(F, None, jet)
        rng = np.random.default_rng(17)
        best = np.inf
        from subeq.subequations import _jet_coords, _coords_to_jet
        c0 = _jet_coords(jet.r, jet.p, jet.A.full)
        for _ in range(4000):
            ray = rng.standard_normal(c0.size)
            ray /= np.linalg.norm(ray)
            lo, hi = 0.0, None
            t = 0.25
            while t < 64:
                rr, pp, AA = _coords_to_jet(c0 + t * ray, 2)
                if F.value(None, rr, pp, AA)[0] < 0:
                    hi = t
                    break
                lo = t
                t *= 1.5
            if hi is None:
                continue
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                rr, pp, AA = _coords_to_jet(c0 + mid * ray, 2)
                if F.value(None, rr, pp, AA)[0] < 0:
                    hi = mid
                else:
                    lo = mid
            best = min(best, hi)
        assert abs(d.value - np.sqrt(2)) < 1e-4
        assert d.value <= best + 1e-4

    def test_boundary_jet_zero(self):
        E = eikonal(1.0, m=2)
        d = distance_to_boundary(E, None, Jet(0.0, np.array([1.0, 0.0]), SymMatrix.zero(2)))
        assert d.value == pytest.approx(0.0, abs=1e-9)

    def test_no_boundary_in_radius(self):
        d = distance_to_boundary(whole_space(2), None,
                                 Jet(0.0, np.zeros(2), SymMatrix.zero(2)))
        assert not d.found and np.isinf(d.value)


class TestAuditPNT:
    def test_catalog_clean(self):
        for m in (2, 3):
            for F in catalog(m):
                cert = audit_PNT(F, n=20_000, seed=0)
                assert cert.passed, (F.meta.tag, cert.worst, cert.counts)

    def test_broken_negativity_reported(self):
        from subeq.subequations import Subequation, SubeqMeta

        class BrokenN(Subequation):
            def __init__(self):
                super().__init__(2, SubeqMeta(tag="broken_r"))

            def _value(self, x, r, p, A):
                return r.copy()

        cert = audit_PNT(BrokenN(), n=20_000, seed=0)
        assert not cert.passed
        assert cert.counts["N_violations"] > 0

    def test_intersection_clean(self):
        F = intersect(hessian_branch(1, LIN, m=2), eikonal(XI1, m=2))
        cert = audit_PNT(F, n=20_000, seed=1)
        assert cert.counts["P_violations"] == 0
        assert cert.counts["N_violations"] == 0


class TestProfiles:
    def test_flags(self):
        assert Profile.linear(1.0).flags["f1"]
        assert not Profile.linear(1.0).flags["f1_prime"]
        assert Profile.constant(1.0).flags["xi0"]
        assert XI1.flags["xi1"]
        f1p = Profile.table([-2.0, -1.0, 0.0, 1.0], [-1.0, 0.0, 0.0, 1.0])
        assert f1p.flags["f1_prime"] and not f1p.flags["f1"]

    def test_monotone_required(self):
        with pytest.raises(ConstructionError):
            Profile.table([0.0, 1.0, 2.0], [0.0, 1.0, 0.5])

    def test_reflect_involution(self):
        f = Profile.table([-1.0, 0.0, 2.0], [-3.0, 0.0, 1.0])
        g = f.reflect().reflect()
        xs = np.linspace(-3, 3, 50)
        assert np.abs(f(xs) - g(xs)).max() < 1e-14

    def test_flat_extension(self):
        f = Profile.table([0.0, 1.0], [0.0, 2.0])
        assert f(-5.0) == 0.0 and f(7.0) == 2.0

    def test_invalid_profile_flags_raise(self):
        decreasing = Profile.table([0.0, 1.0], [1.0, 0.0])
        with pytest.raises(ConstructionError):
            laplace(decreasing, m=2)
        negative_xi = Profile.linear(1.0)
        with pytest.raises(ConstructionError):
            eikonal(negative_xi, m=2)
