"""Model geometry, discrete jets, exhaustions and the volume-growth test."""
import numpy as np
import pytest

from subeq.errors import DomainError, InputError
from subeq.manifolds import (
    Exhaustion,
    FlatBox,
    GridFunction,
    PuncturedEuclidean,
    RadialModel,
    batch_jets,
    discrete_jet,
    make_exhaustion,
    radial_hessian_eigs,
    volume_growth_test,
)


class TestRadialHessian:
    def test_euclidean_square(self):
        # phi = r^2 on g = r: Hessian of |x|^2 is 2I
        eigs = radial_hessian_eigs(2.0 * 1.5, 2.0, 1.5, "euclidean", 3)
        assert np.allclose(eigs, [2.0, 2.0, 2.0])

    def test_hyperbolic_cosh(self):
        # phi = cosh on g = sinh: phi'' = cosh, phi' g'/g = sinh coth = cosh
        r = 1.3
        eigs = radial_hessian_eigs(np.sinh(r), np.cosh(r), r, "sinh", 2)
        assert np.allclose(eigs, [np.cosh(r)] * 2)

    def test_distance_function(self):
        # phi = r on g = r: radial 0, angular 1/r
        r = 2.0
        eigs = radial_hessian_eigs(1.0, 0.0, r, "euclidean", 3)
        assert np.allclose(eigs, [0.0, 0.5, 0.5])

    def test_nonpositive_warp_rejected(self):
        with pytest.raises(DomainError):
            radial_hessian_eigs(1.0, 0.0, -1.0, "euclidean", 2)


class TestDiscreteJet:
    def test_affine_exact(self):
        M = FlatBox(2, [(0.0, 1.0), (0.0, 1.0)], 0.1)
        u = GridFunction.from_callable(M, lambda c: c[:, 0])
        j = discrete_jet(u, M.interior_ids[7])
        assert np.allclose(j.p, [1.0, 0.0])
        assert np.abs(j.A.full).max() <= 1e-8

    def test_quadratic_exact(self):
        M = FlatBox(2, [(0.0, 1.0), (0.0, 1.0)], 0.05)
        u = GridFunction.from_callable(M, lambda c: 0.5 * (c**2).sum(axis=1))
        j = discrete_jet(u, M.interior_ids[11])
        assert np.abs(j.A.full - np.eye(2)).max() < 1e-9

    def test_wide_stencil_quadratic_exact(self):
        M = FlatBox(2, [(0.0, 1.0), (0.0, 1.0)], 0.05)
        u = GridFunction.from_callable(
            M, lambda c: c[:, 0] ** 2 + 0.5 * c[:, 0] * c[:, 1] - c[:, 1] ** 2)
        ids = M.interior_ids_depth(2)
        j = discrete_jet(u, ids[5], scheme="monotone-wide")
        assert np.abs(j.A.full - np.array([[2.0, 0.5], [0.5, -2.0]])).max() < 1e-8

    def test_harmonic_oracle_punctured(self):
        # u = 2/r - 1 on the m=3 punctured annulus: discrete trace = O(h^2)
        M = PuncturedEuclidean(3, 1.0, 2.0, 200)
        u = GridFunction(M, 2.0 / M.r - 1.0)
        _, _, _, A = batch_jets(u)
        tr = np.trace(A, axis1=1, axis2=2)
        h = np.diff(M.r).max()
        assert np.abs(tr).max() <= 20 * h**2

    def test_second_order_refinement(self):
        # smooth test function: error(h)/error(h/2) in [3.5, 4.5]
        errs = []
        for n in (101, 201):
            M = RadialModel.uniform(2, "euclidean", 1.0, 2.0, n)
            u = GridFunction(M, np.sin(2.0 * M.r))
            ids, _, p, A = batch_jets(u)
            exact_d2 = -4.0 * np.sin(2.0 * M.r[ids])
            errs.append(np.abs(A[:, 0, 0] - exact_d2).max())
        ratio = errs[0] / errs[1]
        assert 3.5 <= ratio <= 4.5

    def test_monotone_wide_directional_monotonicity(self):
        # raising any off-node value never decreases any directional second
        # difference (comparison-compatible discretization)
        from subeq.manifolds import _directional_second_differences, _line_directions
        M = FlatBox(2, [(0.0, 1.0), (0.0, 1.0)], 0.25)
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(M.n_nodes)
        ids = M.interior_ids_depth(2)
        dirs = _line_directions(2, 2, 8)
        base, _ = _directional_second_differences(vals, M, ids, dirs)
        for node in range(M.n_nodes):
            if node in ids:
                continue
            bumped = vals.copy()
            bumped[node] += 0.7
            new, _ = _directional_second_differences(bumped, M, ids, dirs)
            assert np.all(new >= base - 1e-12)

    def test_boundary_proximity_error(self):
        M = FlatBox(1, [(0.0, 1.0)], 0.1)
        u = GridFunction(M, np.zeros(M.n_nodes))
        with pytest.raises(DomainError):
            discrete_jet(u, 0)

    def test_usc_flagged_nodes_skipped(self):
        M = FlatBox(1, [(0.0, 1.0)], 0.1)
        vals = np.zeros(M.n_nodes)
        vals[5] = -np.inf
        mask = np.zeros(M.n_nodes, dtype=bool)
        mask[5] = True
        u = GridFunction(M, vals, neg_inf_mask=mask)
        ids, _, _, _ = batch_jets(u)
        assert 5 not in ids

    def test_gradient_cache_used(self):
        M = RadialModel.uniform(2, "euclidean", 1.0, 2.0, 51)
        grad = np.full(M.n_nodes, 7.0)
        u = GridFunction(M, np.zeros(M.n_nodes), grad=grad)
        _, _, p, _ = batch_jets(u)
        assert np.all(p[:, 0] == 7.0)


class TestRadialAgainstDiscrete:
    def test_radial_formula_matches_discrete(self):
        M = RadialModel.uniform(3, "sinh", 0.5, 3.0, 400)
        phi = np.cosh(M.r)
        u = GridFunction(M, phi)
        ids, _, p, A = batch_jets(u)
        h = M.min_spacing()
        for k in (10, 200, 380):
            i = ids[k]
            exact = radial_hessian_eigs(np.sinh(M.r[i]), np.cosh(M.r[i]),
                                        M.r[i], "sinh", 3)
            got = np.sort(np.linalg.eigvalsh(A[k]))
            assert np.abs(got - exact).max() < 30 * h**2


class TestVolumeGrowth:
    def test_sinh_diverges(self):
        v, tr = volume_growth_test("sinh", 3, 10.0)
        assert v == "Diverges"
        assert abs(tr["slope"]) < 0.5  # integrand tends to a constant

    def test_euclidean_diverges(self):
        v, tr = volume_growth_test("euclidean", 3, 10.0)
        assert v == "Diverges"

    def test_exp_r3_converges(self):
        v, tr = volume_growth_test("exp_r3", 2, 6.0)
        assert v == "Converges"
        assert tr["slope"] < -1.5  # integrand ~ r^-2

    def test_bad_warp_rejected(self):
        with pytest.raises((DomainError, InputError)):
            volume_growth_test({"r": [0.0, 1.0], "g": [1.0, -1.0]}, 2, 10.0)


class TestExhaustion:
    def test_flat_box_nested(self):
        M = FlatBox(2, [(0.0, 1.0), (0.0, 1.0)], 0.05)
        ex = make_exhaustion(M, 3)
        assert len(ex) >= 2
        for j in range(1, len(ex)):
            assert np.all(ex[j][ex[j - 1]])
            assert np.any(ex[j] & ~ex[j - 1])
        assert np.all(ex[-1][M.interior_mask])

    def test_radial_schedule(self):
        M = RadialModel.uniform(2, "euclidean", 0.1, 10.0, 101)
        ex = make_exhaustion(M, 4)
        assert np.all(ex[-1] == M.interior_mask)

    def test_punctured_two_sided(self):
        # members shrink toward both the puncture and the outer end
        M = PuncturedEuclidean(3, 0.1, 10.0, 201)
        ex = make_exhaustion(M, 4)
        first, last = ex[0], ex[-1]
        r_first = M.r[first]
        r_last = M.r[last]
        assert r_first.min() > r_last.min()
        assert r_first.max() < r_last.max()

    def test_too_small_rejected(self):
        M = FlatBox(1, [(0.0, 0.2)], 0.1)
        with pytest.raises(InputError):
            make_exhaustion(M, 5)

    def test_strict_nesting_enforced(self):
        M = RadialModel.uniform(2, "euclidean", 0.1, 10.0, 51)
        good = make_exhaustion(M, 3)
        with pytest.raises(InputError):
            Exhaustion(M, [good[1], good[0]])


class TestGridFunction:
    def test_interior_finiteness_enforced(self):
        M = FlatBox(1, [(0.0, 1.0)], 0.1)
        vals = np.zeros(M.n_nodes)
        vals[3] = np.nan
        with pytest.raises(InputError):
            GridFunction(M, vals)

    def test_neg_inf_requires_flag(self):
        M = FlatBox(1, [(0.0, 1.0)], 0.1)
        vals = np.zeros(M.n_nodes)
        vals[3] = -np.inf
        with pytest.raises(InputError):
            GridFunction(M, vals)
        mask = np.zeros(M.n_nodes, dtype=bool)
        mask[3] = True
        GridFunction(M, vals, neg_inf_mask=mask)  # flagged: accepted

    def test_length_checked(self):
        M = FlatBox(1, [(0.0, 1.0)], 0.1)
        with pytest.raises(InputError):
            GridFunction(M, np.zeros(3))
