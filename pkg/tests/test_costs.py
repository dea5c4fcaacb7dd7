import itertools

import numpy as np
import pytest

from mmot.costs import (
    barycenter,
    cost_from_dict,
    degenerate_projection,
    evaluate_on_grid,
    fd_mixed_hessian,
    gangbo_swiech,
    mixed_hessian,
    negative_harmonic,
    quadratic2,
    zero_cost,
)
from mmot.entropic import SinkhornConfig, sinkhorn_solve
from mmot.exact import lp_solve
from mmot.measures import ProductSpace, grid_marginal

BUILTINS = [
    quadratic2(1),
    quadratic2(2),
    gangbo_swiech(3, 1),
    gangbo_swiech(3, 2),
    gangbo_swiech(4, 1),
    negative_harmonic(3, 2, shift=10.0),
    degenerate_projection(),
    barycenter([0.2, 0.3, 0.5], d=2),
    barycenter(m=4),
]


def random_point(rng, cost):
    return tuple(rng.uniform(-2, 2, size=d) for d in cost.dims)


class TestMixedHessian:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_gangbo_swiech(self, d, rng):
        c = gangbo_swiech(3, d)
        for i, j in [(0, 1), (2, 0)]:
            np.testing.assert_array_equal(mixed_hessian(c, i, j, random_point(rng, c)),
                                          -2 * np.eye(d))

    def test_negative_harmonic(self, rng):
        c = negative_harmonic(3, 2, shift=1.0)
        np.testing.assert_array_equal(mixed_hessian(c, 1, 2, random_point(rng, c)), 2 * np.eye(2))

    def test_degenerate_projection(self, rng):
        c = degenerate_projection()
        np.testing.assert_array_equal(mixed_hessian(c, 0, 1, random_point(rng, c)),
                                      [[-2, 0], [0, 0]])

    def test_diagonal_block_rejected(self):
        with pytest.raises(ValueError):
            mixed_hessian(quadratic2(), 0, 0, (0.0, 1.0))

    @pytest.mark.parametrize("cost", BUILTINS, ids=lambda c: f"{c.name}{c.dims}")
    def test_fd_matches_analytic(self, cost):
        # the finite-difference estimate is an independent oracle for the
        # hand-derived blocks
        rng = np.random.default_rng(7)
        for _ in range(100):
            pt = random_point(rng, cost)
            for i, j in itertools.permutations(range(cost.arity), 2):
                A = mixed_hessian(cost, i, j, pt)
                F = fd_mixed_hessian(cost, i, j, pt)
                err = np.linalg.norm(F - A) / max(np.linalg.norm(A), 1.0)
                assert err <= 1e-5

    @pytest.mark.parametrize("cost", BUILTINS, ids=lambda c: f"{c.name}{c.dims}")
    def test_transpose_symmetry(self, cost, rng):
        for _ in range(10):
            pt = random_point(rng, cost)
            for i, j in itertools.combinations(range(cost.arity), 2):
                np.testing.assert_allclose(mixed_hessian(cost, i, j, pt),
                                           mixed_hessian(cost, j, i, pt).T, atol=1e-8)
                F1 = fd_mixed_hessian(cost, i, j, pt)
                F2 = fd_mixed_hessian(cost, j, i, pt).T
                assert np.linalg.norm(F1 - F2) <= 1e-6 * max(np.linalg.norm(F1), 1.0)

    def test_opposite_signs(self, rng):
        gs, nh = gangbo_swiech(3, 2), negative_harmonic(3, 2, shift=0.0)
        for _ in range(20):
            pt = random_point(rng, gs)
            np.testing.assert_array_equal(mixed_hessian(gs, 0, 2, pt), -mixed_hessian(nh, 0, 2, pt))


class TestEvaluate:
    def test_quadratic2_symmetric_zero_diagonal(self):
        mu = grid_marginal([0], [1], 7)
        C = evaluate_on_grid(quadratic2(), ProductSpace((mu, mu)))
        np.testing.assert_array_equal(C, C.T)
        assert np.all(np.diag(C) == 0)

    def test_gs_two_marginals_is_quadratic2(self):
        a, b = grid_marginal([0, 0], [1, 1], 3), grid_marginal([0, 0], [2, 1], 4)
        space = ProductSpace((a, b))
        np.testing.assert_array_equal(evaluate_on_grid(gangbo_swiech(2, 2), space),
                                      evaluate_on_grid(quadratic2(2), space))

    def test_negative_harmonic_shift_scan(self):
        mu = grid_marginal([-1], [2], 9)
        space = ProductSpace((mu, mu, mu))
        nh = negative_harmonic(3, 1, space=space)
        C = evaluate_on_grid(nh, space)
        gs = evaluate_on_grid(gangbo_swiech(3, 1), space)
        assert nh.nonneg_shift == gs.max()
        assert C.min() >= 0.0
        # independent scan of the raw pairwise sum
        raw = max(sum((p[a] - p[b]) ** 2 for a, b in [(0, 1), (0, 2), (1, 2)])
                  for p in itertools.product(mu.points[:, 0], repeat=3))
        assert C.min() == pytest.approx(0.0, abs=1e-12)
        assert nh.nonneg_shift == pytest.approx(raw, rel=1e-14)

    def test_negative_values_rejected(self):
        mu = grid_marginal([0], [1], 3)
        with pytest.raises(ValueError):
            evaluate_on_grid(negative_harmonic(2, 1, shift=0.0), ProductSpace((mu, mu)))

    def test_dims_mismatch(self):
        mu = grid_marginal([0], [1], 3)
        with pytest.raises(ValueError):
            evaluate_on_grid(degenerate_projection(), ProductSpace((mu, mu)))

    def test_barycenter_matches_definition(self, rng):
        lam = np.array([0.5, 0.25, 0.25])
        c = barycenter(lam)
        xs = rng.random(3)
        t = lam @ xs
        assert c(*xs) == pytest.approx(float(lam @ (xs - t) ** 2), rel=1e-14)

    def test_zero_cost(self):
        mu = grid_marginal([0], [1], 3)
        assert np.all(evaluate_on_grid(zero_cost((1, 1)), ProductSpace((mu, mu))) == 0)


def test_gangbo_swiech_permutation_symmetry(rng):
    c = gangbo_swiech(4, 2)
    for _ in range(20):
        pt = list(random_point(rng, c))
        base = c(*pt)
        for perm in itertools.permutations(range(4)):
            assert c(*[pt[k] for k in perm]) == pytest.approx(base, rel=1e-15)


def test_shift_leaves_gap_invariant():
    mu = grid_marginal([0], [1], 8)
    nu = grid_marginal([0], [1], 8, "cos2")
    space = ProductSpace((mu, nu, mu))
    gaps = []
    for K in (None, 5.0):
        nh = negative_harmonic(3, 1, shift=K, space=space)
        C = evaluate_on_grid(nh, space)
        v0 = lp_solve(space, C).value
        ve = sinkhorn_solve(space, C, SinkhornConfig(epsilon=0.1)).dual_value
        gaps.append((ve - v0, v0, nh.nonneg_shift))
    (g1, v1, k1), (g2, v2, k2) = gaps
    assert v2 - v1 == pytest.approx(k2 - k1, abs=1e-10)
    assert g1 == pytest.approx(g2, abs=1e-8)


def test_cost_from_dict():
    mu = grid_marginal([0], [1], 4)
    space = ProductSpace((mu, mu, mu))
    assert cost_from_dict({"name": "gangbo_swiech"}, space).name == "gangbo_swiech"
    b = cost_from_dict({"name": "barycenter", "lambda": [0.2, 0.3, 0.5]}, space)
    assert b.params["lambda"] == [0.2, 0.3, 0.5]
    with pytest.raises(ValueError):
        cost_from_dict({"name": "coulomb"}, space)
    with pytest.raises(ValueError):
        cost_from_dict({"name": "quadratic2"}, space)
