import itertools
import math

import numpy as np
import pytest

from mmot.analysis import (
    assemble_g,
    bipartitions,
    candidate_weights,
    default_threshold,
    jacobi_eigenvalues,
    kappa_estimate,
    laplace_exponent_fit,
    sample_points,
    signature,
    uniform_weights,
)
from mmot.costs import (
    barycenter,
    degenerate_projection,
    evaluate_on_grid,
    gangbo_swiech,
    negative_harmonic,
    quadratic2,
    zero_cost,
)
from mmot.exact import duality_gap_field, lp_solve
from mmot.measures import ProductSpace, grid_marginal

from oracles import random_symmetric_with_signature, sturm_signature

ALL_COSTS = [quadratic2(2), gangbo_swiech(3, 1), gangbo_swiech(3, 2), gangbo_swiech(4, 1),
             negative_harmonic(3, 1, shift=0.0), negative_harmonic(3, 2, shift=0.0),
             degenerate_projection(), barycenter([0.1, 0.2, 0.3, 0.4])]


def pt(rng, cost):
    return tuple(rng.uniform(-1, 1, d) for d in cost.dims)


class TestBipartitions:
    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
    def test_count_and_canonical(self, m):
        parts = bipartitions(m)
        assert len(parts) == 2 ** (m - 1) - 1
        assert len({p.left for p in parts}) == len(parts)
        for p in parts:
            assert 0 in p.left and p.left | p.right == frozenset(range(m))


class TestAssembleG:
    def test_quadratic2(self):
        G = assemble_g(quadratic2(1), (0.1, 0.7), [1.0])
        np.testing.assert_array_equal(G, [[0, -2], [-2, 0]])
        sig, ev, _ = signature(G, return_eigenvalues=True)
        np.testing.assert_allclose(ev, [-2, 2], atol=1e-14)
        assert sig == (1, 1, 0)

    def test_zero_cost(self, rng):
        c = zero_cost((2, 1, 3))
        G = assemble_g(c, pt(rng, c), uniform_weights(3))
        assert np.all(G == 0) and signature(G) == (0, 0, 6)

    def test_gangbo_swiech_uniform(self):
        G = assemble_g(gangbo_swiech(3, 1), (0.0, 0.5, 1.0), uniform_weights(3))
        # every pair is straddled by two of the three bipartitions
        expected = -4.0 / 3.0 * (np.ones((3, 3)) - np.eye(3))
        np.testing.assert_allclose(G, expected, atol=1e-15)
        assert signature(G) == (2, 1, 0)

    def test_simplex_violation(self):
        with pytest.raises(ValueError):
            assemble_g(gangbo_swiech(3, 1), (0, 0, 0), [0.5, 0.6, -0.1])
        with pytest.raises(ValueError):
            assemble_g(gangbo_swiech(3, 1), (0, 0, 0), [0.5, 0.6, 0.1])

    @pytest.mark.parametrize("cost", ALL_COSTS, ids=lambda c: f"{c.name}{c.dims}")
    def test_affine_in_t(self, cost, rng):
        k = 2 ** (cost.arity - 1) - 1
        for _ in range(10):
            x = pt(rng, cost)
            t1, t2 = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
            mid = assemble_g(cost, x, 0.5 * (t1 + t2))
            avg = 0.5 * (assemble_g(cost, x, t1) + assemble_g(cost, x, t2))
            assert np.abs(mid - avg).max() <= 1e-12
            np.testing.assert_allclose(mid, mid.T, atol=1e-10 * max(1, np.linalg.norm(mid)))


class TestSignature:
    def test_identity(self):
        assert signature(np.eye(3)) == (3, 0, 0)

    def test_diag(self):
        assert signature(np.diag([2.0, -1.0, 0.0])) == (1, 1, 1)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError):
            signature(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_sturm_oracle(self, rng):
        for _ in range(20):
            A, planted = random_symmetric_with_signature(rng, 6)
            thr = default_threshold(A)
            assert signature(A) == sturm_signature(A, thr) == planted

    def test_sturm_oracle_zero_matrix(self):
        Z = np.zeros((3, 3))
        assert signature(Z) == sturm_signature(Z, default_threshold(Z)) == (0, 0, 3)

    def test_negation_swaps(self, rng):
        for _ in range(20):
            A, _ = random_symmetric_with_signature(rng, 5)
            p, n, z = signature(A)
            assert signature(-A) == (n, p, z)

    def test_trace_and_frobenius(self, rng):
        for n in (1, 2, 5, 8):
            A = rng.normal(size=(n, n))
            A = A + A.T
            ev = jacobi_eigenvalues(A)
            assert ev.sum() == pytest.approx(np.trace(A), rel=1e-10, abs=1e-12)
            assert np.linalg.norm(ev) == pytest.approx(np.linalg.norm(A), rel=1e-10)

    def test_tiny_offdiagonal_no_overflow(self):
        A = np.array([[1.0, 1e-200], [1e-200, 2.0]])
        np.testing.assert_allclose(jacobi_eigenvalues(A), [1.0, 2.0])


class TestKnownSignatures:
    def test_gs_bar_g(self, rng):
        # ((m-1)d, d, 0) for the uniform form of the Gangbo-Swiech cost
        for m, d in [(3, 1), (3, 2), (4, 1), (4, 2)]:
            c = gangbo_swiech(m, d)
            assert signature(assemble_g(c, pt(rng, c), uniform_weights(m))) == ((m - 1) * d, d, 0)

    def test_negative_harmonic_bar_g(self, rng):
        for m, d in [(3, 1), (3, 2), (4, 1)]:
            c = negative_harmonic(m, d, shift=0.0)
            assert signature(assemble_g(c, pt(rng, c), uniform_weights(m))) == (d, (m - 1) * d, 0)

    def test_degenerate_projection(self, rng):
        c = degenerate_projection()
        assert signature(assemble_g(c, pt(rng, c), [1.0])) == (1, 1, 2)


class TestKappa:
    def test_gangbo_swiech_d2(self, rng):
        c = gangbo_swiech(3, 2)
        est = kappa_estimate(c, [pt(rng, c) for _ in range(5)], rng=0)
        assert est.kappa == 4 and est.upper_bound == 4

    def test_negative_harmonic_d1(self, rng):
        c = negative_harmonic(3, 1, shift=0.0)
        assert kappa_estimate(c, [pt(rng, c) for _ in range(5)], rng=0).kappa == 1

    def test_degenerate(self, rng):
        c = degenerate_projection()
        est = kappa_estimate(c, [pt(rng, c) for _ in range(5)], rng=0)
        assert est.kappa == 1
        assert all(r.signature == (1, 1, 2) for r in est.per_point)

    def test_bound_holds(self, rng):
        for c in ALL_COSTS:
            est = kappa_estimate(c, [pt(rng, c) for _ in range(3)], extra_samples=8, rng=1)
            assert all(r.signature[0] <= sum(c.dims) - max(c.dims) for r in est.per_point)

    def test_guards(self, rng):
        c = gangbo_swiech(7, 1)
        with pytest.raises(ValueError):
            kappa_estimate(c, [pt(rng, c)])
        with pytest.raises(ValueError):
            kappa_estimate(gangbo_swiech(3, 1), [])

    def test_candidates(self):
        assert len(candidate_weights(2)) == 1
        assert len(candidate_weights(3, 5, rng=0)) == 3 + 1 + 5

    def test_sample_points_include_support(self):
        mu = grid_marginal([0], [1], 5)
        space = ProductSpace((mu, mu))
        pts = sample_points(space, 3, support=[(0, 0), (4, 4)], rng=0)
        assert pts[0][0][0] == mu.points[0, 0] and pts[1][1][0] == mu.points[4, 0]
        assert 3 <= len(pts) <= 5


class TestLaplace:
    def test_zero_field(self):
        mu = grid_marginal([0], [1], 4)
        fit = laplace_exponent_fit(np.zeros((4, 4)), [mu, mu], [1e-1, 1e-2, 1e-3, 1e-4])
        np.testing.assert_allclose(fit.integrals, 1.0)
        assert abs(fit.exponent) < 1e-12

    def test_gaussian_quadrature_oracle(self):
        mu = grid_marginal([-1], [1], 200_001)
        E = mu.points[:, 0] ** 2
        eps = np.logspace(-4, -2, 5)
        fit = laplace_exponent_fit(E, [mu], eps)
        assert abs(fit.exponent - 0.5) <= 0.05
        # I(eps) ~ sqrt(pi eps) / 2 for the uniform density 1/2 on [-1, 1]
        np.testing.assert_allclose(fit.integrals, np.sqrt(np.pi * eps) / 2, rtol=1e-3)

    def test_quadratic2_lp_potentials(self):
        mu = grid_marginal([0], [1], 256)
        space = ProductSpace((mu, mu))
        C = evaluate_on_grid(quadratic2(), space)
        E = duality_gap_field(lp_solve(space, C).potentials, C)
        fit = laplace_exponent_fit(E, space.marginals, np.logspace(-4, -2, 5))
        assert abs(fit.exponent - 0.5) <= 0.1

    def test_negative_field_rejected(self):
        mu = grid_marginal([0], [1], 2)
        with pytest.raises(ValueError):
            laplace_exponent_fit(np.array([-1.0, 0.0]), [mu], [1e-1, 1e-2, 1e-3, 1e-4])

    def test_underflow_rejected(self):
        mu = grid_marginal([0], [1], 2)
        with pytest.raises(ValueError):
            laplace_exponent_fit(np.array([1e3, 1e3]), [mu], [1e-2, 1e-3, 1e-4, 1e-5])

    def test_too_few_epsilons(self):
        mu = grid_marginal([0], [1], 2)
        with pytest.raises(ValueError):
            laplace_exponent_fit(np.zeros(2), [mu], [1e-1, 1e-2, 1e-3])
