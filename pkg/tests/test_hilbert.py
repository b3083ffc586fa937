import numpy as np
import pytest

from greedyapprox.hilbert import (
    DimensionError,
    GramState,
    SpaceContext,
    gram_extend,
    inner,
    norm,
    project_onto_span,
)

S = 1 / np.sqrt(2)


class TestSpaceContext:
    def test_empirical_weights(self):
        ctx = SpaceContext.empirical(4)
        np.testing.assert_allclose(ctx.weights, 0.25)
        assert ctx.dim == 4

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            SpaceContext(np.array([0.0, 0.0]))
        with pytest.raises(ValueError):
            SpaceContext(np.array([1.0, -1.0]))
        with pytest.raises(ValueError):
            SpaceContext(np.array([1.0, np.nan]))

    def test_weights_read_only(self):
        ctx = SpaceContext.euclidean(3)
        with pytest.raises(ValueError):
            ctx.weights[0] = 5.0

    def test_equality_by_weights(self):
        assert SpaceContext.empirical(3) == SpaceContext(np.full(3, 1 / 3))
        assert SpaceContext.empirical(3) != SpaceContext.euclidean(3)
        assert len({SpaceContext.empirical(3), SpaceContext(np.full(3, 1 / 3))}) == 1


class TestInner:
    def test_constant_function_unit_empirical_norm(self):
        ctx = SpaceContext(np.array([0.5, 0.5]))
        assert inner(ctx, [1, 1], [1, 1]) == pytest.approx(1.0)

    def test_disjoint_supports(self):
        ctx = SpaceContext(np.array([0.3, 2.0]))
        assert inner(ctx, [1, 0], [0, 1]) == 0.0

    def test_direct_sum(self, e3):
        assert inner(e3, [1, 2, 3], [1, 1, 1]) == pytest.approx(6.0)

    def test_symmetric_bilinear(self, rng):
        ctx = SpaceContext(rng.uniform(0, 2, 7))
        u, v, x = rng.standard_normal((3, 7))
        assert inner(ctx, u, v) == pytest.approx(inner(ctx, v, u))
        assert inner(ctx, 2 * u + x, v) == pytest.approx(2 * inner(ctx, u, v) + inner(ctx, x, v))

    def test_dimension_mismatch(self, e3):
        with pytest.raises(DimensionError):
            inner(e3, [1, 2], [1, 2])

    def test_zero_weight_coordinates_ignored(self):
        ctx = SpaceContext(np.array([1.0, 0.0]))
        assert norm(ctx, [0.0, 7.0]) == 0.0


class TestProjection:
    def test_axis(self):
        ctx = SpaceContext.euclidean(2)
        st = GramState.from_atoms(ctx, [[1, 0]])
        coeffs, proj = project_onto_span(ctx, st, [3, 4])
        np.testing.assert_allclose(proj, [3, 0])
        np.testing.assert_allclose(coeffs, [3])

    def test_full_span_identity(self, rng):
        ctx = SpaceContext.euclidean(2)
        st = GramState.from_atoms(ctx, np.eye(2))
        f = rng.standard_normal(2)
        np.testing.assert_allclose(project_onto_span(ctx, st, f)[1], f, atol=1e-15)

    def test_coherent_pair_against_lstsq(self, e3):
        atoms = np.array([[1, 0, 0], [S, S, 0]])
        st = GramState.from_atoms(e3, atoms)
        coeffs, proj = project_onto_span(e3, st, [0, 1, 1])
        np.testing.assert_allclose(proj, [0, 1, 0], atol=1e-14)
        ref, *_ = np.linalg.lstsq(atoms.T, [0, 1, 1], rcond=None)
        np.testing.assert_allclose(coeffs, ref, atol=1e-13)

    def test_incremental_coherent_pair(self, e3):
        st, _ = gram_extend(e3, GramState.empty(e3), [1, 0, 0])
        st, bad = gram_extend(e3, st, [S, S, 0])
        assert not bad
        np.testing.assert_allclose(project_onto_span(e3, st, [0, 1, 1])[1], [0, 1, 0], atol=1e-14)

    def test_one_atom(self, rng, e3):
        g = rng.standard_normal(3)
        f = rng.standard_normal(3)
        st, _ = gram_extend(e3, GramState.empty(e3), g)
        expected = np.dot(f, g) / np.dot(g, g) * g
        np.testing.assert_allclose(project_onto_span(e3, st, f)[1], expected, atol=1e-14)

    def test_empty_span_rejected(self, e3):
        with pytest.raises(ValueError):
            project_onto_span(e3, GramState.empty(e3), [1, 2, 3])

    def test_idempotent(self, rng):
        ctx = SpaceContext(rng.uniform(0.1, 1, 10))
        st = GramState.from_atoms(ctx, rng.standard_normal((4, 10)))
        _, p = project_onto_span(ctx, st, rng.standard_normal(10))
        np.testing.assert_allclose(project_onto_span(ctx, st, p)[1], p, atol=1e-12)


class TestGramState:
    def test_duplicate_atom_flagged(self, e3):
        st, _ = gram_extend(e3, GramState.empty(e3), [1, 2, 0])
        st2, bad = gram_extend(e3, st, [1, 2, 0])
        assert bad
        assert st2 is st

    def test_from_atoms_skips_dependent(self, e3):
        st = GramState.from_atoms(e3, [[1, 0, 0], [0, 1, 0], [1, 1, 0]])
        assert st.k == 2
        assert st.degenerate

    def test_factor_reproduces_gram(self, rng):
        ctx = SpaceContext(rng.uniform(0, 1, 20))
        atoms = rng.standard_normal((6, 20))
        st = GramState.from_atoms(ctx, atoms)
        G = (atoms * ctx.weights) @ atoms.T
        np.testing.assert_allclose(st.gram(), G, atol=1e-12)
        assert np.linalg.norm(st.R.T @ st.R - G) <= 1e-10 * np.linalg.norm(G)

    def test_basis_orthonormal_in_weights(self, rng):
        ctx = SpaceContext(rng.uniform(0, 1, 15))
        st = GramState.from_atoms(ctx, rng.standard_normal((5, 15)))
        Q = st.basis
        np.testing.assert_allclose((Q * ctx.weights) @ Q.T, np.eye(5), atol=1e-12)

    def test_immutable(self, e3):
        st = GramState.from_atoms(e3, [[1, 0, 0]])
        with pytest.raises(ValueError):
            st.atoms[0, 0] = 2.0

    def test_incremental_matches_batch(self, rng):
        ctx = SpaceContext.euclidean(12)
        atoms = rng.standard_normal((5, 12))
        inc = GramState.empty(ctx)
        for a in atoms:
            inc, _ = gram_extend(ctx, inc, a)
        batch = GramState.from_atoms(ctx, atoms)
        f = rng.standard_normal(12)
        c1, p1 = project_onto_span(ctx, inc, f)
        c2, p2 = project_onto_span(ctx, batch, f)
        np.testing.assert_allclose(p1, p2, atol=1e-10)
        np.testing.assert_allclose(c1, c2, atol=1e-10)

    def test_ill_conditioned_pair(self):
        # nearly parallel atoms: normal equations would square the conditioning
        ctx = SpaceContext.euclidean(3)
        eps = 1e-7
        a = np.array([1.0, 0.0, 0.0])
        b = np.array([1.0, eps, 0.0])
        st = GramState.from_atoms(ctx, [a, b])
        f = np.array([2.0, 3 * eps, 1.0])
        coeffs, proj = project_onto_span(ctx, st, f)
        np.testing.assert_allclose(coeffs, [-1.0, 3.0], rtol=1e-7)
        np.testing.assert_allclose(proj, [2.0, 3 * eps, 0.0], atol=1e-14)
