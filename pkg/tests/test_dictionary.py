import numpy as np
import pytest

from greedyapprox.dictionary import (
    AtomSet,
    DeadAtomError,
    Dictionary,
    NoLiveAtomsError,
    atom_eval,
    dyadic_offsets,
    normalize,
    select_max_correlation,
    sphere_directions,
    truncation_size,
)
from greedyapprox.hilbert import SpaceContext, norm


class TestAtomEval:
    def test_canonical(self):
        np.testing.assert_array_equal(atom_eval(Dictionary.canonical(4), 2, np.arange(4)), [0, 0, 1, 0])

    def test_heaviside_step_at_zero(self):
        d = Dictionary.ridge(1, "heaviside", directions=[[1.0]], offsets=[0.0], absolute_offsets=True)
        np.testing.assert_array_equal(d.atom_eval(0, np.array([[-1.0], [1.0]])), [0, 1])

    def test_logistic_half_at_zero(self):
        d = Dictionary.ridge(2, "logistic", directions=[[0.0, 0.0]], offsets=[0.0], absolute_offsets=True)
        pts = np.random.default_rng(0).uniform(-3, 3, (5, 2))
        np.testing.assert_allclose(d.atom_eval(0, pts), 0.5)

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            Dictionary.canonical(3).atom_eval(3, np.arange(3))

    def test_dct_orthonormal(self):
        d = Dictionary.union_of_bases(16, ["dct"])
        V = d.evaluate(np.arange(16))
        np.testing.assert_allclose(V @ V.T, np.eye(16), atol=1e-12)

    def test_union_interleaves_bases(self):
        d = Dictionary.union_of_bases(8, ["canonical", "dct"])
        assert d.size == 16
        np.testing.assert_array_equal(d.atom_eval(2, np.arange(8)), np.eye(8)[1])
        np.testing.assert_allclose(d.atom_eval(1, np.arange(8)), np.full(8, np.sqrt(1 / 8)))

    def test_deterministic(self):
        d1 = Dictionary.ridge(3, "logistic", n_directions=5)
        d2 = Dictionary.ridge(3, "logistic", n_directions=5)
        pts = np.random.default_rng(1).uniform(0, 1, (10, 3))
        np.testing.assert_array_equal(d1.evaluate(pts), d2.evaluate(pts))


class TestRidgeGrid:
    def test_offsets_coarse_to_fine(self):
        np.testing.assert_allclose(dyadic_offsets(1), [0, -0.5, 0.5])
        off = dyadic_offsets(3)
        assert off.size == 15
        assert len(set(off.round(12))) == 15

    def test_prefix_nesting(self):
        assert np.array_equal(dyadic_offsets(4)[:7], dyadic_offsets(2))

    def test_directions_unit(self):
        v = sphere_directions(20, 4)
        np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)
        np.testing.assert_array_equal(sphere_directions(2, 1), [[1.0], [-1.0]])

    def test_exhaustion_offset_major(self):
        d = Dictionary.ridge(1, "heaviside", offset_levels=1)
        assert d.size == 6
        x = np.linspace(0.005, 0.995, 100)[:, None]
        # first two atoms share the central threshold, opposite directions
        v = d.evaluate(x, m=2)
        np.testing.assert_array_equal(v[0] + v[1], 1.0)

    def test_thresholds_span_domain(self):
        d = Dictionary.ridge(1, "heaviside", offset_levels=3, domain=(2.0, 4.0))
        x = np.linspace(2.0, 4.0, 401)[:, None]
        V = d.evaluate(x)
        assert np.all(V.sum(axis=1) > 0)
        assert np.all(V.sum(axis=1) < x.shape[0])


class TestNormalize:
    def test_half_support(self):
        n = 8
        ctx = SpaceContext.empirical(n)
        d = Dictionary.ridge(1, "heaviside", directions=[[1.0]], offsets=[-0.5], absolute_offsets=True)
        x = np.linspace(0.05, 0.95, n)[:, None]
        g = normalize(d, 0, ctx, x)
        np.testing.assert_allclose(g, np.where(x[:, 0] > 0.5, np.sqrt(2), 0.0))

    def test_canonical_unchanged(self):
        ctx = SpaceContext.euclidean(5)
        np.testing.assert_array_equal(normalize(Dictionary.canonical(5), 3, ctx), np.eye(5)[3])

    def test_zero_atom_dead(self):
        d = Dictionary.ridge(1, "heaviside", directions=[[1.0]], offsets=[-10.0], absolute_offsets=True)
        ctx = SpaceContext.empirical(3)
        x = np.array([[0.1], [0.2], [0.3]])
        with pytest.raises(DeadAtomError):
            normalize(d, 0, ctx, x)
        A = d.materialize(ctx, x)
        assert A.live[0] == 0
        with pytest.raises(DeadAtomError):
            A.vector(0)

    def test_dead_depends_on_sample(self):
        d = Dictionary.ridge(1, "heaviside", directions=[[1.0]], offsets=[-0.5], absolute_offsets=True)
        ctx = SpaceContext.empirical(2)
        assert d.materialize(ctx, np.array([[0.1], [0.2]])).live[0] == 0
        assert d.materialize(ctx, np.array([[0.1], [0.7]])).live[0] == 1

    def test_random_ridge_unit_norm(self):
        rng = np.random.default_rng(5)
        d = Dictionary.ridge(2, "logistic", n_directions=10, offset_levels=3, sharpness=4.0)
        for _ in range(10):
            n = int(rng.integers(3, 40))
            x = rng.uniform(0, 1, (n, 2))
            ctx = SpaceContext(rng.uniform(0.1, 1.0, n))
            A = d.materialize(ctx, x)
            for i in np.flatnonzero(A.live):
                assert abs(norm(ctx, A.vectors[i]) - 1) <= 1e-10


class TestSelect:
    def test_by_inspection(self):
        ctx = SpaceContext.euclidean(3)
        assert select_max_correlation(Dictionary.canonical(3), 3, ctx, [0.9, -1.1, 0.3]) == (1, -1.1)

    def test_orthogonal_residual_tie_to_zero(self):
        ctx = SpaceContext.euclidean(4)
        d = Dictionary.canonical(4)
        i, c = select_max_correlation(d, 2, ctx, [0, 0, 1, 1])
        assert (i, c) == (0, 0.0)

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(2)
        d = Dictionary.ridge(1, "logistic", offset_levels=2, sharpness=5.0)
        x = rng.uniform(0, 1, (30, 1))
        ctx = SpaceContext.empirical(30)
        r = rng.standard_normal(30)
        i, c = select_max_correlation(d, 6, ctx, r, x)
        scores = [abs(np.dot(ctx.weights * r, normalize(d, j, ctx, x))) for j in range(6)]
        assert i == int(np.argmax(scores))
        assert abs(c) == pytest.approx(max(scores), rel=1e-12)

    def test_tie_lowest_index(self):
        ctx = SpaceContext.euclidean(2)
        A = AtomSet.from_raw([[0, 1], [1, 0], [1, 0]], ctx)
        assert A.select([1, 0])[0] == 1

    def test_all_dead(self):
        ctx = SpaceContext.euclidean(2)
        A = AtomSet.from_raw(np.zeros((3, 2)), ctx)
        with pytest.raises(NoLiveAtomsError):
            A.select([1, 1])

    def test_larger_prefix_never_worse(self):
        rng = np.random.default_rng(3)
        d = Dictionary.explicit(rng.standard_normal((40, 10)))
        ctx = SpaceContext.euclidean(10)
        r = rng.standard_normal(10)
        vals = [abs(select_max_correlation(d, m, ctx, r)[1]) for m in range(1, 41)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_m_must_be_positive(self):
        with pytest.raises(ValueError):
            select_max_correlation(Dictionary.canonical(2), 0, SpaceContext.euclidean(2), [1, 0])


class TestTruncationSize:
    def test_values(self):
        assert truncation_size(10, 2) == 100
        assert truncation_size(1, 3.7) == 1
        assert truncation_size(7, 1.5) == 18

    def test_cap(self):
        assert truncation_size(100, 2, total=254) == 254

    def test_exact_powers(self):
        for n in range(1, 200):
            assert truncation_size(n, 2) == n * n
            assert truncation_size(n, 1) == n


class TestConfig:
    def test_round_trip(self):
        for d in (Dictionary.canonical(7), Dictionary.union_of_bases(8, ["dct", "canonical"]),
                  Dictionary.ridge(2, "logistic", n_directions=6, offset_levels=3, sharpness=2.0)):
            cfg = {k: str(v) for k, v in d.to_config().items()}
            d2 = Dictionary.from_config(cfg)
            assert d2.size == d.size
            pts = d.default_points() if d.grid_dim else np.random.default_rng(0).uniform(0, 1, (9, 2))
            np.testing.assert_array_equal(d.evaluate(pts), d2.evaluate(pts))

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            Dictionary.from_config({"kind": "orthonormal_canonical", "dim": "3", "colour": "red"})

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Dictionary.from_config({"kind": "wavelet"})
