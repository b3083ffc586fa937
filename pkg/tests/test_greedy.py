import csv
import io
import math
import warnings

import numpy as np
import pytest

from greedyapprox import analysis
from greedyapprox.dictionary import AtomSet, Dictionary
from greedyapprox.greedy import (
    GreedyConfig,
    alpha,
    bound_rhs,
    residual_bound_check,
    run,
    run_oga,
    run_pga,
    run_rga,
    run_spa,
)
from greedyapprox.hilbert import SpaceContext, norm

from conftest import canonical_atoms


def cfg(alg="OGA", sched="one_minus_1_over_k", **kw):
    return GreedyConfig(alg, sched, **kw)


class TestConfig:
    def test_bad_algorithm(self):
        with pytest.raises(ValueError):
            GreedyConfig("XGA")

    def test_lambda_below_one(self):
        with pytest.raises(ValueError):
            GreedyConfig("RGA", "lambda", lam=0.5)

    def test_lambda_one_flagged(self):
        with pytest.warns(UserWarning):
            GreedyConfig("RGA", "lambda", lam=1.0)

    def test_schedules(self):
        assert [alpha(k, "one_minus_1_over_k") for k in (1, 2, 4)] == [0.0, 0.5, 0.75]
        assert [alpha(k, "one_minus_2_over_k") for k in (1, 2, 4)] == [0.0, 0.0, 0.5]
        assert [alpha(k, "lambda", 3.0) for k in (1, 3, 6)] == [0.0, 0.0, 0.5]


class TestPGA:
    def test_atom_recovered_in_one_step(self):
        ctx, A = canonical_atoms(5)
        tr = run_pga(3 * A.vectors[2], A, cfg("PGA"), ctx)
        assert tr.steps[0].residual_norm == 0.0
        assert tr.stopped_reason == "tol"

    def test_orthonormal_two_steps(self):
        ctx, A = canonical_atoms(3)
        tr = run_pga([1, 0.5, 0.25], A, cfg("PGA", max_steps=2), ctx)
        assert tr.residual_norms[-1] == pytest.approx(0.25)

    def test_orthogonal_target_stops(self):
        ctx = SpaceContext.euclidean(3)
        A = AtomSet.from_raw(np.eye(3)[:2], ctx)
        tr = run_pga([0, 0, 1], A, cfg("PGA"), ctx)
        assert tr.steps == [] and tr.stopped_reason == "tol"

    def test_energy_recursion(self, rng):
        ctx = SpaceContext.euclidean(10)
        A = Dictionary.explicit(rng.standard_normal((25, 10))).materialize(ctx)
        f = rng.standard_normal(10)
        tr = run_pga(f, A, cfg("PGA", max_steps=30), ctx)
        prev = norm(ctx, f)
        for s in tr.steps:
            assert s.residual_norm ** 2 == pytest.approx(prev ** 2 - s.beta ** 2, abs=1e-10)
            prev = s.residual_norm

    def test_reselection_accumulates(self, rng):
        ctx = SpaceContext.euclidean(4)
        A = Dictionary.explicit(rng.standard_normal((6, 4))).materialize(ctx)
        f = rng.standard_normal(4)
        tr = run_pga(f, A, cfg("PGA", max_steps=40), ctx)
        assert len(tr.atoms) < len(tr.steps)
        np.testing.assert_allclose(tr.coefficients @ A.vectors[tr.atoms], tr.approximant, atol=1e-12)
        assert norm(ctx, f - tr.approximant) == pytest.approx(tr.residual_norms[-1], abs=1e-12)


class TestOGA:
    def test_orthonormal_top_k(self):
        ctx, A = canonical_atoms(3)
        tr = run_oga([3, 2, 1], A, cfg(max_steps=2), ctx)
        assert tr.residual_norms[-1] == pytest.approx(1.0)
        assert list(tr.atoms) == [0, 1]

    def test_zero_target(self):
        ctx, A = canonical_atoms(4)
        tr = run_oga(np.zeros(4), A, cfg(), ctx)
        assert tr.steps == [] and tr.residual_norm_at(3) == 0.0
        np.testing.assert_array_equal(tr.approximant, 0.0)

    def test_residual_orthogonal_to_selected(self, rng):
        ctx = SpaceContext(rng.uniform(0.2, 1, 30))
        A = Dictionary.explicit(rng.standard_normal((50, 30))).materialize(ctx)
        f = rng.standard_normal(30)
        tr = run_oga(f, A, cfg(max_steps=12), ctx)
        r = f - tr.approximant
        corr = A.vectors[tr.atoms] @ (ctx.weights * r)
        assert np.max(np.abs(corr)) <= 1e-8 * norm(ctx, f)

    def test_coefficients_match_lstsq(self, rng):
        ctx = SpaceContext.euclidean(20)
        A = Dictionary.explicit(rng.standard_normal((40, 20))).materialize(ctx)
        f = rng.standard_normal(20)
        tr = run_oga(f, A, cfg(max_steps=8), ctx)
        ref, *_ = np.linalg.lstsq(A.vectors[tr.atoms].T, f, rcond=None)
        np.testing.assert_allclose(tr.coefficients, ref, atol=1e-10)

    def test_first_step_equals_pga(self, rng):
        ctx = SpaceContext.euclidean(9)
        A = Dictionary.explicit(rng.standard_normal((15, 9))).materialize(ctx)
        f = rng.standard_normal(9)
        a = run_oga(f, A, cfg(max_steps=1), ctx)
        b = run_pga(f, A, cfg("PGA", max_steps=1), ctx)
        assert a.steps[0].atom == b.steps[0].atom
        np.testing.assert_allclose(a.approximant, b.approximant, atol=1e-14)

    def test_complete_dictionary_converges(self, rng):
        dim = 16
        ctx = SpaceContext.euclidean(dim)
        A = Dictionary.explicit(rng.standard_normal((3 * dim, dim))).materialize(ctx)
        f = rng.standard_normal(dim)
        tr = run_oga(f, A, cfg(max_steps=5 * dim), ctx)
        assert tr.residual_norms[-1] <= 1e-3 * norm(ctx, f)

    def test_path_records_prefix_models(self, rng):
        ctx = SpaceContext.euclidean(12)
        A = Dictionary.explicit(rng.standard_normal((20, 12))).materialize(ctx)
        f = rng.standard_normal(12)
        tr = run_oga(f, A, cfg(max_steps=5, record_path=True), ctx)
        for k, coef in enumerate(tr.path, start=1):
            fk = coef @ A.vectors[tr.atoms[:k]]
            assert norm(ctx, f - fk) == pytest.approx(tr.steps[k - 1].residual_norm, abs=1e-12)


class TestRGA:
    def test_schedule_two_first_step_is_pga(self, rng):
        ctx = SpaceContext.euclidean(7)
        A = Dictionary.explicit(rng.standard_normal((11, 7))).materialize(ctx)
        f = rng.standard_normal(7)
        a = run_rga(f, A, cfg("RGA", "one_minus_2_over_k", max_steps=1), ctx)
        b = run_pga(f, A, cfg("PGA", max_steps=1), ctx)
        assert a.steps[0].alpha == 0.0
        np.testing.assert_allclose(a.approximant, b.approximant, atol=1e-15)

    def test_beta_closed_form(self, rng):
        ctx = SpaceContext(rng.uniform(0.5, 1.5, 8))
        A = Dictionary.explicit(rng.standard_normal((14, 8))).materialize(ctx)
        f = rng.standard_normal(8)
        tr = run_rga(f, A, cfg("RGA", max_steps=6, record_path=True), ctx)
        fk = np.zeros(8)
        seen = []
        for k, s in enumerate(tr.steps, start=1):
            target = f - s.alpha * fk
            corr = A.vectors @ (ctx.weights * target)
            assert s.atom == int(np.argmax(np.abs(corr)))
            assert s.beta == pytest.approx(corr[s.atom], abs=1e-12)
            fk = s.alpha * fk + s.beta * A.vectors[s.atom]
            if s.atom not in seen:
                seen.append(s.atom)
            np.testing.assert_allclose(tr.path[k - 1] @ A.vectors[seen], fk, atol=1e-12)

    def test_rate_bound_example(self):
        # l1 norm 1 and ||f|| = 0.6, so the constant is sqrt(1 - 0.36) = 0.8
        ctx, A = canonical_atoms(4)
        f = np.array([0.4, 0.4, 0.2, 0.0])
        tr = run_rga(f, A, cfg("RGA", max_steps=40), ctx)
        rep = residual_bound_check(tr, 1.0, kind="rga_l1", n_max=40)
        assert rep.ok
        assert rep.rhs[0] == pytest.approx(0.8)
        assert rep.rhs[3] == pytest.approx(0.4)


class TestSPA:
    def test_orthonormal_matches_oga(self, rng):
        ctx, A = canonical_atoms(20)
        f = rng.standard_normal(20)
        a = run_spa(f, A, cfg("SPA", max_steps=10), ctx)
        b = run_oga(f, A, cfg(max_steps=10), ctx)
        assert list(a.atoms) == list(b.atoms)
        np.testing.assert_allclose(a.residual_norms, b.residual_norms, atol=1e-12)

    def test_atom_in_one_step(self):
        ctx = SpaceContext.euclidean(3)
        A = AtomSet.from_raw([[1, 1, 0], [0, 1, 1], [1, 0, 1]], ctx)
        tr = run_spa(A.vectors[1] * 2, A, cfg("SPA"), ctx)
        assert len(tr.steps) == 1 and tr.steps[0].residual_norm <= 1e-15

    def test_first_step_optimal(self, rng):
        ctx = SpaceContext.euclidean(6)
        for _ in range(20):
            A = Dictionary.explicit(rng.standard_normal((2, 6))).materialize(ctx)
            f = rng.standard_normal(6)
            s = run_spa(f, A, cfg("SPA", max_steps=1), ctx).steps[0].residual_norm
            o = run_oga(f, A, cfg(max_steps=1), ctx).steps[0].residual_norm
            errs = [norm(ctx, f - np.dot(f, g) * g) for g in A.vectors]
            assert s <= o + 1e-14
            assert s == pytest.approx(min(errs), abs=1e-14)

    def test_greedy_step_choice(self, rng):
        ctx = SpaceContext.euclidean(10)
        A = Dictionary.explicit(rng.standard_normal((12, 10))).materialize(ctx)
        f = rng.standard_normal(10)
        tr = run_spa(f, A, cfg("SPA", max_steps=4), ctx)
        for k in range(1, 4):
            chosen = list(tr.atoms[:k])
            errs = []
            for j in range(A.m):
                V = A.vectors[chosen + [j]]
                c, *_ = np.linalg.lstsq(V.T, f, rcond=None)
                errs.append(np.linalg.norm(f - c @ V))
            assert tr.steps[k].residual_norm == pytest.approx(min(errs), abs=1e-10)


class TestMonotone:
    @pytest.mark.parametrize("alg", ["PGA", "OGA", "SPA"])
    def test_nonincreasing(self, alg, rng):
        ctx = SpaceContext(rng.uniform(0.1, 1, 16))
        A = Dictionary.explicit(rng.standard_normal((30, 16))).materialize(ctx)
        f = rng.standard_normal(16)
        r = run(f, A, cfg(alg, max_steps=20), ctx).residual_norms
        assert np.all(np.diff(r) <= 1e-12)


class TestDegenerate:
    def test_dead_dictionary(self):
        ctx = SpaceContext.euclidean(3)
        A = AtomSet.from_raw(np.zeros((2, 3)), ctx)
        for alg in ("PGA", "OGA", "RGA", "SPA"):
            tr = run([1, 2, 3], A, cfg(alg), ctx)
            assert tr.stopped_reason == "degenerate" and tr.steps == []

    def test_oga_exhausts_span(self):
        ctx = SpaceContext.euclidean(4)
        A = AtomSet.from_raw([[1, 0, 0, 0], [0, 1, 0, 0], [1, 1, 0, 0]], ctx)
        tr = run_oga([1, 2, 3, 4], A, cfg(max_steps=10), ctx)
        assert len(tr.steps) == 2
        assert tr.stopped_reason in ("tol", "degenerate")
        assert tr.residual_norms[-1] == pytest.approx(5.0)


class TestBounds:
    def test_quadratic_reduces_to_l1_term(self):
        rhs, sq = bound_rhs("oga_quadratic", np.array([1, 4]), 2.0)
        assert sq
        np.testing.assert_allclose(rhs, [16.0, 4.0])

    def test_lambda_constant(self):
        rhs, _ = bound_rhs("rga_lambda", np.array([1.0]), 1.0, lam=2.0)
        assert rhs[0] == pytest.approx(4.0)
        rhs, _ = bound_rhs("rga_lambda", np.array([1.0]), 1.0, lam=3.0)
        assert rhs[0] == pytest.approx(4.5)

    def test_lambda_unsupported(self):
        with pytest.raises(ValueError):
            bound_rhs("rga_lambda", np.array([1.0]), 1.0, lam=1.0)

    def test_atom_target_passes_everything(self):
        ctx, A = canonical_atoms(5)
        f = A.vectors[3]
        for kind, alg, sched in [("oga_l1", "OGA", "one_minus_1_over_k"), ("rga_l1", "RGA", "one_minus_1_over_k"),
                                 ("oga_quadratic", "OGA", "one_minus_1_over_k"), ("rga_quadratic", "RGA", "one_minus_2_over_k")]:
            tr = run(f, A, cfg(alg, sched), ctx)
            assert residual_bound_check(tr, 1.0, kind=kind, h_norm=1.0, n_max=10).ok

    def test_violation_reported(self):
        ctx, A = canonical_atoms(4)
        tr = run_oga([1, 1, 1, 1], A, cfg(max_steps=3), ctx)
        # the true l1 norm is 4; claiming 1 must fail at the first step
        rep = residual_bound_check(tr, 1.0, kind="oga_l1")
        assert not rep.ok and rep.first_violation == 1

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            bound_rhs("thm99", np.array([1]), 1.0)


class TestTraceCSV:
    def test_columns_and_precision(self):
        ctx, A = canonical_atoms(3)
        tr = run_rga([3, 2, 1], A, cfg("RGA", "one_minus_2_over_k", max_steps=2), ctx)
        rows = list(csv.reader(io.StringIO(tr.to_csv())))
        assert rows[0] == ["step", "atom_index", "alpha", "beta", "residual_norm"]
        assert len(rows) == 3
        assert float(rows[2][4]) == tr.steps[1].residual_norm

    def test_write_to_handle(self):
        ctx, A = canonical_atoms(3)
        buf = io.StringIO()
        assert run_oga([1, 0, 0], A, cfg(), ctx).to_csv(buf) is None
        assert buf.getvalue().startswith("step,")
