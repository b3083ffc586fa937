"""Greedy approximation engines: PGA, OGA, RGA and SPA.

All engines start from ``f_0 = 0`` and record one :class:`Step` per iteration.
Selection always breaks ties towards the lowest atom index, so a run is a
deterministic function of its inputs.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from greedyapprox.dictionary import NoLiveAtomsError, as_atoms
from greedyapprox.hilbert import GramState, SpaceContext, gram_extend, norm

ALGORITHMS = ("PGA", "OGA", "RGA", "SPA")
SCHEDULES = ("one_minus_1_over_k", "one_minus_2_over_k", "lambda")

# rounding allowance when comparing a residual with a theoretical bound
BOUND_REL_SLACK = 1e-12
BOUND_ABS_SLACK = 1e-14


@dataclass(frozen=True)
class GreedyConfig:
    """Run parameters shared by all engines.

    ``alpha_schedule`` only matters for RGA: ``one_minus_1_over_k`` gives
    alpha_k = 1 - 1/k, ``one_minus_2_over_k`` gives alpha_1 = 0 and
    alpha_k = 1 - 2/k afterwards, ``lambda`` gives (1 - lam/k)_+.
    ``residual_stop_tol=None`` means 1e-12 * ||f||.
    """

    algorithm: str = "OGA"
    alpha_schedule: str = "one_minus_1_over_k"
    lam: float = 2.0
    max_steps: int = 64
    residual_stop_tol: float | None = None
    m: int | None = None
    record_path: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.alpha_schedule not in SCHEDULES:
            raise ValueError(f"alpha_schedule must be one of {SCHEDULES}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.alpha_schedule == "lambda":
            if self.lam < 1:
                raise ValueError("lambda schedule requires lam >= 1")
            if self.lam == 1:
                warnings.warn("lam = 1: no quadratic error bound is known for this schedule")


def alpha(k: int, schedule: str, lam: float = 2.0) -> float:
    """Relaxation factor alpha_k (k >= 1) of the RGA."""
    if schedule == "one_minus_1_over_k":
        return 1.0 - 1.0 / k
    if schedule == "one_minus_2_over_k":
        return 0.0 if k == 1 else 1.0 - 2.0 / k
    if schedule == "lambda":
        return max(1.0 - lam / k, 0.0)
    raise ValueError(f"unknown schedule {schedule!r}")


class Step(NamedTuple):
    atom: int
    beta: float
    alpha: float
    residual_norm: float


@dataclass
class GreedyTrace:
    """Result of a greedy run.

    ``atoms`` lists distinct selected atoms in order of first selection and
    ``coefficients`` expands the final approximant over them. With
    ``record_path`` the coefficient vector after every step is kept in
    ``path`` (entry k-1 covers the atoms selected up to step k).
    """

    algorithm: str
    f_norm: float
    steps: list = field(default_factory=list)
    atoms: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))
    approximant: np.ndarray | None = None
    stopped_reason: str = "max_steps"
    path: list | None = None
    gram_state: GramState | None = field(default=None, repr=False)

    @property
    def residual_norms(self) -> np.ndarray:
        """Residual norms ||r_k|| for k = 1..K."""
        return np.array([s.residual_norm for s in self.steps])

    def residual_norm_at(self, k: int) -> float:
        """||r_k||; past the last step the final residual persists."""
        if k == 0 or not self.steps:
            return self.f_norm
        return self.steps[min(k, len(self.steps)) - 1].residual_norm

    def to_csv(self, fh=None) -> str | None:
        """Write ``step, atom_index, alpha, beta, residual_norm`` rows."""
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["step", "atom_index", "alpha", "beta", "residual_norm"])
        for k, s in enumerate(self.steps, start=1):
            w.writerow([k, s.atom, f"{s.alpha:.17g}", f"{s.beta:.17g}", f"{s.residual_norm:.17g}"])
        return out.getvalue() if fh is None else None


class _Accumulator:
    """Coefficients over distinct atoms in order of first selection."""

    def __init__(self):
        self.pos = {}
        self.atoms = []
        self.coef = []

    def slot(self, i):
        if i not in self.pos:
            self.pos[i] = len(self.atoms)
            self.atoms.append(i)
            self.coef.append(0.0)
        return self.pos[i]


def _start(f, d, cfg, ctx, points):
    A = as_atoms(d, ctx, cfg.m, points)
    f = np.array(ctx.check(f), dtype=np.float64)
    fn = norm(ctx, f)
    tol = 1e-12 * fn if cfg.residual_stop_tol is None else cfg.residual_stop_tol
    return A, f, fn, tol


def _finish(trace, atoms, coef, vectors):
    trace.atoms = np.array(atoms, dtype=np.intp)
    trace.coefficients = np.array(coef, dtype=np.float64)
    if len(atoms):
        trace.approximant = trace.coefficients @ vectors[trace.atoms]
    else:
        trace.approximant = np.zeros(vectors.shape[1])
    return trace


def run_pga(f, d, cfg: GreedyConfig, ctx: SpaceContext, points=None) -> GreedyTrace:
    """Pure greedy algorithm: f_k = f_{k-1} + <r_{k-1}, g_k> g_k."""
    A, f, fn, tol = _start(f, d, cfg, ctx, points)
    trace = GreedyTrace("PGA", fn, path=[] if cfg.record_path else None)
    acc = _Accumulator()
    fk = np.zeros_like(f)
    r = f.copy()
    if fn <= tol:
        trace.stopped_reason = "tol"
        return _finish(trace, [], [], A.vectors)
    for _ in range(cfg.max_steps):
        try:
            i, c = A.select(r)
        except NoLiveAtomsError:
            trace.stopped_reason = "degenerate"
            break
        if c == 0.0:
            trace.stopped_reason = "tol"
            break
        acc.coef[acc.slot(i)] += c
        fk += c * A.vectors[i]
        r = f - fk
        rn = norm(ctx, r)
        trace.steps.append(Step(i, c, 1.0, rn))
        if trace.path is not None:
            trace.path.append(np.array(acc.coef))
        if rn <= tol:
            trace.stopped_reason = "tol"
            break
    return _finish(trace, acc.atoms, acc.coef, A.vectors)


def run_oga(f, d, cfg: GreedyConfig, ctx: SpaceContext, points=None) -> GreedyTrace:
    """Orthogonal greedy algorithm: f_k is the projection of f on span(g_1..g_k)."""
    A, f, fn, tol = _start(f, d, cfg, ctx, points)
    trace = GreedyTrace("OGA", fn, path=[] if cfg.record_path else None)
    state = GramState.empty(ctx)
    z = []
    fk = np.zeros_like(f)
    r = f.copy()
    if fn <= tol:
        trace.stopped_reason = "tol"
        return _finish(trace, [], [], A.vectors)
    for _ in range(cfg.max_steps):
        try:
            i, c = A.select(r)
        except NoLiveAtomsError:
            trace.stopped_reason = "degenerate"
            break
        if c == 0.0:
            trace.stopped_reason = "tol"
            break
        state, bad = gram_extend(ctx, state, A.vectors[i])
        if bad:
            trace.stopped_reason = "degenerate"
            break
        q = state.basis[-1]
        zk = float(np.dot(ctx.weights * r, q))
        z.append(zk)
        fk = fk + zk * q
        r = f - fk
        rn = norm(ctx, r)
        trace.steps.append(Step(i, c, 1.0, rn))
        if trace.path is not None:
            trace.path.append(solve_triangular(state.R, np.array(z), lower=False))
        if rn <= tol:
            trace.stopped_reason = "tol"
            break
    atoms = [s.atom for s in trace.steps]
    coef = solve_triangular(state.R, np.array(z), lower=False) if z else []
    trace = _finish(trace, atoms, coef, A.vectors)
    trace.gram_state = state
    return trace


def run_rga(f, d, cfg: GreedyConfig, ctx: SpaceContext, points=None) -> GreedyTrace:
    """Relaxed greedy algorithm: f_k = alpha_k f_{k-1} + beta_k g_k.

    (beta_k, g_k) minimize ||f - alpha_k f_{k-1} - beta g|| in closed form:
    g_k maximizes |<f - alpha_k f_{k-1}, g>| and beta_k is that inner product.
    """
    A, f, fn, tol = _start(f, d, cfg, ctx, points)
    trace = GreedyTrace("RGA", fn, path=[] if cfg.record_path else None)
    acc = _Accumulator()
    fk = np.zeros_like(f)
    if fn <= tol:
        trace.stopped_reason = "tol"
        return _finish(trace, [], [], A.vectors)
    for k in range(1, cfg.max_steps + 1):
        a = alpha(k, cfg.alpha_schedule, cfg.lam)
        target = f - a * fk
        try:
            i, c = A.select(target)
        except NoLiveAtomsError:
            trace.stopped_reason = "degenerate"
            break
        if c == 0.0:
            trace.stopped_reason = "tol"
            break
        acc.coef = [a * x for x in acc.coef]
        acc.coef[acc.slot(i)] += c
        fk = a * fk + c * A.vectors[i]
        rn = norm(ctx, f - fk)
        trace.steps.append(Step(i, c, a, rn))
        if trace.path is not None:
            trace.path.append(np.array(acc.coef))
        if rn <= tol:
            trace.stopped_reason = "tol"
            break
    return _finish(trace, acc.atoms, acc.coef, A.vectors)


def _orth_complements(vectors, basis, w):
    """Rows of ``vectors`` minus their projection on ``basis`` (two passes)."""
    U = np.array(vectors, dtype=np.float64, copy=True)
    if basis.shape[0] == 0:
        return U
    for _ in range(2):
        U -= ((U * w) @ basis.T) @ basis
    return U


def run_spa(f, d, cfg: GreedyConfig, ctx: SpaceContext, points=None) -> GreedyTrace:
    """Stepwise projection algorithm.

    Each step picks the atom whose addition to the current span minimizes the
    projection error. For a candidate g with component u orthogonal to the
    span, the error drops by <r, u>^2 / ||u||^2, so every step costs one
    reorthogonalized projection of all m candidates, O(m k) inner products.
    """
    A, f, fn, tol = _start(f, d, cfg, ctx, points)
    trace = GreedyTrace("SPA", fn, path=[] if cfg.record_path else None)
    state = GramState.empty(ctx)
    w = ctx.weights
    z = []
    fk = np.zeros_like(f)
    r = f.copy()
    if fn <= tol:
        trace.stopped_reason = "tol"
        return _finish(trace, [], [], A.vectors)
    for _ in range(cfg.max_steps):
        U = _orth_complements(A.vectors, state.basis, w)
        un = np.sqrt(np.maximum((U * U) @ w, 0.0))
        ok = (A.live == 1) & (un > state.rank_tol)
        if not np.any(ok):
            trace.stopped_reason = "degenerate"
            break
        ru = U @ (w * r)
        score = np.full(A.m, -1.0)
        score[ok] = ru[ok] ** 2 / un[ok] ** 2
        i = int(np.argmax(score))
        if score[i] == 0.0:
            trace.stopped_reason = "tol"
            break
        c = float(np.dot(w * r, A.vectors[i]))
        state, bad = gram_extend(ctx, state, A.vectors[i])
        if bad:
            trace.stopped_reason = "degenerate"
            break
        q = state.basis[-1]
        zk = float(np.dot(w * r, q))
        z.append(zk)
        fk = fk + zk * q
        r = f - fk
        rn = norm(ctx, r)
        trace.steps.append(Step(i, c, 1.0, rn))
        if trace.path is not None:
            trace.path.append(solve_triangular(state.R, np.array(z), lower=False))
        if rn <= tol:
            trace.stopped_reason = "tol"
            break
    atoms = [s.atom for s in trace.steps]
    coef = solve_triangular(state.R, np.array(z), lower=False) if z else []
    trace = _finish(trace, atoms, coef, A.vectors)
    trace.gram_state = state
    return trace


ENGINES = {"PGA": run_pga, "OGA": run_oga, "RGA": run_rga, "SPA": run_spa}


def run(f, d, cfg: GreedyConfig, ctx: SpaceContext, points=None) -> GreedyTrace:
    return ENGINES[cfg.algorithm](f, d, cfg, ctx, points)


# -- theoretical bounds ------------------------------------------------------

BOUND_KINDS = ("oga_l1", "rga_l1", "oga_quadratic", "rga_quadratic", "rga_linear", "rga_lambda", "truncated")


@dataclass
class BoundReport:
    kind: str
    N: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    passed: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def first_violation(self) -> int | None:
        bad = np.flatnonzero(~self.passed)
        return int(self.N[bad[0]]) if bad.size else None


def bound_rhs(kind: str, N, h_l1: float, h_dist: float = 0.0, *, f_norm: float = 0.0,
              h_norm: float = 0.0, lam: float | None = None, m: int | None = None,
              r_exp: float | None = None) -> tuple[np.ndarray, bool]:
    """Right-hand side of a residual bound at steps ``N``.

    Returns ``(rhs, squared)``: when ``squared`` is True the bound applies to
    ||r_N||^2, otherwise to ||r_N||. ``h_l1`` may be any upper bound on the
    l1-variation norm of the surrogate h (for oga_l1/rga_l1, of f itself).

    With M = h_l1 and d = h_dist the kinds are::

        oga_l1         ||r_N||   <= M / sqrt(N + 1)            OGA, f = h
        rga_l1         ||r_N||   <= sqrt((M^2 - ||f||^2) / N)  RGA (1 - 1/k), f = h
        oga_quadratic  ||r_N||^2 <= d^2 + 4 M^2 / N            OGA
        rga_quadratic  ||r_N||^2 <= d^2 + 4 (M^2 - ||h||^2) / N   RGA (1 - 2/k)
        rga_linear     ||r_N||   <= d + sqrt((M^2 - ||h||^2) / N)
        rga_lambda     ||r_N||^2 <= d^2 + lam^2/(lam-1) (M^2 - ||h||^2) / N
        truncated      ||r_N||   <= 2 M (N^-1/2 + m^-r)        OGA on a truncation
    """
    N = np.asarray(N, dtype=np.float64)
    M2 = h_l1 ** 2
    if kind == "oga_l1":
        return h_l1 / np.sqrt(N + 1), False
    if kind == "rga_l1":
        return math.sqrt(max(M2 - f_norm ** 2, 0.0)) / np.sqrt(N), False
    if kind == "oga_quadratic":
        return h_dist ** 2 + 4 * M2 / N, True
    if kind == "rga_quadratic":
        return h_dist ** 2 + 4 * max(M2 - h_norm ** 2, 0.0) / N, True
    if kind == "rga_linear":
        return h_dist + math.sqrt(max(M2 - h_norm ** 2, 0.0)) / np.sqrt(N), False
    if kind == "rga_lambda":
        if lam is None or lam <= 1:
            raise ValueError("the lambda-schedule bound is only available for lam > 1")
        C = lam ** 2 / (lam - 1)
        return h_dist ** 2 + C * max(M2 - h_norm ** 2, 0.0) / N, True
    if kind == "truncated":
        if m is None or r_exp is None:
            raise ValueError("truncated needs m and r_exp")
        # h_l1 carries the class norm; constant 2 is the OGA value
        return 2.0 * h_l1 * (N ** -0.5 + float(m) ** -r_exp), False
    raise ValueError(f"unknown bound kind {kind!r}")


def residual_bound_check(trace: GreedyTrace, h_l1: float, h_dist: float = 0.0,
                         kind: str = "oga_l1", *, h_norm: float = 0.0,
                         lam: float | None = None, m: int | None = None,
                         r_exp: float | None = None, n_max: int | None = None) -> BoundReport:
    """Compare every recorded residual of ``trace`` with a theoretical bound.

    Steps after an early stop keep the final residual, so with ``n_max``
    the check extends to N = 1..n_max.
    """
    K = len(trace.steps) if n_max is None else n_max
    N = np.arange(1, K + 1)
    lhs = np.array([trace.residual_norm_at(int(k)) for k in N])
    rhs, squared = bound_rhs(kind, N, h_l1, h_dist, f_norm=trace.f_norm, h_norm=h_norm,
                             lam=lam, m=m, r_exp=r_exp)
    if squared:
        lhs = lhs ** 2
    slack = BOUND_REL_SLACK * np.abs(rhs) + BOUND_ABS_SLACK * max(trace.f_norm, 1.0) ** (2 if squared else 1)
    return BoundReport(kind, N, lhs, rhs, lhs <= rhs + slack)
