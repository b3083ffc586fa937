"""Oracles and function-class tools used to check the greedy engines.

Everything here is meant for desk-scale instances: brute-force best N-term
errors, the l1-variation norm by linear programming, the K-functional between
the Hilbert space and the l1 class, and synthetic targets of known class.
"""
from __future__ import annotations

import math
import warnings
from itertools import combinations, islice
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from greedyapprox import kernels
from greedyapprox.dictionary import AtomSet, as_atoms
from greedyapprox.hilbert import SpaceContext, norm

MAX_SUBSETS = 10 ** 6
LP_MAX_ATOMS = 64
# Cholesky pivots below this fraction of the diagonal are treated as rank loss
SUBSET_PIVOT_TOL = 1e-12
# candidates within this relative window of the best are re-solved exactly
SUBSET_REFINE_WINDOW = 1e-8


class NotInSpanError(ValueError):
    """The target is not in the span of the truncated dictionary."""

    def __init__(self, distance: float):
        super().__init__(f"target is at distance {distance:.3e} from the span")
        self.distance = distance


@dataclass
class Representation:
    """Finite expansion ``sum_j coeffs[j] * g_{atoms[j]}`` and its value."""

    atoms: np.ndarray
    coeffs: np.ndarray
    vector: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, A: AtomSet, atoms, coeffs) -> "Representation":
        atoms = np.asarray(atoms, dtype=np.intp)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        return cls(atoms, coeffs, A.synthesize(atoms, coeffs))

    @property
    def l1(self) -> float:
        """Sum of |coefficients|: an upper bound on the variation norm."""
        return float(np.sum(np.abs(self.coeffs)))


def _weighted_lstsq(ctx: SpaceContext, V, f):
    """Least-squares coefficients and residual of f against rows of V."""
    sw = np.sqrt(ctx.weights)
    c, *_ = np.linalg.lstsq((V * sw).T, f * sw, rcond=None)
    res = f - c @ V
    return c, norm(ctx, res)


def distance_to_span(f, A: AtomSet) -> float:
    V = A.vectors[A.live == 1]
    if V.shape[0] == 0:
        return norm(A.ctx, f)
    return _weighted_lstsq(A.ctx, V, np.asarray(f, dtype=np.float64))[1]


def best_n_term_bruteforce(f, d, m: int | None, N: int, ctx: SpaceContext, points=None,
                           max_subsets: int = MAX_SUBSETS) -> tuple[float, tuple]:
    """Exact best N-term error over the first ``m`` atoms by enumeration.

    All subsets of exactly min(N, #live) live atoms are scored through a
    Cholesky factorization of their Gram block (compiled kernel when
    available); subsets scoring within a small window of the best are then
    re-solved by dense least squares so the returned error is accurate.
    Returns ``(error, support)`` with support as original atom indices.
    """
    A = as_atoms(d, ctx, m, points)
    f = np.asarray(ctx.check(f), dtype=np.float64)
    fn = norm(ctx, f)
    if N < 0:
        raise ValueError("N must be nonnegative")
    live = np.flatnonzero(A.live)
    size = min(int(N), live.size)
    if size == 0 or fn == 0.0:
        return fn, ()
    total = math.comb(live.size, size)
    if total > max_subsets:
        raise ValueError(f"C({live.size}, {size}) = {total} subsets exceeds the guard {max_subsets}")
    V = np.ascontiguousarray(A.vectors[live])
    WV = V * ctx.weights
    G = np.ascontiguousarray(WV @ V.T)
    b = np.ascontiguousarray(WV @ f)
    err2 = kernels.subset_sq_errors(G, b, fn * fn, size, SUBSET_PIVOT_TOL)
    cutoff = err2.min() + SUBSET_REFINE_WINDOW * fn * fn
    candidates = np.flatnonzero(err2 <= cutoff)
    best, best_support = math.inf, ()
    wanted = set(candidates.tolist())
    for t, subset in enumerate(islice(combinations(range(live.size), size), int(candidates.max()) + 1)):
        if t not in wanted:
            continue
        _, e = _weighted_lstsq(ctx, V[list(subset)], f)
        if e < best:
            best, best_support = e, tuple(int(live[j]) for j in subset)
    return best, best_support


def l1_expansion(f, d, m: int | None, ctx: SpaceContext, points=None,
                 span_tol: float = 1e-8, max_atoms: int = LP_MAX_ATOMS) -> tuple[float, np.ndarray]:
    """Minimal l1 coefficient norm over expansions of f in the first m atoms.

    Solves the split-variable LP min sum(u + v) s.t. V^T (u - v) = f, then
    re-solves the equality on the LP support so the value is exact at the
    optimal vertex. Returns ``(norm, coeffs)`` with coeffs over all m atoms.
    """
    A = as_atoms(d, ctx, m, points)
    if A.m > max_atoms:
        raise ValueError(f"l1 LP limited to {max_atoms} atoms, got {A.m}")
    f = np.asarray(ctx.check(f), dtype=np.float64)
    fn = norm(ctx, f)
    coeffs = np.zeros(A.m)
    if fn == 0.0:
        return 0.0, coeffs
    live = np.flatnonzero(A.live)
    V = A.vectors[live]
    c_ls, dist = _weighted_lstsq(ctx, V, f) if live.size else (None, fn)
    if dist > span_tol * max(fn, 1.0):
        raise NotInSpanError(dist)
    rows = ctx.weights > 0
    sw = np.sqrt(ctx.weights[rows])
    Aeq = (V[:, rows] * sw).T
    target = (c_ls @ V)[rows] * sw
    k = live.size
    res = linprog(np.ones(2 * k), A_eq=np.hstack([Aeq, -Aeq]), b_eq=target,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"l1 LP failed: {res.message}")
    c = res.x[:k] - res.x[k:]
    support = np.flatnonzero(np.abs(c) > 1e-9 * max(np.abs(c).max(), 1e-300))
    polished, e = _weighted_lstsq(ctx, V[support], f)
    if e <= span_tol * max(fn, 1.0):
        c = np.zeros(k)
        c[support] = polished
    coeffs[live] = c
    return float(np.sum(np.abs(c))), coeffs


def l1_norm_lp(f, d, m: int | None, ctx: SpaceContext, points=None, span_tol: float = 1e-8) -> float:
    """The l1-variation norm of f with respect to the first m atoms."""
    return l1_expansion(f, d, m, ctx, points, span_tol)[0]


def weak_lp_quasinorm(c, p: float) -> float:
    """``(sup_eta eta^p #{|c_j| >= eta})^(1/p)``.

    The supremum is attained at one of the distinct values |c_j|, so it is
    found exactly by scanning the sorted magnitudes.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    a = np.sort(np.abs(np.asarray(c, dtype=np.float64)).ravel())[::-1]
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    # count of entries >= a[j], including ties further down the list
    counts = a.size - np.searchsorted(a[::-1], a, side="left")
    return float(np.max(a * counts ** (1.0 / p)))


def soft_threshold(c, t: float):
    """Minimizer of |c - d|^2 + t|d| over d: shrink c towards 0 by t/2."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    c = np.asarray(c, dtype=np.float64)
    out = np.sign(c) * np.maximum(np.abs(c) - t / 2.0, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class KProfile:
    """Values of (an upper estimate of) K(f, t) on a grid of t."""

    t_grid: np.ndarray
    values: np.ndarray
    theta: float | None = None
    exact: bool = False

    @property
    def p(self) -> float | None:
        return None if self.theta is None else 2.0 / (1.0 + self.theta)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= -1e-15 * max(self.values.max(initial=0), 1)))

    def membership_constant(self, theta: float | None = None) -> float:
        """max_t K(f,t) / t^theta over the grid."""
        theta = self.theta if theta is None else theta
        if theta is None:
            raise ValueError("theta required")
        return float(np.max(self.values / self.t_grid ** theta))


def k_functional_orthonormal(coeffs, t: float, perp2: float = 0.0) -> tuple[float, float]:
    """Exact K(f, t) for an orthonormal dictionary.

    ``coeffs`` are the inner products of f with the atoms and ``perp2`` the
    squared norm of the part of f outside their span. The optimal h is a soft
    thresholding of the coefficients at some level tau; the cost
    ||f - h_tau|| + t ||h_tau||_1 is minimized over the breakpoints |c_j| and
    over the stationary point tau = t * ||f - h_tau|| of every interval between
    them. Returns ``(K, tau)``.
    """
    a = np.sort(np.abs(np.asarray(coeffs, dtype=np.float64)))[::-1]
    a = a[a > 0]
    perp2 = max(float(perp2), 0.0)
    if a.size == 0:
        return math.sqrt(perp2), 0.0

    def cost(tau):
        err = math.sqrt(perp2 + float(np.sum(np.minimum(a, tau) ** 2)))
        return err + t * float(np.sum(np.maximum(a - tau, 0.0)))

    cands = [0.0, *a.tolist()]
    # on (a[j], a[j-1]) exactly j coefficients exceed tau
    tail = np.concatenate([np.cumsum((a ** 2)[::-1])[::-1], [0.0]])
    for j in range(1, a.size + 1):
        den = 1.0 - j * t * t
        if den <= 0:
            continue
        s = perp2 + tail[j]
        tau = t * math.sqrt(s / den)
        lo = a[j] if j < a.size else 0.0
        cands.append(min(max(tau, lo), a[j - 1]))
    vals = [cost(x) for x in cands]
    i = int(np.argmin(vals))
    return vals[i], cands[i]


def default_t_grid(f_norm: float, l1_estimate: float, n: int = 32) -> np.ndarray:
    scale = f_norm / max(1.0, l1_estimate) if f_norm > 0 else 1.0
    return np.logspace(-3, 1, n) * scale


def _lasso_candidates(A: AtomSet, f):
    from sklearn.linear_model import lasso_path

    live = np.flatnonzero(A.live)
    V = A.vectors[live]
    sw = np.sqrt(A.ctx.weights)
    X = (V * sw).T
    y = f * sw
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, coefs, _ = lasso_path(X, y, eps=1e-6, n_alphas=200, max_iter=20000, tol=1e-10)
    errs, l1s = [], []
    for c in coefs.T:
        errs.append(norm(A.ctx, f - c @ V))
        l1s.append(float(np.sum(np.abs(c))))
    return np.array(errs), np.array(l1s)


def k_functional_estimate(f, d, m: int | None, t_grid=None, ctx: SpaceContext | None = None,
                          points=None, theta: float | None = None) -> KProfile:
    """K-functional profile of f between the Hilbert norm and the l1 class.

    Orthonormal atom sets use the exact soft-thresholding formula. Other
    dictionaries (m <= 64) take the minimum of ||f - h|| + t ||h||_{l1} over
    the lasso path, h = 0 and h = f, which is an upper estimate of K.
    """
    if ctx is None:
        raise ValueError("ctx is required")
    A = as_atoms(d, ctx, m, points)
    f = np.asarray(ctx.check(f), dtype=np.float64)
    fn = norm(ctx, f)
    if A.is_orthonormal():
        c = A.vectors @ (ctx.weights * f)
        perp2 = norm(ctx, f - c @ A.vectors) ** 2
        t_grid = default_t_grid(fn, float(np.sum(np.abs(c)))) if t_grid is None else np.asarray(t_grid, float)
        vals = np.array([k_functional_orthonormal(c, t, perp2)[0] for t in t_grid])
        return KProfile(t_grid, vals, theta, exact=True)
    if A.m > LP_MAX_ATOMS:
        raise ValueError(f"general K-functional limited to {LP_MAX_ATOMS} atoms")
    if fn == 0.0:
        t_grid = default_t_grid(0.0, 0.0) if t_grid is None else np.asarray(t_grid, float)
        return KProfile(t_grid, np.zeros(len(t_grid)), theta)
    errs, l1s = _lasso_candidates(A, f)
    errs = np.concatenate([errs, [fn]])
    l1s = np.concatenate([l1s, [0.0]])
    try:
        M = l1_norm_lp(f, A, None, ctx)
        errs = np.concatenate([errs, [0.0]])
        l1s = np.concatenate([l1s, [M]])
    except NotInSpanError:
        M = float(l1s.max(initial=0.0))
    t_grid = default_t_grid(fn, M) if t_grid is None else np.asarray(t_grid, float)
    vals = np.min(errs[None, :] + t_grid[:, None] * l1s[None, :], axis=1)
    return KProfile(t_grid, vals, theta)


def synth_bp_function(d, m: int, p: float, seed, ctx: SpaceContext, points=None):
    """Target with coefficients +-j^(-1/p) on the first m atoms.

    The coefficient sequence has weak-lp quasi-norm exactly 1. For an
    orthonormal dictionary this places f in the corresponding interpolation
    class; for other dictionaries it only bounds the class norm from above.
    Returns ``(f, Representation)``.
    """
    A = as_atoms(d, ctx, m, points)
    rng = np.random.default_rng(seed)
    j = np.arange(1, A.m + 1, dtype=np.float64)
    signs = rng.choice([-1.0, 1.0], size=A.m)
    rep = Representation.build(A, np.arange(A.m), signs * j ** (-1.0 / p))
    return rep.vector, rep


def synth_l1_function(A: AtomSet, n_terms: int, rng, l1: float = 1.0) -> Representation:
    """Random combination of ``n_terms`` distinct live atoms with sum |c| = l1."""
    live = np.flatnonzero(A.live)
    idx = np.sort(rng.choice(live, size=min(n_terms, live.size), replace=False))
    mag = rng.dirichlet(np.ones(idx.size)) * l1
    signs = rng.choice([-1.0, 1.0], size=idx.size)
    return Representation.build(A, idx, signs * mag)


def rate_slope(points) -> tuple[float, float, float]:
    """Least-squares fit of log(err) against log(N).

    Returns ``(slope, intercept, r2)``.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (N, err) points")
    N, err = pts[:, 0], pts[:, 1]
    if np.any(err <= 0) or np.any(N <= 0):
        raise ValueError("rate fit needs positive N and errors")
    x, y = np.log(N), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)


@dataclass
class RandomInstance:
    """Random dictionary with a target f = h + e of known l1 bound."""

    atoms: AtomSet
    h: Representation
    e: np.ndarray
    f: np.ndarray

    @property
    def h_dist(self) -> float:
        return norm(self.atoms.ctx, self.e)

    @property
    def h_norm(self) -> float:
        return norm(self.atoms.ctx, self.h.vector)


def random_instance(rng, dim: int, m: int, n_terms: int, eps: float = 0.0, l1: float = 1.0) -> RandomInstance:
    """Gaussian unit-norm atoms in R^dim and a sparse target with sum |c| = l1.

    When ``eps > 0`` a perturbation of norm eps is added, taken orthogonal to
    the atoms' span if that span is proper and random otherwise.
    """
    from greedyapprox.dictionary import Dictionary

    ctx = SpaceContext.euclidean(dim)
    raw = rng.standard_normal((m, dim))
    A = Dictionary.explicit(raw).materialize(ctx)
    h = synth_l1_function(A, n_terms, rng, l1)
    e = np.zeros(dim)
    if eps > 0:
        z = rng.standard_normal(dim)
        if m < dim:
            q, _ = np.linalg.qr(A.vectors.T)
            z = z - q @ (q.T @ z)
            z = z - q @ (q.T @ z)
        e = eps * z / np.linalg.norm(z)
    return RandomInstance(A, h, e, h.vector + e)
