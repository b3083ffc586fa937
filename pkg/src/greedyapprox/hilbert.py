"""Weighted inner-product spaces and incremental orthogonal projection.

Vectors are plain 1-d float arrays holding function values on a fixed set of
coordinates. A :class:`SpaceContext` attaches nonnegative weights to those
coordinates, which covers both the Euclidean case (all weights 1) and the
empirical norm of a sample (all weights 1/n).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from greedyapprox import kernels

DEFAULT_RANK_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when a vector does not conform to its space."""


@dataclass(frozen=True)
class SpaceContext:
    """Diagonal measure on ``dim`` coordinates."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ValueError("at least one weight must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def euclidean(cls, dim: int) -> "SpaceContext":
        return cls(np.ones(dim))

    @classmethod
    def empirical(cls, n: int) -> "SpaceContext":
        return cls(np.full(n, 1.0 / n))

    @property
    def dim(self) -> int:
        return self.weights.size

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.dim,):
            raise DimensionError(f"expected shape ({self.dim},), got {u.shape}")
        return u

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __eq__(self, other):
        return isinstance(other, SpaceContext) and np.array_equal(self.weights, other.weights)


def inner(ctx: SpaceContext, u, v) -> float:
    """Weighted inner product ``sum_i w_i u_i v_i``."""
    u = ctx.check(u)
    v = ctx.check(v)
    return float(np.dot(ctx.weights * u, v))


def norm(ctx: SpaceContext, u) -> float:
    u = ctx.check(u)
    return float(np.sqrt(max(np.dot(ctx.weights * u, u), 0.0)))


@dataclass(frozen=True, eq=False)
class GramState:
    """Orthonormalized span of a list of selected atoms.

    ``basis`` holds rows q_1..q_k orthonormal in the context's inner product
    and ``R`` is upper triangular with ``atoms = R.T @ basis``, i.e. a
    weighted QR factorization, so ``R.T @ R`` is the Gram matrix of the atoms.
    Instances are immutable; :func:`gram_extend` returns a new state.
    """

    ctx: SpaceContext
    atoms: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    rank_tol: float = DEFAULT_RANK_TOL
    degenerate: bool = False

    @classmethod
    def empty(cls, ctx: SpaceContext, rank_tol: float = DEFAULT_RANK_TOL) -> "GramState":
        z = np.zeros((0, ctx.dim))
        return cls(ctx, z, z.copy(), np.zeros((0, 0)), rank_tol)

    @classmethod
    def from_atoms(cls, ctx: SpaceContext, atoms, rank_tol: float | None = None) -> "GramState":
        """Build a state by extending with each row of ``atoms`` in turn.

        When ``rank_tol`` is None it defaults to 1e-10 times the largest atom
        norm. Numerically dependent atoms are skipped and the returned state
        has ``degenerate=True``.
        """
        atoms = np.atleast_2d(np.asarray(atoms, dtype=np.float64))
        if rank_tol is None:
            scale = max((norm(ctx, a) for a in atoms), default=1.0)
            rank_tol = DEFAULT_RANK_TOL * (scale if scale > 0 else 1.0)
        state = cls.empty(ctx, rank_tol)
        flagged = False
        for a in atoms:
            state, bad = gram_extend(ctx, state, a)
            flagged |= bad
        if flagged:
            state = GramState(state.ctx, state.atoms, state.basis, state.R, state.rank_tol, True)
        return state

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    def gram(self) -> np.ndarray:
        """Gram matrix recomputed from the stored atoms."""
        wa = self.atoms * self.ctx.weights
        return wa @ self.atoms.T


def gram_extend(ctx: SpaceContext, state: GramState, g) -> tuple[GramState, bool]:
    """Append atom ``g`` to the span.

    Returns ``(new_state, degenerate)``. If the component of ``g`` orthogonal
    to the current span has norm below ``state.rank_tol`` the original state
    is returned unchanged with ``degenerate=True``.
    """
    g = np.ascontiguousarray(ctx.check(g))
    u, coeffs = kernels.orthogonalize(state.basis, ctx.weights, g)
    pivot = norm(ctx, u)
    if not pivot > state.rank_tol:
        return state, True
    k = state.k
    R = np.zeros((k + 1, k + 1))
    R[:k, :k] = state.R
    R[:k, k] = coeffs
    R[k, k] = pivot
    atoms = np.vstack([state.atoms, g[None, :]])
    basis = np.ascontiguousarray(np.vstack([state.basis, (u / pivot)[None, :]]))
    for arr in (atoms, basis, R):
        arr.setflags(write=False)
    return GramState(ctx, atoms, basis, R, state.rank_tol, state.degenerate), False


def project_onto_span(ctx: SpaceContext, state: GramState, f) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projection of ``f`` onto the span of ``state.atoms``.

    Returns ``(coeffs, proj)`` with ``proj = coeffs @ state.atoms``. The
    coefficients solve the normal equations through the triangular factor,
    never forming the Gram matrix explicitly.
    """
    f = ctx.check(f)
    if state.k == 0:
        raise ValueError("cannot project onto an empty span")
    z = state.basis @ (ctx.weights * f)
    # second pass reduces the error of z when f is large relative to proj
    proj = z @ state.basis
    dz = state.basis @ (ctx.weights * (f - proj))
    z = z + dz
    proj = z @ state.basis
    coeffs = solve_triangular(state.R, z, lower=False)
    return coeffs, proj
