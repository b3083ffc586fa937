"""Dictionaries of atoms and the greedy selection rule.

A :class:`Dictionary` is an ordered (exhausted) family of raw functions. It is
turned into unit-norm vectors for a particular :class:`SpaceContext` and
evaluation points by :meth:`Dictionary.materialize`, which yields an
:class:`AtomSet`; greedy engines only ever see the dense ``AtomSet``.

Supported kinds
---------------
``orthonormal_canonical``
    Unit vectors on a grid of ``dim`` integer points.
``union_of_bases``
    Union of orthonormal bases on a grid (``canonical`` and/or ``dct``),
    exhausted by interleaving: atom j of each basis before atom j+1.
``ridge``
    Functions ``x -> act(s * (<v, x> + w))`` with ``act`` heaviside or
    logistic, directions ``v`` on the unit sphere and offsets ``w``.
``explicit``
    Rows of a user-supplied matrix, one value per grid point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtri
from scipy.stats import qmc

from greedyapprox import kernels
from greedyapprox.hilbert import SpaceContext

DEAD_TOL = 1e-12

KINDS = ("orthonormal_canonical", "union_of_bases", "ridge", "explicit")
BASES = ("canonical", "dct")
ACTIVATIONS = ("heaviside", "logistic")


class DeadAtomError(ValueError):
    """The atom has (numerically) zero norm in the given space."""


class NoLiveAtomsError(ValueError):
    """Every atom of the truncated dictionary is dead."""


def dyadic_offsets(levels: int) -> np.ndarray:
    """Relative offsets in (-1, 1), coarse to fine.

    Level 0 is the midpoint; level l adds the odd multiples of 2**-l. Levels
    0..L give 2**(L+1) - 1 offsets.
    """
    out = [0.0]
    for lev in range(1, levels + 1):
        step = 2.0 ** -lev
        out.extend(k * step for k in range(-(2 ** lev) + 1, 2 ** lev, 2))
    return np.array(out)


def sphere_directions(count: int, dim: int) -> np.ndarray:
    """Deterministic unit directions in R^dim.

    For dim=1 these are +1, -1. Otherwise an unscrambled Halton sequence
    (first point skipped) is mapped through the normal quantile function and
    projected on the sphere.
    """
    if dim == 1:
        if count > 2:
            raise ValueError("only two directions exist in one dimension")
        return np.array([[1.0], [-1.0]])[:count]
    pts = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
    g = ndtri(pts)
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    return g / nrm


def _dct_atom(j, points, dim):
    c = math.sqrt((1.0 if j == 0 else 2.0) / dim)
    return c * np.cos(np.pi * j * (np.asarray(points, dtype=np.float64) + 0.5) / dim)


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Immutable, exhausted dictionary of raw atoms."""

    kind: str
    params: dict = field(default_factory=dict)

    # -- constructors -----------------------------------------------------
    @classmethod
    def canonical(cls, dim: int) -> "Dictionary":
        return cls("orthonormal_canonical", {"dim": int(dim)})

    @classmethod
    def union_of_bases(cls, dim: int, bases=("canonical", "dct")) -> "Dictionary":
        bases = tuple(bases)
        for b in bases:
            if b not in BASES:
                raise ValueError(f"unknown basis {b!r}")
        return cls("union_of_bases", {"dim": int(dim), "bases": bases})

    @classmethod
    def explicit(cls, atoms) -> "Dictionary":
        atoms = np.array(atoms, dtype=np.float64)
        if atoms.ndim != 2:
            raise ValueError("explicit atoms must be a 2-d array (m, dim)")
        atoms.setflags(write=False)
        return cls("explicit", {"atoms": atoms, "dim": atoms.shape[1]})

    @classmethod
    def ridge(
        cls,
        input_dim: int = 1,
        activation: str = "heaviside",
        n_directions: int | None = None,
        offset_levels: int = 4,
        domain=(0.0, 1.0),
        sharpness: float = 1.0,
        directions=None,
        offsets=None,
        absolute_offsets: bool = False,
    ) -> "Dictionary":
        """Ridge dictionary ``act(s*(<v,x> + w))``.

        By default offsets are relative positions ``u`` in (-1, 1): for each
        direction the threshold sits at ``mid + half*u`` of the range of
        ``<v, x>`` over the box ``domain**input_dim``. With
        ``absolute_offsets`` the given offsets are used as ``w`` directly.
        Exhaustion: for each offset (coarse to fine), every direction.
        """
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if directions is None:
            if n_directions is None:
                n_directions = 2 if input_dim == 1 else 8
            directions = sphere_directions(n_directions, input_dim)
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        if directions.shape[1] != input_dim:
            raise ValueError("directions must have input_dim columns")
        levels = None
        if offsets is None:
            levels = int(offset_levels)
            offsets = dyadic_offsets(levels)
        offsets = np.atleast_1d(np.asarray(offsets, dtype=np.float64))
        lo, hi = float(domain[0]), float(domain[1])
        if absolute_offsets:
            w = np.broadcast_to(offsets, (directions.shape[0], offsets.size)).copy()
        else:
            pmin = np.minimum(directions * lo, directions * hi).sum(axis=1)
            pmax = np.maximum(directions * lo, directions * hi).sum(axis=1)
            mid, half = (pmin + pmax) / 2, (pmax - pmin) / 2
            w = -(mid[:, None] + half[:, None] * offsets[None, :])
        # exhaustion: offset-major, direction-minor
        dir_idx = np.tile(np.arange(directions.shape[0]), offsets.size)
        off_idx = np.repeat(np.arange(offsets.size), directions.shape[0])
        table_w = w[dir_idx, off_idx]
        for arr in (directions, table_w, dir_idx):
            arr.setflags(write=False)
        return cls(
            "ridge",
            {
                "input_dim": int(input_dim),
                "activation": activation,
                "directions": directions,
                "offsets": offsets,
                "offset_levels": levels,
                "absolute_offsets": bool(absolute_offsets),
                "domain": (lo, hi),
                "sharpness": float(sharpness),
                "_dir": dir_idx,
                "_w": table_w,
            },
        )

    @classmethod
    def from_config(cls, cfg: dict) -> "Dictionary":
        """Build from a flat mapping of strings (see the CLI config schema)."""
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)
        if kind not in KINDS or kind == "explicit":
            raise ValueError(f"dictionary kind must be one of {KINDS[:3]}, got {kind!r}")
        if kind == "orthonormal_canonical":
            d = cls.canonical(int(cfg.pop("dim")))
        elif kind == "union_of_bases":
            bases = [b.strip() for b in str(cfg.pop("bases", "canonical, dct")).split(",")]
            d = cls.union_of_bases(int(cfg.pop("dim")), bases)
        else:
            kw = {}
            if "input_dim" in cfg:
                kw["input_dim"] = int(cfg.pop("input_dim"))
            if "activation" in cfg:
                kw["activation"] = cfg.pop("activation").strip()
            if "n_directions" in cfg:
                kw["n_directions"] = int(cfg.pop("n_directions"))
            if "offset_levels" in cfg:
                kw["offset_levels"] = int(cfg.pop("offset_levels"))
            if "sharpness" in cfg:
                kw["sharpness"] = float(cfg.pop("sharpness"))
            lo = float(cfg.pop("domain_lo", 0.0))
            hi = float(cfg.pop("domain_hi", 1.0))
            kw["domain"] = (lo, hi)
            d = cls.ridge(**kw)
        if cfg:
            raise ValueError(f"unknown dictionary keys: {sorted(cfg)}")
        return d

    def to_config(self) -> dict:
        p = self.params
        if self.kind == "orthonormal_canonical":
            return {"kind": self.kind, "dim": p["dim"]}
        if self.kind == "union_of_bases":
            return {"kind": self.kind, "dim": p["dim"], "bases": ", ".join(p["bases"])}
        if self.kind == "explicit":
            return {"kind": self.kind, "dim": p["dim"], "size": self.size}
        out = {
            "kind": "ridge",
            "input_dim": p["input_dim"],
            "activation": p["activation"],
            "n_directions": p["directions"].shape[0],
            "offset_levels": p["offset_levels"],
            "domain_lo": p["domain"][0],
            "domain_hi": p["domain"][1],
            "sharpness": p["sharpness"],
        }
        if p["offset_levels"] is None or p["absolute_offsets"]:
            # custom grids are not expressible in the flat schema
            out["offsets"] = p["offsets"].tolist()
            del out["offset_levels"]
        return out

    # -- structure --------------------------------------------------------
    @property
    def size(self) -> int:
        p = self.params
        if self.kind == "orthonormal_canonical":
            return p["dim"]
        if self.kind == "union_of_bases":
            return p["dim"] * len(p["bases"])
        if self.kind == "explicit":
            return p["atoms"].shape[0]
        return p["_w"].size

    @property
    def grid_dim(self) -> int | None:
        """Number of grid points for grid kinds, None for ridge."""
        return None if self.kind == "ridge" else self.params["dim"]

    def default_points(self) -> np.ndarray:
        if self.kind == "ridge":
            raise ValueError("ridge dictionaries need explicit evaluation points")
        return np.arange(self.params["dim"])

    def _check_index(self, index: int) -> int:
        index = int(index)
        if not 0 <= index < self.size:
            raise IndexError(f"atom index {index} out of range [0, {self.size})")
        return index

    def sup_bound(self, index: int) -> float:
        """Upper bound on ``sup_x |raw atom(x)|``."""
        index = self._check_index(index)
        if self.kind == "ridge":
            return 1.0
        if self.kind == "orthonormal_canonical":
            return 1.0
        if self.kind == "explicit":
            return float(np.max(np.abs(self.params["atoms"][index])))
        dim = self.params["dim"]
        basis = self.params["bases"][index % len(self.params["bases"])]
        j = index // len(self.params["bases"])
        if basis == "canonical":
            return 1.0
        return math.sqrt((1.0 if j == 0 else 2.0) / dim)

    # -- evaluation -------------------------------------------------------
    def atom_eval(self, index: int, points) -> np.ndarray:
        """Raw (unnormalized) values of one atom at ``points``."""
        index = self._check_index(index)
        return self.evaluate(points, indices=[index])[0]

    def evaluate(self, points, m: int | None = None, indices=None) -> np.ndarray:
        """Raw values of atoms ``indices`` (default: first ``m``) at ``points``.

        Returns an (n_atoms, n_points) array. Grid kinds take integer grid
        indices as points; ridge dictionaries take an (n, input_dim) array.
        """
        if indices is None:
            m = self.size if m is None else min(int(m), self.size)
            indices = np.arange(m)
        else:
            indices = np.asarray(indices, dtype=np.intp)
            if indices.size and (indices.min() < 0 or indices.max() >= self.size):
                raise IndexError("atom index out of range")
        p = self.params
        if self.kind == "ridge":
            x = np.asarray(points, dtype=np.float64)
            if x.ndim == 1:
                x = x[:, None] if p["input_dim"] == 1 else x[None, :]
            if x.shape[1] != p["input_dim"]:
                raise ValueError("points must have input_dim columns")
            proj = x @ p["directions"].T  # (n, n_dir)
            z = proj[:, p["_dir"][indices]].T + p["_w"][indices][:, None]
            if p["activation"] == "heaviside":
                return (z > 0).astype(np.float64)
            return expit(p["sharpness"] * z)
        pts = np.asarray(points)
        if pts.ndim != 1 or not np.issubdtype(pts.dtype, np.integer):
            raise ValueError("grid dictionaries take 1-d integer grid points")
        dim = p["dim"]
        if pts.size and (pts.min() < 0 or pts.max() >= dim):
            raise IndexError("grid point out of range")
        if self.kind == "explicit":
            return np.ascontiguousarray(p["atoms"][np.ix_(indices, pts)])
        out = np.empty((indices.size, pts.size))
        nb = 1 if self.kind == "orthonormal_canonical" else len(p["bases"])
        bases = ("canonical",) if nb == 1 else p["bases"]
        for row, idx in enumerate(indices):
            basis = bases[idx % nb]
            j = idx // nb
            if basis == "canonical":
                out[row] = (pts == j).astype(np.float64)
            else:
                out[row] = _dct_atom(j, pts, dim)
        return out

    def materialize(self, ctx: SpaceContext, points=None, m: int | None = None) -> "AtomSet":
        """Normalize the first ``m`` atoms in ``ctx``; zero-norm atoms are dead."""
        if points is None:
            points = self.default_points()
        raw = self.evaluate(points, m)
        if raw.shape[1] != ctx.dim:
            raise ValueError("number of points does not match the space dimension")
        return AtomSet.from_raw(raw, ctx, dictionary=self)


@dataclass(frozen=True, eq=False)
class AtomSet:
    """Dense unit-norm atoms of a truncated dictionary in one space.

    ``vectors`` has one row per atom in exhaustion order; dead atoms (raw
    norm <= ``DEAD_TOL``) keep a zero row and ``live[i] == 0``.
    """

    ctx: SpaceContext
    vectors: np.ndarray = field(repr=False)
    raw_norms: np.ndarray = field(repr=False)
    live: np.ndarray = field(repr=False)
    dictionary: Dictionary | None = None

    @classmethod
    def from_raw(cls, raw, ctx: SpaceContext, dictionary=None) -> "AtomSet":
        raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
        norms = np.sqrt(np.maximum((raw * raw) @ ctx.weights, 0.0))
        live = norms > DEAD_TOL
        vec = np.zeros_like(raw)
        vec[live] = raw[live] / norms[live, None]
        vec = np.ascontiguousarray(vec)
        for arr in (vec, norms):
            arr.setflags(write=False)
        return cls(ctx, vec, norms, live.astype(np.uint8), dictionary)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    def vector(self, index: int) -> np.ndarray:
        if not self.live[index]:
            raise DeadAtomError(f"atom {index} is dead in this space")
        return self.vectors[index]

    def prefix(self, m: int) -> "AtomSet":
        m = min(int(m), self.m)
        return AtomSet(self.ctx, self.vectors[:m], self.raw_norms[:m], self.live[:m], self.dictionary)

    def correlations(self, r) -> np.ndarray:
        return self.vectors @ (self.ctx.weights * np.asarray(r, dtype=np.float64))

    def select(self, r) -> tuple[int, float]:
        """Atom maximizing ``|<r, g>|`` (lowest index on ties) and ``<r, g>``."""
        wr = np.ascontiguousarray(self.ctx.weights * np.asarray(r, dtype=np.float64))
        i, c = kernels.argmax_abs_correlation(self.vectors, wr, self.live)
        if i < 0:
            raise NoLiveAtomsError("all atoms in the truncated dictionary are dead")
        return int(i), float(c)

    def is_orthonormal(self, tol: float = 1e-10) -> bool:
        if not np.all(self.live):
            return False
        g = (self.vectors * self.ctx.weights) @ self.vectors.T
        return bool(np.max(np.abs(g - np.eye(self.m)), initial=0.0) <= tol)

    def synthesize(self, indices, coeffs) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.intp)
        return np.asarray(coeffs, dtype=np.float64) @ self.vectors[idx]


def as_atoms(d, ctx: SpaceContext, m: int | None = None, points=None) -> AtomSet:
    """Accept either a Dictionary or an AtomSet and return an AtomSet."""
    if isinstance(d, AtomSet):
        if d.ctx != ctx:
            raise ValueError("atom set was materialized for a different space")
        return d if m is None else d.prefix(m)
    return d.materialize(ctx, points, m)


# -- functional interface ----------------------------------------------------

def atom_eval(d: Dictionary, index: int, points) -> np.ndarray:
    return d.atom_eval(index, points)


def normalize(d: Dictionary, index: int, ctx: SpaceContext, points=None) -> np.ndarray:
    """Unit-norm version of atom ``index`` in ``ctx``; raises DeadAtomError."""
    if points is None:
        points = d.default_points()
    raw = ctx.check(d.atom_eval(index, points))
    nrm = float(np.sqrt(np.dot(ctx.weights * raw, raw)))
    if nrm <= DEAD_TOL:
        raise DeadAtomError(f"atom {index} has norm {nrm:.3g}")
    return raw / nrm


def select_max_correlation(d, m: int, ctx: SpaceContext, r, points=None) -> tuple[int, float]:
    if m < 1:
        raise ValueError("m must be at least 1")
    return as_atoms(d, ctx, m, points).select(ctx.check(r))


def truncation_size(n: int, a_exp: float, total: int | None = None) -> int:
    """``floor(n**a)`` capped at the dictionary size ``total``."""
    if n < 1:
        raise ValueError("n must be positive")
    # guard against 7**1.5 style values landing a hair below an integer
    m = math.floor(n ** a_exp * (1 + 1e-12))
    m = max(m, 1)
    return m if total is None else min(m, int(total))
