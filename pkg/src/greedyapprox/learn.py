"""Greedy regression estimator with complexity-penalized stopping.

The greedy engine is run on the observed outputs in the empirical norm of the
design, every prefix f_k of the greedy sequence is truncated at level B, and
the number of terms k* is chosen either by a penalized empirical risk or on a
hold-out subset. :class:`SyntheticModel` supplies ground truth so that the
excess risk of a fit can be measured exactly.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.stats import qmc

from greedyapprox.dictionary import Dictionary, truncation_size
from greedyapprox.greedy import GreedyConfig, run
from greedyapprox.hilbert import SpaceContext

SELECTIONS = ("penalized", "holdout")
LEARN_ALGORITHMS = ("OGA", "SPA", "RGA")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Regression sample (x_i, y_i), i < n, with outputs bounded by B."""

    xs: np.ndarray
    ys: np.ndarray
    B: float

    def __post_init__(self):
        xs = np.asarray(self.xs)
        if xs.ndim == 1:
            xs = xs[:, None]
        ys = np.asarray(self.ys, dtype=np.float64).ravel()
        if xs.ndim != 2 or xs.shape[0] != ys.size:
            raise ValueError("xs and ys must have the same number of rows")
        if ys.size < 1:
            raise ValueError("a sample needs at least one observation")
        if not self.B > 0:
            raise ValueError("B must be positive")
        if np.any(np.abs(ys) > self.B):
            raise ValueError(f"outputs exceed the bound B = {self.B}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "B", float(self.B))

    @property
    def n(self) -> int:
        return self.ys.size

    @property
    def input_dim(self) -> int:
        return self.xs.shape[1]

    def points_for(self, d: Dictionary) -> np.ndarray:
        """Evaluation points in the form the dictionary expects."""
        if d.grid_dim is not None:
            return np.rint(self.xs[:, 0]).astype(np.intp)
        return self.xs.astype(np.float64)

    def split(self, n_first: int) -> tuple["SampleSet", "SampleSet"]:
        if not 0 < n_first < self.n:
            raise ValueError("split leaves an empty subset")
        return (SampleSet(self.xs[:n_first], self.ys[:n_first], self.B),
                SampleSet(self.xs[n_first:], self.ys[n_first:], self.B))

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{j}" for j in range(self.input_dim)] + ["y"])
        for x, y in zip(self.xs, self.ys):
            w.writerow([f"{v:.17g}" for v in x] + [f"{y:.17g}"])

    @classmethod
    def from_csv(cls, fh, B: float | None = None) -> "SampleSet":
        """Read ``x_0..x_{D-1}, y`` columns; B defaults to max |y|."""
        rows = list(csv.reader(fh))
        if not rows:
            raise ValueError("empty sample file")
        header = [h.strip() for h in rows[0]]
        D = len(header) - 1
        if D < 1 or header != [f"x_{j}" for j in range(D)] + ["y"]:
            raise ValueError("header must be x_0, ..., x_{D-1}, y")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
        if data.size == 0:
            raise ValueError("no data rows")
        xs, ys = data[:, :D], data[:, D]
        if B is None:
            B = float(np.max(np.abs(ys))) or 1.0
        return cls(xs, ys, B)


def empirical_context(s: SampleSet) -> SpaceContext:
    return SpaceContext.empirical(s.n)


def truncate(v, B: float):
    """Clip to [-B, B]."""
    if not B > 0:
        raise ValueError("B must be positive")
    out = np.clip(v, -B, B)
    return float(out) if np.ndim(out) == 0 else out


def kappa0(B: float, a_exp: float) -> float:
    """Penalty constant for which the risk bound is proved; very pessimistic."""
    return 2568.0 * B ** 4 * (a_exp + 5.0)


@dataclass(frozen=True)
class LearnConfig:
    """Estimator settings.

    ``k_cap=None`` lets the fit choose its own cap: with penalized selection
    it is ceil(B n / kappa), further lowered to the point where the penalty
    alone exceeds the risk of the zero model.
    """

    kappa: float = 1.0
    a_exp: float = 1.0
    algorithm: GreedyConfig = field(default_factory=GreedyConfig)
    selection: str = "penalized"
    split_fraction: float = 0.5
    k_cap: int | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.a_exp < 1:
            raise ValueError("a_exp must be at least 1")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}")
        if self.algorithm.algorithm not in LEARN_ALGORITHMS:
            raise ValueError(f"the estimator uses one of {LEARN_ALGORITHMS}")
        if self.algorithm.algorithm == "RGA" and self.algorithm.alpha_schedule != "one_minus_2_over_k":
            raise ValueError("the estimator's RGA uses the one_minus_2_over_k schedule")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")
        if self.k_cap is not None and self.k_cap < 0:
            raise ValueError("k_cap must be nonnegative")


@dataclass
class FitResult:
    """Selected model T(sum_j coef_j g_j) plus the per-k selection table.

    ``coefficients`` refer to atoms normalized in the empirical norm of the
    training design; ``scales`` are the raw empirical norms used for that
    normalization, so the model is defined at any point through raw atom
    evaluations.
    """

    k_star: int
    atoms: np.ndarray
    coefficients: np.ndarray
    scales: np.ndarray
    B: float
    kappa: float
    n: int
    m: int
    algorithm: str
    selection: str
    risks: np.ndarray
    penalties: np.ndarray

    @property
    def objective(self) -> np.ndarray:
        """Selection criterion per k = 0..K (penalized or validation risk)."""
        return self.risks + self.penalties

    def raw_coefficients(self) -> np.ndarray:
        return self.coefficients / self.scales if self.atoms.size else np.zeros(0)

    def predict(self, d: Dictionary, points) -> np.ndarray:
        """T_B of the selected model at ``points``."""
        pts = np.asarray(points)
        npts = pts.shape[0]
        if self.atoms.size == 0:
            return np.zeros(npts)
        raw = d.evaluate(pts, indices=self.atoms)
        return truncate(self.raw_coefficients() @ raw, self.B)

    def to_json(self) -> str:
        return json.dumps({
            "k_star": self.k_star,
            "atoms": self.atoms.tolist(),
            "coefficients": [float(c) for c in self.coefficients],
            "scales": [float(c) for c in self.scales],
            "B": self.B,
            "kappa": self.kappa,
            "n": self.n,
            "m": self.m,
            "algorithm": self.algorithm,
            "selection": self.selection,
            "risk_table": [{"k": k, "risk": float(r), "penalty": float(p), "objective": float(r + p)}
                           for k, (r, p) in enumerate(zip(self.risks, self.penalties))],
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        o = json.loads(text)
        table = o["risk_table"]
        return cls(
            k_star=o["k_star"], atoms=np.array(o["atoms"], dtype=np.intp),
            coefficients=np.array(o["coefficients"], dtype=np.float64),
            scales=np.array(o["scales"], dtype=np.float64), B=o["B"], kappa=o["kappa"],
            n=o["n"], m=o["m"], algorithm=o["algorithm"], selection=o["selection"],
            risks=np.array([r["risk"] for r in table]), penalties=np.array([r["penalty"] for r in table]),
        )


def _greedy_path(s: SampleSet, d: Dictionary, cfg: LearnConfig, K: int):
    """Materialize D_m in the empirical norm of ``s`` and run the engine K steps.

    Returns the atom set and a list of (atoms, coefficients) for k = 0..K'
    with K' <= K the number of steps actually taken.
    """
    ctx = empirical_context(s)
    m = truncation_size(s.n, cfg.a_exp, d.size)
    A = d.materialize(ctx, s.points_for(d), m)
    models = [(np.zeros(0, dtype=np.intp), np.zeros(0))]
    if K == 0 or not np.any(A.live):
        return A, models
    gcfg = replace(cfg.algorithm, max_steps=K, record_path=True, m=None)
    trace = run(s.ys, A, gcfg, ctx)
    for coef in trace.path:
        models.append((trace.atoms[:coef.size], np.asarray(coef, dtype=np.float64)))
    return A, models


def _result(A, models, k, s, cfg, risks, penalties, selection):
    atoms, coef = models[k]
    return FitResult(
        k_star=int(k), atoms=np.asarray(atoms, dtype=np.intp), coefficients=np.asarray(coef),
        scales=np.asarray(A.raw_norms[atoms], dtype=np.float64), B=s.B, kappa=cfg.kappa, n=s.n, m=A.m,
        algorithm=cfg.algorithm.algorithm, selection=selection,
        risks=np.asarray(risks), penalties=np.asarray(penalties),
    )


def penalized_k_cap(s: SampleSet, cfg: LearnConfig) -> int:
    """Largest k that can still win the penalized comparison."""
    cap = math.ceil(s.B * s.n / cfg.kappa)
    logn = math.log(s.n)
    if logn > 0:
        # kappa k log(n)/n > ||y||_n^2 means k loses to k = 0 outright
        y2 = float(np.mean(s.ys ** 2))
        cap = min(cap, math.floor(y2 * s.n / (cfg.kappa * logn)))
    if cfg.k_cap is not None:
        cap = min(cap, cfg.k_cap)
    return max(cap, 0)


def fit(s: SampleSet, d: Dictionary, cfg: LearnConfig) -> FitResult:
    """Penalized greedy estimator; dispatches to :func:`holdout_fit` if so configured."""
    if cfg.selection == "holdout":
        return holdout_fit(s, d, cfg)
    K = penalized_k_cap(s, cfg)
    A, models = _greedy_path(s, d, cfg, K)
    pen_unit = cfg.kappa * math.log(s.n) / s.n
    risks, pens = [], []
    for k, (atoms, coef) in enumerate(models):
        pred = truncate(coef @ A.vectors[atoms], s.B) if atoms.size else np.zeros(s.n)
        risks.append(float(np.mean((s.ys - pred) ** 2)))
        pens.append(pen_unit * k)
    k_star = int(np.argmin(np.add(risks, pens)))
    return _result(A, models, k_star, s, cfg, risks, pens, "penalized")


def holdout_fit(s: SampleSet, d: Dictionary, cfg: LearnConfig) -> FitResult:
    """Greedy sequence on the first part of the sample, k* chosen on the rest.

    The first floor(split_fraction * n) observations train; the remainder
    validate. Ties go to the smallest k.
    """
    n_train = int(math.floor(cfg.split_fraction * s.n))
    train, valid = s.split(n_train)
    m = truncation_size(train.n, cfg.a_exp, d.size)
    K = m if cfg.k_cap is None else min(cfg.k_cap, m)
    A, models = _greedy_path(train, d, cfg, K)
    final_atoms = models[-1][0]
    raw = d.evaluate(valid.points_for(d), indices=final_atoms) if final_atoms.size else None
    risks = []
    for atoms, coef in models:
        if atoms.size:
            scaled = coef / A.raw_norms[atoms]
            pred = truncate(scaled @ raw[: atoms.size], s.B)
        else:
            pred = np.zeros(valid.n)
        risks.append(float(np.mean((valid.ys - pred) ** 2)))
    k_star = int(np.argmin(risks))
    return _result(A, models, k_star, train, cfg, risks, np.zeros(len(risks)), "holdout")


# -- ground truth ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyntheticModel:
    """Regression function sum_j c_j g_j plus uniform noise on [-sigma, sigma].

    Atoms are normalized in L2(rho_X). The marginal rho_X is uniform on the
    rows of ``grid`` when given, otherwise uniform on the box
    ``[domain_lo, domain_hi]^D`` of the (ridge) dictionary; in the box case
    atom norms come from a fixed 2^14-point scrambled Sobol rule.
    """

    dictionary: Dictionary
    atoms: np.ndarray
    coeffs: np.ndarray
    sigma: float
    grid: np.ndarray | None
    scales: np.ndarray
    B: float

    @classmethod
    def build(cls, d: Dictionary, atoms, coeffs, sigma: float, grid=None) -> "SyntheticModel":
        atoms = np.asarray(atoms, dtype=np.intp)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if atoms.shape != coeffs.shape:
            raise ValueError("atoms and coeffs must have equal length")
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if grid is None and d.grid_dim is not None:
            grid = d.default_points()
        if grid is not None:
            grid = np.asarray(grid)
            raw = d.evaluate(grid, indices=atoms)
            scales = np.sqrt(np.mean(raw ** 2, axis=1))
            if np.any(scales == 0):
                raise ValueError("an atom of f_rho vanishes on the grid")
            fmax = float(np.max(np.abs((coeffs / scales) @ raw))) if atoms.size else 0.0
        else:
            pts = _box_rule(d)
            raw = d.evaluate(pts, indices=atoms)
            scales = np.sqrt(np.mean(raw ** 2, axis=1))
            fmax = float(np.sum(np.abs(coeffs / scales) * [d.sup_bound(i) for i in atoms]))
        # relative slack keeps |f + u| <= B under rounding
        B = (fmax + sigma) * (1 + 1e-12) or 1.0
        return cls(d, atoms, coeffs, float(sigma), grid, scales, B)

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def f_rho(self, points) -> np.ndarray:
        pts = np.asarray(points)
        if self.atoms.size == 0:
            return np.zeros(pts.shape[0])
        return (self.coeffs / self.scales) @ self.dictionary.evaluate(pts, indices=self.atoms)

    def draw_x(self, n: int, rng) -> np.ndarray:
        if self.grid is not None:
            return self.grid[rng.integers(0, self.grid.shape[0], size=n)]
        lo, hi = self.dictionary.params["domain"]
        D = self.dictionary.params["input_dim"]
        return rng.uniform(lo, hi, size=(n, D))

    def sample(self, n: int, rng) -> SampleSet:
        x = self.draw_x(n, rng)
        y = self.f_rho(x) + rng.uniform(-self.sigma, self.sigma, size=n)
        return SampleSet(x, y, self.B)

    def representation_scales(self, points) -> np.ndarray:
        """Raw empirical norms of the model's atoms at ``points``."""
        raw = self.dictionary.evaluate(np.asarray(points), indices=self.atoms)
        return np.sqrt(np.mean(raw ** 2, axis=1))


def _box_rule(d: Dictionary, log2n: int = 14) -> np.ndarray:
    lo, hi = d.params["domain"]
    D = d.params["input_dim"]
    u = qmc.Sobol(D, scramble=True, seed=12345).random_base2(log2n)
    return lo + (hi - lo) * u


def excess_risk(model: FitResult, truth: SyntheticModel, eval_points=None) -> float:
    """||T f_hat - f_rho||^2 in L2(rho_X).

    Exact on a grid marginal (uniform weights over its rows). For a box
    marginal pass Monte Carlo ``eval_points``; see :func:`excess_risk_mc`
    for the standard error.
    """
    if eval_points is None:
        if truth.grid is None:
            raise ValueError("box marginals need eval_points")
        eval_points = truth.grid
    diff = model.predict(truth.dictionary, eval_points) - truth.f_rho(eval_points)
    return float(np.mean(diff ** 2))


def excess_risk_mc(model: FitResult, truth: SyntheticModel, n_eval: int, rng) -> tuple[float, float]:
    """Monte Carlo excess risk and its standard error."""
    x = truth.draw_x(n_eval, rng)
    sq = (model.predict(truth.dictionary, x) - truth.f_rho(x)) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_eval)) if n_eval > 1 else math.inf


class L1nCheck(NamedTuple):
    mean_sq_l1n: float
    l1_sq: float
    stderr: float
    passed: bool


def _l1n(coeffs, scales, raw_design):
    """Sum |c_g| ||g||_n for L2-normalized atoms g evaluated on a design."""
    emp = np.sqrt(np.mean(raw_design ** 2, axis=1)) / scales
    return float(np.sum(np.abs(coeffs) * emp))


def l1n_vs_l1_check(h_atoms, h_coeffs, truth: SyntheticModel, n: int, trials: int, rng) -> L1nCheck:
    """Monte Carlo check of E(sum |c_g| ||g||_n)^2 <= (sum |c_g|)^2.

    ``h`` is the expansion sum c_g g over atoms of ``truth.dictionary``
    normalized in L2(rho_X); each trial draws an n-point design from the
    marginal and renormalizes every atom empirically.
    """
    if trials < 30:
        raise ValueError("at least 30 trials are needed")
    atoms = np.asarray(h_atoms, dtype=np.intp)
    coeffs = np.asarray(h_coeffs, dtype=np.float64)
    l1_sq = float(np.sum(np.abs(coeffs))) ** 2
    if atoms.size == 0:
        return L1nCheck(0.0, 0.0, 0.0, True)
    h = SyntheticModel.build(truth.dictionary, atoms, coeffs, 0.0, truth.grid)
    vals = np.empty(trials)
    for t in range(trials):
        x = truth.draw_x(n, rng)
        vals[t] = _l1n(coeffs, h.scales, truth.dictionary.evaluate(x, indices=atoms)) ** 2
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials))
    return L1nCheck(mean, l1_sq, se, mean <= l1_sq + 3 * se)


def l1n_expectation_exact(h_atoms, h_coeffs, truth: SyntheticModel, n: int,
                          max_designs: int = 10 ** 6) -> float:
    """E(sum |c_g| ||g||_n)^2 over n iid uniform draws from a finite grid.

    Designs are enumerated as multisets of grid rows, weighted by their
    multinomial probability.
    """
    if truth.grid is None:
        raise ValueError("exact expectation needs a grid marginal")
    atoms = np.asarray(h_atoms, dtype=np.intp)
    coeffs = np.asarray(h_coeffs, dtype=np.float64)
    if atoms.size == 0:
        return 0.0
    h = SyntheticModel.build(truth.dictionary, atoms, coeffs, 0.0, truth.grid)
    G = truth.grid.shape[0]
    if math.comb(n + G - 1, G - 1) > max_designs:
        raise ValueError("too many designs to enumerate")
    raw = truth.dictionary.evaluate(truth.grid, indices=atoms)  # (k, G)
    sq = raw ** 2
    total = 0.0
    for combo in itertools.combinations_with_replacement(range(G), n):
        counts = np.bincount(combo, minlength=G)
        logp = math.lgamma(n + 1) - sum(math.lgamma(c + 1) for c in counts) - n * math.log(G)
        emp = np.sqrt(sq @ counts / n) / h.scales
        total += math.exp(logp) * float(np.sum(np.abs(coeffs) * emp)) ** 2
    return total
