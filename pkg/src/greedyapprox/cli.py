"""Command-line experiment harness.

Subcommands::

    greedyapprox approx-rate     greedy residual rates and bound checks
    greedyapprox learn-rate      excess risk of the penalized estimator versus n
    greedyapprox consistency     same estimator, target outside the l1 ball
    greedyapprox oracle-compare  greedy errors against brute-force best N-term

Common flags: ``--config PATH`` (INI file), ``--out DIR``, ``--seed U64``
(overrides ``[experiment] seed``), ``--jobs N`` and ``--svg``.

Config schema
-------------
Flat INI with one level of sections. Every key has a default (see
``SCHEMA``); unknown sections or keys are errors reported with their line
number. Lists are comma separated. The ``[dictionary]`` section, when present,
replaces the default dictionary entirely and takes the keys understood by
``Dictionary.from_config``: ``kind`` (orthonormal_canonical, union_of_bases,
ridge), ``dim``, ``bases``, ``input_dim``, ``activation``, ``n_directions``,
``offset_levels``, ``sharpness``, ``domain_lo``, ``domain_hi``.

Seeding
-------
Every cell draws from ``numpy.random.default_rng(SeedSequence([seed, tag,
a, b]))`` where ``tag`` identifies the experiment (1 approx-rate, 2 learn-rate,
3 consistency, 4 oracle-compare, 5 truth construction) and ``(a, b)`` index the
cell, so results do not depend on ``--jobs`` or on execution order.

Exit status: 0 when every check in the run passes, 1 when some check fails,
2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from greedyapprox import analysis, greedy, learn
from greedyapprox.dictionary import Dictionary
from greedyapprox.hilbert import SpaceContext

TAGS = {"approx-rate": 1, "learn-rate": 2, "consistency": 3, "oracle-compare": 4, "truth": 5}

SCHEMA = {
    "approx-rate": {
        "experiment": {"seed": "0", "seeds": "1", "n_max": "64"},
        "dictionary": {"kind": "orthonormal_canonical", "dim": "2048"},
        "algorithm": {"algorithms": "OGA", "alpha_schedule": "one_minus_1_over_k", "lam": "2.0"},
        "target": {"p_values": "1.0, 1.3333333333333333", "slope_max": "-0.45, -0.20",
                   "l1_target": "true", "l1_terms": "32", "l1_slope_max": "", "zero_target": "false"},
    },
    "learn-rate": {
        "experiment": {"seed": "0", "seeds": "50", "n_values": "64, 256, 1024, 4096",
                       "slope_max": "-0.35", "ratio_max": "0.25"},
        "dictionary": {"kind": "ridge", "input_dim": "1", "activation": "heaviside", "offset_levels": "6"},
        "truth": {"atoms": "1, 2, 4", "coeffs": "-0.4, 0.35, 0.25", "decay": "", "amplitude": "1.0",
                  "sigma": "0.1", "grid_size": "256"},
        "learn": {"kappa": "1.0", "a_exp": "1.0", "algorithm": "OGA", "selection": "penalized",
                  "split_fraction": "0.5"},
    },
    "consistency": {
        "experiment": {"seed": "0", "seeds": "50", "n_values": "128, 512, 4096",
                       "slope_max": "", "ratio_max": "0.5"},
        "dictionary": {"kind": "union_of_bases", "dim": "64", "bases": "dct"},
        "truth": {"atoms": "", "coeffs": "", "decay": "1.0", "amplitude": "0.5",
                  "sigma": "0.2", "grid_size": "64"},
        "learn": {"kappa": "1.0", "a_exp": "1.0", "algorithm": "OGA", "selection": "penalized",
                  "split_fraction": "0.5"},
    },
    "oracle-compare": {
        "experiment": {"seed": "0", "n_max": "4"},
        "orthonormal": {"instances": "10", "dim": "12"},
        "coherent": {"instances": "20", "dim": "8", "m": "12", "n_terms": "4", "eps": "0.05",
                     "lams": "2, 3"},
        "truncated": {"dim": "1024", "r_exp": "1.0", "m_values": "16, 64, 256", "k_max": "32"},
    },
}


class ConfigError(Exception):
    pass


class Config:
    """Resolved key/value view of an INI file over the schema defaults."""

    def __init__(self, command: str, text: str | None = None, source: str = "<config>"):
        self.command = command
        self.source = source
        self.values = {sec: dict(keys) for sec, keys in SCHEMA[command].items()}
        self.lines = {}
        if text:
            self._load(text)

    def _load(self, text):
        cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
        cp.optionxform = str
        try:
            cp.read_string(text, source=self.source)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"{self.source}:{line}: {exc.message.splitlines()[0]}" if line
                              else f"{self.source}: {exc}") from None
        section_line, key_line, current = {}, {}, None
        for no, raw in enumerate(text.splitlines(), start=1):
            s = raw.strip()
            if m := re.match(r"^\[([^\]]+)\]", s):
                current = m.group(1).strip()
                section_line[current] = no
            elif current and (m := re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)):
                key_line[(current, m.group(1).strip())] = no
        for sec in cp.sections():
            if sec not in self.values:
                raise ConfigError(f"{self.source}:{section_line.get(sec)}: unknown section [{sec}]")
            if sec == "dictionary":
                self.values[sec] = {}
            for key, val in cp.items(sec):
                line = key_line.get((sec, key))
                if sec != "dictionary" and key not in self.values[sec]:
                    raise ConfigError(f"{self.source}:{line}: unknown key {key!r} in [{sec}]")
                self.values[sec][key] = val
                self.lines[(sec, key)] = line

    def where(self, sec, key) -> str:
        line = self.lines.get((sec, key))
        return f"{self.source}:{line}" if line else f"default [{sec}] {key}"

    def _conv(self, sec, key, fn):
        raw = self.values[sec][key]
        try:
            return fn(raw.strip())
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.where(sec, key)}: bad value {raw!r} for {key}: {exc}") from None

    def get_str(self, sec, key) -> str:
        return self.values[sec][key].strip()

    def get_int(self, sec, key) -> int:
        return self._conv(sec, key, int)

    def get_float(self, sec, key) -> float:
        return self._conv(sec, key, float)

    def get_bool(self, sec, key) -> bool:
        def conv(s):
            if s.lower() in ("1", "true", "yes", "on"):
                return True
            if s.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        return self._conv(sec, key, conv)

    def get_list(self, sec, key, fn=float) -> list:
        return self._conv(sec, key, lambda s: [fn(x.strip()) for x in s.split(",") if x.strip()])

    def optional_float(self, sec, key):
        return None if not self.get_str(sec, key) else self.get_float(sec, key)

    def dictionary(self) -> Dictionary:
        try:
            return Dictionary.from_config(self.values["dictionary"])
        except (ValueError, KeyError, TypeError) as exc:
            keys = [k for (s, k) in self.lines if s == "dictionary"]
            where = self.where("dictionary", keys[0]) if keys else "default [dictionary]"
            raise ConfigError(f"{where}: invalid dictionary: {exc}") from None

    def require(self, cond, sec, key, msg):
        if not cond:
            raise ConfigError(f"{self.where(sec, key)}: {msg}")


def _rng(master: int, tag: str, a: int, b: int = 0):
    return np.random.default_rng(np.random.SeedSequence([master, TAGS[tag], a, b]))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.17g}"
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        return None if not math.isfinite(o) else float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def _write_report(out, cfg: Config, results: dict, passed: bool):
    report = {"command": cfg.command, "config": cfg.values, "passed": passed, "results": results}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=1, sort_keys=True)
        fh.write("\n")


def fit_slope(N, err):
    """Slope over the positive errors; ``None`` when fewer than 3 remain."""
    N, err = np.asarray(N, float), np.asarray(err, float)
    keep = err > 0
    if keep.sum() < 3:
        return None
    return analysis.rate_slope(np.column_stack([N[keep], err[keep]]))


# -- approx-rate -----------------------------------------------------------------

def _engine_configs(algorithms, schedule, lam, n_max):
    out = []
    for name in algorithms:
        sched = schedule if name == "RGA" else "one_minus_1_over_k"
        out.append(greedy.GreedyConfig(name, sched, lam, max_steps=n_max))
    return out


def _bounds_for(gcfg: greedy.GreedyConfig):
    """Bounds applicable to a run on f in the l1 class with h = f."""
    if gcfg.algorithm in ("OGA", "SPA"):
        return ["oga_l1", "oga_quadratic"]
    if gcfg.algorithm == "RGA":
        if gcfg.alpha_schedule == "one_minus_1_over_k":
            return ["rga_l1"]
        if gcfg.alpha_schedule == "one_minus_2_over_k":
            return ["rga_quadratic"]
        return ["rga_lambda"] if gcfg.lam > 1 else []
    return []


def _label(gcfg):
    if gcfg.algorithm != "RGA":
        return gcfg.algorithm
    if gcfg.alpha_schedule == "lambda":
        return f"RGA[lambda={gcfg.lam:g}]"
    return f"RGA[{gcfg.alpha_schedule}]"


def _approx_cell(task):
    dcfg, target, seed_pos, gcfg, master = task
    d = Dictionary.from_config(dcfg)
    ctx = SpaceContext.euclidean(d.grid_dim) if d.grid_dim else None
    if ctx is None:
        raise ValueError("approx-rate needs a grid dictionary")
    A = d.materialize(ctx)
    rng = _rng(master, "approx-rate", seed_pos, target["index"])
    if target["kind"] == "bp":
        f, rep = analysis.synth_bp_function(A, None, target["p"], rng, ctx)
    elif target["kind"] == "l1":
        rep = analysis.synth_l1_function(A, target["terms"], rng)
        f = rep.vector
    else:
        rep = analysis.Representation.build(A, [], [])
        f = np.zeros(ctx.dim)
    trace = greedy.run(f, A, gcfg, ctx)
    n_max = gcfg.max_steps
    N = np.arange(1, n_max + 1)
    res = np.array([trace.residual_norm_at(k) for k in N])
    bounds = []
    fn = trace.f_norm
    for kind in _bounds_for(gcfg):
        rep_b = greedy.residual_bound_check(trace, rep.l1, 0.0, kind, h_norm=fn, lam=gcfg.lam, n_max=n_max)
        bounds.append((kind, rep_b.lhs, rep_b.rhs, rep_b.passed))
    return {"residuals": res, "bounds": bounds, "f_norm": fn, "l1": rep.l1}


def cmd_approx_rate(cfg: Config, out: str, jobs: int = 1, svg: bool = False) -> bool:
    master = cfg.get_int("experiment", "seed")
    seeds = cfg.get_int("experiment", "seeds")
    n_max = cfg.get_int("experiment", "n_max")
    cfg.require(seeds >= 1, "experiment", "seeds", "need at least one seed")
    cfg.require(n_max >= 3, "experiment", "n_max", "need n_max >= 3")
    d = cfg.dictionary()
    cfg.require(d.grid_dim is not None, "dictionary", "kind", "approx-rate needs a grid dictionary")
    algorithms = cfg.get_list("algorithm", "algorithms", str)
    for a in algorithms:
        cfg.require(a in greedy.ALGORITHMS, "algorithm", "algorithms", f"unknown algorithm {a!r}")
    schedule = cfg.get_str("algorithm", "alpha_schedule")
    cfg.require(schedule in greedy.SCHEDULES, "algorithm", "alpha_schedule", "unknown schedule")
    lam = cfg.get_float("algorithm", "lam")
    cfg.require(schedule != "lambda" or lam >= 1, "algorithm", "lam", "lam must be >= 1")
    ps = cfg.get_list("target", "p_values")
    smax = cfg.get_list("target", "slope_max")
    cfg.require(len(smax) in (0, len(ps)), "target", "slope_max", "one threshold per p value")
    for p in ps:
        cfg.require(p > 0, "target", "p_values", "p must be positive")
    targets = [{"kind": "bp", "p": p, "name": f"bp_p={p:.6g}", "slope_max": smax[i] if smax else None}
               for i, p in enumerate(ps)]
    if cfg.get_bool("target", "l1_target"):
        targets.append({"kind": "l1", "terms": cfg.get_int("target", "l1_terms"), "name": "l1_ball",
                        "slope_max": cfg.optional_float("target", "l1_slope_max")})
    if cfg.get_bool("target", "zero_target"):
        targets.append({"kind": "zero", "name": "zero", "slope_max": None})
    cfg.require(targets, "target", "p_values", "no targets configured")
    for i, t in enumerate(targets):
        t["index"] = i
    gcfgs = _engine_configs(algorithms, schedule, lam, n_max)
    tasks = [(cfg.values["dictionary"], t, s, g, master)
             for t in targets for s in range(seeds) for g in gcfgs]
    results = _map(_approx_cell, tasks, jobs)

    res_rows, bound_rows, summary_rows, summary = [], [], [], []
    passed = True
    for (dcfg, t, s, g, _), r in zip(tasks, results):
        lab = _label(g)
        N = np.arange(1, n_max + 1)
        for k, v in zip(N, r["residuals"]):
            res_rows.append((t["name"], lab, s, k, v))
        bounds_ok = True
        for kind, lhs, rhs, ok in r["bounds"]:
            bounds_ok &= bool(np.all(ok))
            for k in range(n_max):
                bound_rows.append((t["name"], lab, s, kind, k + 1, lhs[k], rhs[k], bool(ok[k])))
        fitted = fit_slope(N, r["residuals"])
        if r["f_norm"] == 0 or fitted is None:
            slope = intercept = r2 = float("nan")
            status = "exact_recovery"
            slope_ok = True
        else:
            slope, intercept, r2 = fitted
            status = "fitted"
            slope_ok = t["slope_max"] is None or slope <= t["slope_max"]
        ok = bounds_ok and slope_ok
        passed &= ok
        summary_rows.append((t["name"], lab, s, slope, intercept, r2,
                             "" if t["slope_max"] is None else t["slope_max"], slope_ok, bounds_ok, status))
        summary.append({"target": t["name"], "algorithm": lab, "seed": s, "slope": slope, "r2": r2,
                        "slope_max": t["slope_max"], "slope_ok": slope_ok, "bounds_ok": bounds_ok,
                        "status": status, "f_norm": r["f_norm"], "l1_bound": r["l1"]})
    _write_csv(os.path.join(out, "residuals.csv"), ["target", "algorithm", "seed", "N", "residual_norm"], res_rows)
    _write_csv(os.path.join(out, "bounds.csv"),
               ["target", "algorithm", "seed", "bound", "N", "lhs", "rhs", "passed"], bound_rows)
    _write_csv(os.path.join(out, "summary.csv"),
               ["target", "algorithm", "seed", "slope", "intercept", "r2", "slope_max", "slope_ok",
                "bounds_ok", "status"], summary_rows)
    _write_report(out, cfg, {"cells": summary}, passed)
    if svg:
        series = {}
        for row in res_rows:
            series.setdefault((row[0], row[1], row[2]), []).append((row[3], row[4]))
        _plot(os.path.join(out, "residuals.svg"), series, "N", "residual norm")
    return passed


# -- learn-rate / consistency ------------------------------------------------

def _learning_setup(cfg: Config, command: str):
    d = cfg.dictionary()
    master = cfg.get_int("experiment", "seed")
    sigma = cfg.get_float("truth", "sigma")
    cfg.require(sigma >= 0, "truth", "sigma", "sigma must be nonnegative")
    decay = cfg.optional_float("truth", "decay")
    if decay is not None:
        m = d.size
        j = np.arange(1, m + 1, dtype=np.float64)
        signs = _rng(master, "truth", TAGS[command]).choice([-1.0, 1.0], size=m)
        atoms = list(range(m))
        coeffs = list(cfg.get_float("truth", "amplitude") * signs * j ** -decay)
    else:
        atoms = cfg.get_list("truth", "atoms", int)
        coeffs = cfg.get_list("truth", "coeffs")
        cfg.require(len(atoms) == len(coeffs) and atoms, "truth", "coeffs",
                    "atoms and coeffs must be nonempty lists of equal length")
        cfg.require(all(0 <= a < d.size for a in atoms), "truth", "atoms", "atom index out of range")
    G = cfg.get_int("truth", "grid_size")
    if d.grid_dim is None:
        cfg.require(G >= 1, "truth", "grid_size", "grid_size must be positive")
        lo, hi = d.params["domain"]
        D = d.params["input_dim"]
        cfg.require(D == 1, "truth", "grid_size", "grid marginals are built for input_dim = 1")
        grid = (lo + (hi - lo) * (np.arange(G) + 0.5) / G)[:, None]
    else:
        cfg.require(G == d.grid_dim, "truth", "grid_size", "grid_size must equal the dictionary dim")
        grid = None
    try:
        truth = learn.SyntheticModel.build(d, atoms, coeffs, sigma, grid)
    except ValueError as exc:
        raise ConfigError(f"{cfg.where('truth', 'atoms')}: {exc}") from None
    algo = cfg.get_str("learn", "algorithm")
    cfg.require(algo in learn.LEARN_ALGORITHMS, "learn", "algorithm", "unsupported algorithm")
    sched = "one_minus_2_over_k" if algo == "RGA" else "one_minus_1_over_k"
    try:
        lcfg = learn.LearnConfig(
            kappa=cfg.get_float("learn", "kappa"), a_exp=cfg.get_float("learn", "a_exp"),
            algorithm=greedy.GreedyConfig(algo, sched), selection=cfg.get_str("learn", "selection"),
            split_fraction=cfg.get_float("learn", "split_fraction"))
    except ValueError as exc:
        raise ConfigError(f"[learn]: {exc}") from None
    n_values = cfg.get_list("experiment", "n_values", int)
    cfg.require(len(n_values) >= 2 and all(n >= 2 for n in n_values), "experiment", "n_values",
                "need at least two sample sizes >= 2")
    seeds = cfg.get_int("experiment", "seeds")
    cfg.require(seeds >= 1, "experiment", "seeds", "need at least one seed")
    return d, truth, lcfg, n_values, seeds, master


def _learn_cell(task):
    command, dcfg, truth_args, lcfg, n, s, master = task
    d = Dictionary.from_config(dcfg)
    atoms, coeffs, sigma, grid = truth_args
    truth = learn.SyntheticModel.build(d, atoms, coeffs, sigma, grid)
    sample = truth.sample(n, _rng(master, command, n, s))
    model = learn.fit(sample, d, lcfg)
    return model.k_star, learn.excess_risk(model, truth)


def _run_learning(cfg: Config, out: str, jobs: int, svg: bool, command: str) -> bool:
    d, truth, lcfg, n_values, seeds, master = _learning_setup(cfg, command)
    truth_args = (truth.atoms.tolist(), truth.coeffs.tolist(), truth.sigma, truth.grid)
    tasks = [(command, cfg.values["dictionary"], truth_args, lcfg, n, s, master)
             for n in n_values for s in range(seeds)]
    results = _map(_learn_cell, tasks, jobs)
    cell_rows, by_n = [], {n: [] for n in n_values}
    for (_, _, _, _, n, s, _), (k, er) in zip(tasks, results):
        cell_rows.append((n, s, k, er))
        by_n[n].append((k, er))
    summary_rows, means = [], []
    for n in n_values:
        ks = np.array([k for k, _ in by_n[n]], dtype=float)
        er = np.array([e for _, e in by_n[n]])
        se = float(er.std(ddof=1) / math.sqrt(er.size)) if er.size > 1 else float("nan")
        means.append(float(er.mean()))
        summary_rows.append((n, n / math.log(n), float(er.mean()), se, float(ks.mean())))
    x = np.array([n / math.log(n) for n in n_values])
    means_arr = np.array(means)
    checks = {}
    if np.all(means_arr > 0) and len(n_values) >= 3:
        slope, intercept, r2 = analysis.rate_slope(np.column_stack([x, means_arr]))
    elif np.all(means_arr > 0):
        slope = float(np.diff(np.log(means_arr))[0] / np.diff(np.log(x))[0])
        intercept, r2 = float("nan"), 1.0
    else:
        slope = intercept = r2 = float("nan")
    slope_max = cfg.optional_float("experiment", "slope_max")
    ratio_max = cfg.optional_float("experiment", "ratio_max")
    ratio = means[-1] / means[0] if means[0] > 0 else 0.0
    if slope_max is not None:
        checks["slope"] = bool(math.isnan(slope) and means[0] == 0 or slope <= slope_max)
    if ratio_max is not None:
        checks["ratio"] = bool(ratio < ratio_max)
    passed = all(checks.values())
    _write_csv(os.path.join(out, "cells.csv"), ["n", "seed", "k_star", "excess_risk"], cell_rows)
    _write_csv(os.path.join(out, "summary.csv"),
               ["n", "n_over_log_n", "mean_excess_risk", "stderr", "mean_k_star"], summary_rows)
    _write_report(out, cfg, {
        "slope": slope, "intercept": intercept, "r2": r2, "slope_max": slope_max,
        "ratio_last_first": ratio, "ratio_max": ratio_max, "checks": checks,
        "truth_B": truth.B, "truth_l1": truth.l1, "m_per_n": {n: min(d.size, math.floor(n ** lcfg.a_exp * (1 + 1e-12))) for n in n_values},
    }, passed)
    if svg:
        _plot(os.path.join(out, "excess_risk.svg"), {("mean excess risk",): list(zip(x, means))},
              "n / log n", "mean excess risk")
    return passed


def cmd_learn_rate(cfg: Config, out: str, jobs: int = 1, svg: bool = False) -> bool:
    return _run_learning(cfg, out, jobs, svg, "learn-rate")


def cmd_consistency(cfg: Config, out: str, jobs: int = 1, svg: bool = False) -> bool:
    return _run_learning(cfg, out, jobs, svg, "consistency")


# -- oracle-compare -------------------------------------------------------------

ORACLE_TOL = 1e-10


def _oracle_algorithms(lams):
    cfgs = [greedy.GreedyConfig("PGA"), greedy.GreedyConfig("OGA"), greedy.GreedyConfig("SPA"),
            greedy.GreedyConfig("RGA", "one_minus_1_over_k"), greedy.GreedyConfig("RGA", "one_minus_2_over_k")]
    cfgs += [greedy.GreedyConfig("RGA", "lambda", lam) for lam in lams]
    return cfgs


def _oracle_cell(task):
    family, idx, params, n_max, master = task
    rng = _rng(master, "oracle-compare", {"orthonormal": 0, "coherent": 1}[family], idx)
    if family == "orthonormal":
        dim = params["dim"]
        ctx = SpaceContext.euclidean(dim)
        A = Dictionary.canonical(dim).materialize(ctx)
        f = rng.standard_normal(dim)
        h_l1, h_dist, h_norm = float(np.abs(f).sum()), 0.0, float(np.linalg.norm(f))
        cfgs = _oracle_algorithms([])
    else:
        inst = analysis.random_instance(rng, params["dim"], params["m"], params["n_terms"], params["eps"])
        A, f, ctx = inst.atoms, inst.f, inst.atoms.ctx
        h_l1, h_dist, h_norm = inst.h.l1, inst.h_dist, inst.h_norm
        cfgs = _oracle_algorithms(params["lams"])
    sigma = [analysis.best_n_term_bruteforce(f, A, None, N, ctx)[0] for N in range(1, n_max + 1)]
    rows, bound_rows, ok = [], [], True
    for g in cfgs:
        g = greedy.GreedyConfig(g.algorithm, g.alpha_schedule, g.lam, max_steps=n_max)
        tr = greedy.run(f, A, g, ctx)
        lab = _label(g)
        for N in range(1, n_max + 1):
            r = tr.residual_norm_at(N)
            dom = r >= sigma[N - 1] - ORACLE_TOL
            eq = True
            if family == "orthonormal" and g.algorithm in ("OGA", "PGA", "SPA"):
                eq = abs(r - sigma[N - 1]) <= ORACLE_TOL
            ok &= dom and eq
            rows.append((family, idx, lab, N, sigma[N - 1], r, dom and eq))
        kinds = []
        if family == "orthonormal" and g.algorithm in ("OGA", "SPA"):
            kinds = ["oga_l1", "oga_quadratic"]
        elif g.algorithm in ("OGA", "SPA"):
            kinds = ["oga_quadratic"]
        elif g.algorithm == "RGA" and g.alpha_schedule == "one_minus_2_over_k":
            kinds = ["rga_quadratic"]
        elif g.algorithm == "RGA" and g.alpha_schedule == "lambda" and g.lam > 1:
            kinds = ["rga_lambda"]
        elif g.algorithm == "RGA" and h_dist == 0:
            kinds = ["rga_l1"]
        for kind in kinds:
            rep = greedy.residual_bound_check(tr, h_l1, h_dist, kind, h_norm=h_norm, lam=g.lam, n_max=n_max)
            ok &= rep.ok
            for N, lhs, rhs, p in zip(rep.N, rep.lhs, rep.rhs, rep.passed):
                bound_rows.append((family, idx, lab, kind, int(N), lhs, rhs, bool(p)))
    return rows, bound_rows, ok


def _truncated_family(params, master):
    dim, r = params["dim"], params["r_exp"]
    ctx = SpaceContext.euclidean(dim)
    A = Dictionary.canonical(dim).materialize(ctx)
    j = np.arange(1, dim + 1, dtype=np.float64)
    signs = _rng(master, "oracle-compare", 2, 0).choice([-1.0, 1.0], size=dim)
    c = signs * j ** -(r + 0.5)
    f = c.copy()
    # class constant: l1 norm of the m-term surrogate and its tail decay
    tail = np.sqrt(np.concatenate([np.cumsum((c ** 2)[::-1])[::-1][1:], [0.0]]))
    C = max(float(np.abs(c).sum()), float(np.max(j ** r * tail)))
    rows, bound_rows, ok = [], [], True
    for m in params["m_values"]:
        g = greedy.GreedyConfig("OGA", max_steps=params["k_max"], m=m)
        tr = greedy.run(f, A, g, ctx)
        rep = greedy.residual_bound_check(tr, C, kind="truncated", m=m, r_exp=r, n_max=params["k_max"])
        ok &= rep.ok
        for N, lhs, rhs, p in zip(rep.N, rep.lhs, rep.rhs, rep.passed):
            bound_rows.append(("truncated", m, "OGA", "truncated", int(N), lhs, rhs, bool(p)))
            rows.append(("truncated", m, "OGA", int(N), "", lhs, bool(p)))
    return rows, bound_rows, ok, C


def cmd_oracle_compare(cfg: Config, out: str, jobs: int = 1, svg: bool = False) -> bool:
    master = cfg.get_int("experiment", "seed")
    n_max = cfg.get_int("experiment", "n_max")
    cfg.require(1 <= n_max, "experiment", "n_max", "n_max must be positive")
    ortho = {"dim": cfg.get_int("orthonormal", "dim")}
    coh = {"dim": cfg.get_int("coherent", "dim"), "m": cfg.get_int("coherent", "m"),
           "n_terms": cfg.get_int("coherent", "n_terms"), "eps": cfg.get_float("coherent", "eps"),
           "lams": cfg.get_list("coherent", "lams")}
    cfg.require(all(lam > 1 for lam in coh["lams"]), "coherent", "lams", "lambda values must exceed 1")
    for sec, p in (("orthonormal", ortho), ("coherent", coh)):
        m = p.get("m", p["dim"])
        cfg.require(math.comb(m, min(n_max, m)) <= analysis.MAX_SUBSETS, sec, "dim",
                    "instance exceeds the brute-force guard")
    trunc = {"dim": cfg.get_int("truncated", "dim"), "r_exp": cfg.get_float("truncated", "r_exp"),
             "m_values": cfg.get_list("truncated", "m_values", int), "k_max": cfg.get_int("truncated", "k_max")}
    cfg.require(trunc["r_exp"] > 0, "truncated", "r_exp", "r_exp must be positive")
    tasks = [("orthonormal", i, ortho, n_max, master) for i in range(cfg.get_int("orthonormal", "instances"))]
    tasks += [("coherent", i, coh, n_max, master) for i in range(cfg.get_int("coherent", "instances"))]
    results = _map(_oracle_cell, tasks, jobs)
    rows, bound_rows, passed = [], [], True
    fam_ok = {"orthonormal": True, "coherent": True}
    for (family, *_), (r, b, ok) in zip(tasks, results):
        rows += r
        bound_rows += b
        fam_ok[family] &= ok
    tr_rows, tr_bounds, tr_ok, C = _truncated_family(trunc, master)
    rows += tr_rows
    bound_rows += tr_bounds
    fam_ok["truncated"] = tr_ok
    passed = all(fam_ok.values())
    _write_csv(os.path.join(out, "oracle.csv"),
               ["family", "instance", "algorithm", "N", "sigma_N", "residual_norm", "passed"], rows)
    _write_csv(os.path.join(out, "bounds.csv"),
               ["family", "instance", "algorithm", "bound", "N", "lhs", "rhs", "passed"], bound_rows)
    _write_report(out, cfg, {"families": fam_ok, "truncated_class_constant": C}, passed)
    if svg:
        series = {}
        for fam, inst, alg, N, _, r, _ in rows:
            if fam == "truncated" and r > 0:
                series.setdefault((f"m={inst}",), []).append((N, r))
        _plot(os.path.join(out, "truncated.svg"), series, "k", "residual norm")
    return passed


# -- plotting -----------------------------------------------------------------

def _plot(path, series, xlabel, ylabel):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed salt keeps clip-path ids stable between runs
    matplotlib.rcParams["svg.hashsalt"] = "greedyapprox"

    fig, ax = plt.subplots(figsize=(6, 4))
    for key, pts in series.items():
        pts = [(x, y) for x, y in pts if x > 0 and y > 0]
        if not pts:
            continue
        x, y = map(np.asarray, zip(*pts))
        line = ax.loglog(x, y, "o", ms=3, label=" ".join(map(str, key)))[0]
        if len(x) >= 3:
            s, b = np.polyfit(np.log(x), np.log(y), 1)
            ax.loglog(x, np.exp(b) * x ** s, "-", color=line.get_color(), lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- entry point --------------------------------------------------------------

COMMANDS = {
    "approx-rate": cmd_approx_rate,
    "learn-rate": cmd_learn_rate,
    "consistency": cmd_consistency,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="greedyapprox", description="Greedy approximation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR", default="out")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--jobs", type=int, default=1, metavar="N")
        p.add_argument("--svg", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = None
        if args.config:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        cfg = Config(args.command, text, args.config or "<config>")
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.values["experiment"]["seed"] = str(args.seed)
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        try:
            os.makedirs(args.out, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory: {exc}") from None
        passed = COMMANDS[args.command](cfg, args.out, args.jobs, args.svg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: {'PASS' if passed else 'FAIL'} (outputs in {args.out})")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
