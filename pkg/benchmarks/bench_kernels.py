"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so one process measures both; a full
OGA run is timed by re-importing the package under each backend setting.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from greedyapprox.kernels import available_backends


def bench(label, fn, repeat):
    t = min(timeit.repeat(fn, number=1, repeat=repeat))
    return label, t


def kernel_cases(mod, rng):
    m, dim = 512, 1024
    atoms = np.ascontiguousarray(rng.standard_normal((m, dim)))
    wr = rng.standard_normal(dim)
    live = np.ones(m, dtype=np.uint8)
    q, _ = np.linalg.qr(rng.standard_normal((dim, 32)))
    basis = np.ascontiguousarray(q.T)
    w = np.ones(dim)
    g = rng.standard_normal(dim)
    V = rng.standard_normal((20, 12))
    G = np.ascontiguousarray(V @ V.T)
    b = np.ascontiguousarray(V @ rng.standard_normal(12))
    return {
        "argmax correlation (512 x 1024)": lambda: mod.argmax_abs_correlation(atoms, wr, live),
        "CGS2 against 32 vectors (dim 1024)": lambda: mod.orthogonalize(basis, w, g),
        "subset errors C(20, 4)": lambda: mod.subset_sq_errors(G, b, 10.0, 4, 1e-12),
    }


OGA_SNIPPET = """
import time, numpy as np
from greedyapprox import Dictionary, GreedyConfig, SpaceContext, run
from greedyapprox.kernels import BACKEND
rng = np.random.default_rng(0)
d = Dictionary.explicit(rng.standard_normal((512, 256)))
ctx = SpaceContext.euclidean(256)
A = d.materialize(ctx)
f = rng.standard_normal(256)
best = min((lambda t0: (run(f, A, GreedyConfig('OGA', max_steps=128), ctx), time.perf_counter() - t0)[1])(time.perf_counter()) for _ in range(5))
print(BACKEND, best)
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is available")
    rows = {}
    for name, mod in backends.items():
        for label, fn in kernel_cases(mod, np.random.default_rng(0)).items():
            rows.setdefault(label, {})[name] = bench(label, fn, args.repeat)[1]
    for pure in ("1", "0"):
        env = dict(os.environ, GREEDYAPPROX_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", OGA_SNIPPET], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        rows.setdefault("OGA, 128 steps, m=512, dim=256", {})[out[0]] = float(out[1])
    print(f"{'case':40s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for label, t in rows.items():
        py, cy = t.get("python"), t.get("cython")
        sp = f"{py / cy:8.1f}" if py and cy else "       -"
        print(f"{label:40s} {py * 1e3 if py else float('nan'):10.3f}ms {cy * 1e3 if cy else float('nan'):10.3f}ms {sp}")


if __name__ == "__main__":
    main()
