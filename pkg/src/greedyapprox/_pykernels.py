"""Pure numpy/Python implementations of the hot kernels.

Same signatures and semantics as the compiled ``_ckernels`` module; used when
the extension is unavailable or ``GREEDYAPPROX_PURE_PYTHON=1`` is set.
"""
from itertools import combinations

import numpy as np


def argmax_abs_correlation(atoms, wr, live):
    """Index and signed value of the largest |<atom_i, r>| over live atoms.

    ``atoms`` is (m, n) C-contiguous, ``wr`` is the weighted residual w*r and
    ``live`` a uint8 mask. Ties go to the lowest index. Returns (-1, 0.0) when
    no atom is live.
    """
    if atoms.shape[0] == 0:
        return -1, 0.0
    # einsum reduces each row on its own, so a row's value does not depend on m
    corr = np.einsum("ij,j->i", atoms, wr)
    score = np.abs(corr)
    score[live == 0] = -1.0
    i = int(np.argmax(score))
    if score[i] < 0.0:
        return -1, 0.0
    return i, float(corr[i])


def orthogonalize(basis, w, g):
    """Classical Gram-Schmidt with one reorthogonalization pass.

    ``basis`` rows are orthonormal in the weighted inner product. Returns the
    component of ``g`` orthogonal to them and the accumulated coefficients.
    """
    u = np.array(g, dtype=np.float64, copy=True)
    k = basis.shape[0]
    coeffs = np.zeros(k)
    if k == 0:
        return u, coeffs
    for _ in range(2):
        c = basis @ (w * u)
        u -= c @ basis
        coeffs += c
    return u, coeffs


def subset_sq_errors(gram, b, fnorm2, size, pivot_tol):
    """Squared projection error of f onto every ``size``-subset of atoms.

    Subsets are visited in ``itertools.combinations`` order. Each Gram block is
    factored by a left-looking Cholesky that drops pivots below
    ``pivot_tol * G_jj``, so degenerate subsets project onto their
    independent part.
    """
    m = gram.shape[0]
    out = []
    L = np.zeros((size, size))
    z = np.zeros(size)
    for subset in combinations(range(m), size):
        kept = []
        energy = 0.0
        for j, sj in enumerate(subset):
            for i in kept:
                si = subset[i]
                s = gram[sj, si]
                for l in kept:
                    if l >= i:
                        break
                    s -= L[j, l] * L[i, l]
                L[j, i] = s / L[i, i]
            d = gram[sj, sj]
            for i in kept:
                d -= L[j, i] * L[j, i]
            if d <= pivot_tol * gram[sj, sj]:
                continue
            L[j, j] = np.sqrt(d)
            s = b[sj]
            for i in kept:
                s -= L[j, i] * z[i]
            z[j] = s / L[j, j]
            energy += z[j] * z[j]
            kept.append(j)
        out.append(max(fnorm2 - energy, 0.0))
    return np.array(out)
