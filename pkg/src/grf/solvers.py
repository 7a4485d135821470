"""FLOP-counted iterative baselines for (I - U) x = b."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .flops import FlopCounter


def _system(a):
    """Accept a WalkMatrix (meaning I - U) or any square matrix A."""
    if hasattr(a, "to_sparse") and hasattr(a, "scale"):
        return (sp.identity(a.n, format="csr") - a.to_sparse()).tocsr()
    return sp.csr_matrix(a, dtype=np.float64)


def _split(a):
    diag = a.diagonal()
    if (diag == 0).any():
        raise ZeroDivisionError("matrix has a zero on its diagonal")
    off = (a - sp.diags(diag)).tocsr()
    off.eliminate_zeros()
    return diag, off


def jacobi_solve(a, b, iters: int, x0=None):
    """x <- D^-1 (b - R x); charges nnz(R) + N multiplies per sweep."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    a = _system(a)
    b = np.asarray(b, dtype=np.float64)
    diag, off = _split(a)
    inv = 1.0 / diag
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    counter = FlopCounter()
    for _ in range(iters):
        x = inv * (b - off @ x)
        counter.add(off.nnz + len(b))
    return x, counter.count


def gauss_seidel_solve(a, b, iters: int, x0=None):
    """Forward sweeps using updated entries immediately; same charge as Jacobi."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    a = _system(a)
    b = np.asarray(b, dtype=np.float64)
    diag, off = _split(a)
    inv = 1.0 / diag
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    indptr, indices, data = off.indptr, off.indices, off.data
    counter = FlopCounter()
    for _ in range(iters):
        for i in range(len(b)):
            lo, hi = indptr[i], indptr[i + 1]
            x[i] = inv[i] * (b[i] - data[lo:hi] @ x[indices[lo:hi]])
        counter.add(off.nnz + len(b))
    return x, counter.count


def cg_solve(a, b, iters: int, tol: float = 1e-10, x0=None):
    """Conjugate gradient for SPD A, stopping when ||r|| <= tol * ||b||.

    Per iteration: one matvec (nnz(A)) plus two dot products and three
    axpys (5N). Returns (x, flops, iterations).
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    a = _system(a)
    b = np.asarray(b, dtype=np.float64)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    counter = FlopCounter()
    r = b - a @ x
    counter.add(a.nnz)
    p = r.copy()
    rs = r @ r
    counter.add(n)
    bnorm = np.sqrt(b @ b) or 1.0
    counter.add(n)
    done = 0
    for done in range(1, iters + 1):
        if np.sqrt(rs) <= tol * bnorm:
            done -= 1
            break
        ap = a @ p
        alpha = rs / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        new = r @ r
        p = r + (new / rs) * p
        rs = new
        counter.add(a.nnz + 5 * n)
    return x, counter.count, done
