"""Exact dense reference computations used to validate the estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graph import Graph, WalkMatrix, normalized_laplacian

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class LaplacianKernelSpec:
    d: int = 1
    sigma2: float = 0.2

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")


def regularized_system(g: Graph, sigma2: float) -> np.ndarray:
    return np.eye(g.n) + sigma2 * normalized_laplacian(g).toarray()


def exact_kernel_matrix(g: Graph, spec: LaplacianKernelSpec, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """(I + sigma2 L)^-d by d successive solves against one LU factorization."""
    if g.n > dense_limit:
        raise ValueError(f"graph has {g.n} nodes, above the dense limit {dense_limit}")
    a = regularized_system(g, spec.sigma2)
    try:
        lu = scipy.linalg.lu_factor(a, check_finite=True)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise np.linalg.LinAlgError("I + sigma2*L is singular") from exc
    k = np.eye(g.n)
    for _ in range(spec.d):
        k = scipy.linalg.lu_solve(lu, k)
    return 0.5 * (k + k.T)


def inverse_power(u: WalkMatrix, power: int = 2) -> np.ndarray:
    """(I - U)^-power, dense."""
    inv = np.linalg.inv(np.eye(u.n) - u.to_dense())
    return np.linalg.matrix_power(inv, power)


def _tail_bound(norm_inf: float, terms: int, weighted: bool) -> float:
    # sum_{k >= terms} c_k r^k with c_k = k + 1 (weighted) or 1
    r = norm_inf
    if r >= 1:
        return float("inf")
    if not weighted:
        return r ** terms / (1 - r)
    return r ** terms * ((terms + 1) / (1 - r) + r / (1 - r) ** 2)


def neumann_partial_sum(u: WalkMatrix, terms: int, weighted: bool = True):
    """Sum_{k < terms} c_k U^k with c_k = k + 1 (weighted) or 1.

    Returns (partial sum, infinity-norm bound on the omitted tail).
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    a = u.to_dense()
    total = np.eye(u.n)
    power = np.eye(u.n)
    for k in range(1, terms):
        power = power @ a
        total += (k + 1 if weighted else 1) * power
    return total, _tail_bound(np.abs(a).sum(axis=1).max(initial=0.0), terms, weighted)


def walk_sum(u: WalkMatrix, i: int, j: int, max_len: int) -> float:
    """Sum over walks i -> j with at most max_len edges of (len + 1) * w(walk).

    Dynamic programming over the distribution of walk endpoints: after k
    steps, row vector e_i U^k holds the total weight of length-k walks.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    a = u.to_sparse()
    at = a.T.tocsr()
    x = np.zeros(u.n)
    x[i] = 1.0
    total = x[j]
    for k in range(1, max_len + 1):
        x = at @ x
        total += (k + 1) * x[j]
    return float(total)


def _series(a: np.ndarray, max_len: int) -> np.ndarray:
    total = np.eye(len(a))
    power = np.eye(len(a))
    for _ in range(max_len):
        power = power @ a
        total += power
    return total


def second_moment_matrix(u: WalkMatrix, i: int, p_term: float, max_len: int) -> np.ndarray:
    """E[phi(i)[x1] * phi(i)[x2]] for a single uniform-sampler walk from i.

    Two deposits of one walk come from prefixes omega_a (shorter or equal)
    and omega_b = omega_a + continuation. Their load product has expectation
    w(omega_a)^2 A(omega_a) * w(continuation), summed over both orderings
    without double counting the equal-prefix case.
    """
    a = u.to_dense()
    deg = np.diff(u.offsets).astype(np.float64)
    # Q(v, w) = u_vw^2 * deg(v) / (1 - p_term): squared weight times A-factor per step
    q = (a ** 2) * (deg[:, None] / (1.0 - p_term))
    gvec = _series(q, max_len)[i]
    r = _series(a, max_len)
    shorter_first = gvec[:, None] * r
    strict_second = gvec[None, :] * (r.T - np.eye(u.n))
    return shorter_first + strict_second


def variance_formula(u: WalkMatrix, i: int, j: int, p_term: float, m: int, max_len: int = 40):
    """Variance of the (i, j) entry of B B'^T under the uniform sampler.

    Returns (variance, Lambda, K(i, j), tail estimate). Lambda is the second
    moment of the single-walk-pair product, built from the per-source
    prefix-pair moment matrices; the variance is (Lambda - K^2) / m^2.
    """
    if i == j:
        raise ValueError("the variance formula covers i != j only")
    if not 0 < p_term < 1:
        raise ValueError("p_term must lie in (0, 1)")
    fi = second_moment_matrix(u, i, p_term, max_len)
    fj = second_moment_matrix(u, j, p_term, max_len)
    lam = float(np.sum(fi * fj))
    k = float(walk_sum(u, i, j, max_len))
    a = u.to_dense()
    deg = np.diff(u.offsets).astype(np.float64)
    q = (a ** 2) * (deg[:, None] / (1.0 - p_term))
    rho = max(np.abs(np.linalg.eigvals(a)).max(initial=0.0),
              np.abs(np.linalg.eigvals(q)).max(initial=0.0))
    tail = float(rho ** (max_len + 1) / (1 - rho)) if rho < 1 else float("inf")
    return (lam - k * k) / m ** 2, lam, k, tail


def positive_definiteness_check(kernel: np.ndarray, tol: float = 1e-10) -> bool:
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {kernel.shape}")
    return bool(np.linalg.eigvalsh(0.5 * (kernel + kernel.T)).min() > -tol)
