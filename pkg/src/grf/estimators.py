"""GRF estimators of d-regularized Laplacian kernels and of (I - U)^-1.

Every estimator returns a DecompositionChain: an ordered list of factors
whose product is an unbiased estimate of the target N x N matrix. The chain
is used through matrix-vector products and is only materialized by tests
and by the Frobenius benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .compression import JltProjection, sample_anchors
from .flops import FlopCounter, charge
from .graph import Graph, WalkMatrix, build_u_matrix
from .oracle import LaplacianKernelSpec
from .walks import WalkConfig, compute_feature_matrix

# sub-seed tags derived from the master seed
_TAG_LEFT, _TAG_RIGHT, _TAG_ANCHORS, _TAG_JLT = 1, 2, 3, 4
_TAG_LEVEL = 100


def _subseed(master: int, tag: int) -> int:
    return int(_kernels.derive_seeds(np.uint64(master), np.uint64(tag)))


class SystemOperator:
    """Implicit lam * (I - U); equals I + sigma2 * L for Laplacian-derived U."""

    def __init__(self, u: WalkMatrix):
        self.u = u
        self._mat = u.to_sparse()
        self.shape = (u.n, u.n)

    @property
    def flops_per_vector(self) -> int:
        return self.u.nnz + self.u.n

    def __matmul__(self, x):
        if sp.issparse(x):
            return (self.u.scale * (x - self._mat @ x)).tocsr()
        return self.u.scale * (x - self._mat @ x)

    def toarray(self) -> np.ndarray:
        return self.u.scale * (np.eye(self.u.n) - self._mat.toarray())

    @property
    def T(self):
        return self  # symmetric


def _matvec_cost(f) -> int:
    if isinstance(f, SystemOperator):
        return f.flops_per_vector
    if sp.issparse(f):
        return f.nnz
    return f.shape[0] * f.shape[1]


def _dense(f) -> np.ndarray:
    if isinstance(f, SystemOperator) or sp.issparse(f):
        return f.toarray()
    return np.asarray(f)


@dataclass
class DecompositionChain:
    """Factors F1, ..., Fk with F1 @ ... @ Fk estimating an N x N kernel.

    ``symmetric`` marks chains that represent a symmetric matrix in exact
    arithmetic; their materialization is symmetrized to remove rounding.
    """

    factors: list
    symmetric: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a chain needs at least one factor")
        for a, b in zip(self.factors[:-1], self.factors[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(f"non-conformable factors {a.shape} and {b.shape}")
        if self.shape[0] != self.shape[1]:
            raise ValueError(f"chain product must be square, got {self.shape}")

    @property
    def shape(self):
        return (self.factors[0].shape[0], self.factors[-1].shape[1])

    @property
    def n(self) -> int:
        return self.shape[0]

    def matvec(self, x, counter: FlopCounter | None = None) -> np.ndarray:
        return kernel_matvec(self, x, counter)

    def rmatvec(self, x, counter: FlopCounter | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        for f in self.factors:
            charge(counter, _matvec_cost(f))
            x = np.asarray(f.T @ x).ravel()
        return x

    def materialize(self) -> np.ndarray:
        """Dense product; O(N^2) memory, for tests and small-graph benchmarks."""
        out = _dense(self.factors[-1])
        for f in reversed(self.factors[:-1]):
            out = np.asarray(f @ out)
        if self.symmetric:
            out = 0.5 * (out + out.T)
        return out

    def two_factors(self):
        """Return (X, Y) with X @ Y.T equal to the chain product."""
        if len(self.factors) == 2:
            return self.factors[0], self.factors[1].T
        right = self.factors[-1]
        for f in reversed(self.factors[1:-1]):
            right = f @ right
        return self.factors[0], _as_matrix(right).T

    def diagonal(self) -> np.ndarray:
        x, y = self.two_factors()
        if sp.issparse(x) or sp.issparse(y):
            return np.asarray(sp.csr_matrix(x).multiply(sp.csr_matrix(y)).sum(axis=1)).ravel()
        return np.einsum("ik,ik->i", x, y)


def _as_matrix(f):
    if isinstance(f, SystemOperator):
        return f.toarray()
    return f


def kernel_matvec(chain: DecompositionChain, x, counter: FlopCounter | None = None) -> np.ndarray:
    """Apply the chain to x right-to-left, charging each factor's multiplies."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (chain.n,):
        raise ValueError(f"vector of shape {x.shape} does not match chain of size {chain.n}")
    for f in reversed(chain.factors):
        charge(counter, _matvec_cost(f))
        x = np.asarray(f @ x).ravel()
    return x


@dataclass(frozen=True)
class Compression:
    """Optional walk-time anchors then post-hoc JLT; sizes in columns."""

    anchors: int | None = None
    jlt: int | None = None


def feature_pair(u: WalkMatrix, cfg: WalkConfig, compression: Compression | None = None,
                 threads: int = 1, counter: FlopCounter | None = None, scale: float = 1.0):
    """Two independent feature matrices (B, B') whose product is unbiased for (I-U)^-2.

    With anchors, B carries the N/(K m) renormalization and B' is rescaled
    by K/N, so only one factor N/K enters the product. A JLT, when
    requested, is applied to both with the same Gaussian matrix. ``scale``
    multiplies both matrices; all rescaling is folded into the
    renormalization pass.
    """
    compression = compression or Compression()
    anchors = None
    right_scale = scale
    if compression.anchors is not None:
        anchors = sample_anchors(u.n, compression.anchors, _subseed(cfg.master_seed, _TAG_ANCHORS))
        right_scale = scale * anchors.k / u.n
    left = compute_feature_matrix(u, cfg.with_seed(_subseed(cfg.master_seed, _TAG_LEFT)),
                                  threads=threads, anchors=anchors, scale=scale)
    right = compute_feature_matrix(u, cfg.with_seed(_subseed(cfg.master_seed, _TAG_RIGHT)),
                                   threads=threads, anchors=anchors, scale=right_scale)
    b, bp = left.matrix, right.matrix
    # two multiplies per transition (edge weight, inverse probability) plus renormalization
    charge(counter, 2 * (left.steps + right.steps) + b.nnz + bp.nnz)
    if compression.jlt is not None:
        proj = JltProjection.sample(compression.jlt, b.shape[1], _subseed(cfg.master_seed, _TAG_JLT))
        charge(counter, (b.nnz + bp.nnz) * proj.k)
        b, bp = proj.project_rows(b), proj.project_rows(bp)
    return b, bp


def estimate_d2(g: Graph, sigma2: float, cfg: WalkConfig, compression: Compression | None = None,
                threads: int = 1, counter: FlopCounter | None = None, u: WalkMatrix | None = None):
    """[C, C'^T] with rows phi(i)/(sigma2+1): unbiased for (I + sigma2 L)^-2."""
    u = u or build_u_matrix(g, sigma2)
    c, cp = feature_pair(u, cfg, compression, threads, counter, scale=1.0 / u.scale)
    return DecompositionChain([c, cp.T], meta={"d": 2, "sigma2": sigma2})


def estimate_d1(g: Graph, sigma2: float, cfg: WalkConfig, compression: Compression | None = None,
                threads: int = 1, counter: FlopCounter | None = None, u: WalkMatrix | None = None,
                materialize_d: bool = True):
    """[C, D^T] with D = (I + sigma2 L) C': unbiased for (I + sigma2 L)^-1.

    With ``materialize_d=False`` the chain keeps the system matrix as an
    implicit third factor, [C, C'^T, I + sigma2 L], so D is never formed.
    """
    u = u or build_u_matrix(g, sigma2)
    chain2 = estimate_d2(g, sigma2, cfg, compression, threads, counter, u=u)
    c, cpt = chain2.factors
    op = SystemOperator(u)
    if not materialize_d:
        return DecompositionChain([c, cpt, op], meta={"d": 1, "sigma2": sigma2})
    cp = cpt.T
    d = op @ cp
    charge(counter, (u.nnz + u.n) * cp.shape[1] if not sp.issparse(cp)
           else _sparse_product_cost(u, cp))
    return DecompositionChain([c, d.T], meta={"d": 1, "sigma2": sigma2})


def _sparse_product_cost(u: WalkMatrix, b) -> int:
    # multiplies in U @ B for sparse B: sum over stored U entries (v, w) of nnz(B[w]) + scaling
    row_nnz = np.diff(b.tocsr().indptr)
    return int(row_nnz[u.neighbors].sum() + 2 * b.nnz)


def symmetrize(chain: DecompositionChain) -> DecompositionChain:
    """(C D^T + D C^T) / 2 as the chain [[C, D] / 2, [D, C]^T].

    Works for any chain with two factors X, Y^T (then C = X, D = Y); the
    average stays unbiased and is symmetric for every realization.
    """
    c, d = chain.two_factors()
    stack = sp.hstack if (sp.issparse(c) and sp.issparse(d)) else _dense_hstack
    left = stack([c, d]) * 0.5
    right = stack([d, c])
    if sp.issparse(left):
        left, right = left.tocsr(), right.tocsr()
    return DecompositionChain([left, right.T], symmetric=True, meta=dict(chain.meta))


def _dense_hstack(blocks):
    return np.hstack([_dense(b) for b in blocks])


def extend_d_plus_2(chain: DecompositionChain, g: Graph, sigma2: float, cfg: WalkConfig,
                    compression: Compression | None = None, threads: int = 1,
                    counter: FlopCounter | None = None, u: WalkMatrix | None = None):
    """Turn an estimate X Y^T of the d-kernel into two factors for d + 2.

    Fresh C, C' (independent of X, Y) give X (Y^T C) C'^T. With the SVD
    Y^T C = Z S V^T the new factors are X Z S^1/2 and C' V S^1/2.
    """
    x, y = chain.two_factors()
    if x.shape[1] == 0:
        raise ValueError("cannot extend a chain with zero inner dimension")
    fresh = estimate_d2(g, sigma2, cfg, compression, threads, counter, u=u)
    c, cpt = fresh.factors
    x, y, c, cp = _dense(x), _dense(y), _dense(c), _dense(cpt.T)
    s = y.T @ c
    charge(counter, y.shape[0] * y.shape[1] * c.shape[1])
    z, sv, vt = np.linalg.svd(s, full_matrices=False)
    charge(counter, min(s.shape) ** 3)
    root = np.sqrt(sv)
    left = (x @ z) * root
    right = (cp @ vt.T) * root
    charge(counter, x.shape[0] * x.shape[1] * z.shape[1] + cp.shape[0] * cp.shape[1] * vt.shape[0]
           + left.size + right.size)
    meta = dict(chain.meta)
    meta["d"] = meta.get("d", 0) + 2
    return DecompositionChain([left, right.T], meta=meta)


def estimate_kernel(g: Graph, spec: LaplacianKernelSpec, cfg: WalkConfig,
                    compression: Compression | None = None, threads: int = 1,
                    symmetric: bool = False, counter: FlopCounter | None = None,
                    u: WalkMatrix | None = None) -> DecompositionChain:
    """Unbiased chain for (I + sigma2 L)^-d, built from d = 1 or 2 by extensions.

    ``symmetric`` returns (X Y^T + Y X^T) / 2 of the final two factors.
    """
    u = u or build_u_matrix(g, spec.sigma2)
    d = spec.d
    base = 1 if d % 2 else 2
    if base == 1:
        chain = estimate_d1(g, spec.sigma2, cfg, compression, threads, counter, u=u)
    else:
        chain = estimate_d2(g, spec.sigma2, cfg, compression, threads, counter, u=u)
    level = 0
    while chain.meta["d"] < d:
        level += 1
        sub = cfg.with_seed(_subseed(cfg.master_seed, _TAG_LEVEL + level))
        chain = extend_d_plus_2(chain, g, spec.sigma2, sub, compression, threads, counter, u=u)
    return symmetrize(chain) if symmetric else chain


def solve_linear(u: WalkMatrix, b, cfg: WalkConfig, threads: int = 1,
                 counter: FlopCounter | None = None) -> np.ndarray:
    """Unbiased estimate of x solving (I - U) x = b, as lam * (C (D^T b)).

    C = B / lam and D = lam (I - U) C', so lam * C D^T estimates (I - U)^-1.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (u.n,):
        raise ValueError(f"right-hand side of shape {b.shape} does not match n={u.n}")
    lam = u.scale
    c, cp = feature_pair(u, cfg, threads=threads, counter=counter, scale=1.0 / lam)
    d = SystemOperator(u) @ cp
    charge(counter, _sparse_product_cost(u, cp))
    inner = d.T @ b
    charge(counter, d.nnz)
    x = c @ inner
    charge(counter, c.nnz + u.n)
    return lam * np.asarray(x).ravel()
