"""Undirected weighted graphs in canonical CSR form, and the walk matrix U."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised for malformed or non-canonical edge lists."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Symmetric weighted adjacency in CSR layout.

    Every undirected edge {i, j} is stored twice (i->j and j->i) with the
    same weight. Neighbor lists are sorted, so two graphs with the same edge
    set have bit-identical arrays.
    """

    n: int
    offsets: np.ndarray
    neighbors: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for arr in (self.offsets, self.neighbors, self.weights):
            arr.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return len(self.neighbors) // 2

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def adjacency(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights, self.neighbors, self.offsets), shape=(self.n, self.n)
        )

    def edges(self) -> Iterable[tuple[int, int, float]]:
        """Yield each undirected edge once as (i, j, w) with i < j."""
        for i in range(self.n):
            lo, hi = self.offsets[i], self.offsets[i + 1]
            for j, w in zip(self.neighbors[lo:hi], self.weights[lo:hi]):
                if i < j:
                    yield i, int(j), float(w)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.neighbors, other.neighbors)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


def from_edges(n: int, edges: Iterable[tuple[int, int, float]]) -> Graph:
    """Build a canonical graph from undirected edges (each listed once)."""
    seen = set()
    rows, cols, vals = [], [], []
    for i, j, w in edges:
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise GraphFormatError(f"self-loop at node {i}")
        if not w > 0:
            raise GraphFormatError(f"non-positive weight {w} on edge ({i}, {j})")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {key}")
        seen.add(key)
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    return _from_coo(n, np.asarray(rows, dtype=np.int64),
                     np.asarray(cols, dtype=np.int64),
                     np.asarray(vals, dtype=np.float64))


def _from_coo(n, rows, cols, vals) -> Graph:
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    np.cumsum(offsets, out=offsets)
    return Graph(n, offsets, cols.astype(np.int64), vals.astype(np.float64))


def _parse_lines(stream: TextIO):
    """Return ([(lineno, tokens)], declared node count or None)."""
    declared_n = None
    rows = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n="):
                try:
                    declared_n = int(body[2:])
                except ValueError:
                    raise GraphFormatError(f"line {lineno}: bad node-count header {line!r}")
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'i j [w]', got {line!r}")
        rows.append((lineno, parts))
    return rows, declared_n


def load_edge_list(stream: TextIO | str, n: int | None = None) -> Graph:
    """Parse a 0-indexed edge list ("i j" or "i j w" per line, '#' comments).

    N is taken from ``n``, else from a ``# n=<N>`` header, else max id + 1.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    edges = []
    rows, declared_n = _parse_lines(stream)
    for lineno, parts in rows:
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise GraphFormatError(f"line {lineno}: cannot parse {' '.join(parts)!r}")
        if i < 0 or j < 0:
            raise GraphFormatError(f"line {lineno}: negative node id")
        if i == j:
            raise GraphFormatError(f"line {lineno}: self-loop at node {i}")
        if w < 0:
            raise GraphFormatError(f"line {lineno}: negative weight {w}")
        edges.append((lineno, i, j, w))
    if n is None:
        n = declared_n
    if n is None:
        n = 1 + max((max(i, j) for _, i, j, _ in edges), default=-1)
    seen = {}
    for lineno, i, j, w in edges:
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphFormatError(
                f"line {lineno}: duplicate edge {key} (first seen on line {seen[key]})"
            )
        seen[key] = lineno
        if w == 0:
            raise GraphFormatError(f"line {lineno}: zero weight on edge {key}")
    return from_edges(n, ((i, j, w) for _, i, j, w in edges))


def load_labeled_edge_list(stream: TextIO | str) -> tuple[Graph, dict[str, int]]:
    """Like load_edge_list, but node labels are arbitrary tokens.

    Labels are mapped to dense ids in order of first appearance; the mapping
    is returned alongside the graph.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    mapping: dict[str, int] = {}
    lines = []
    for lineno, parts in _parse_lines(stream)[0]:
        ids = [mapping.setdefault(tok, len(mapping)) for tok in parts[:2]]
        lines.append(f"{ids[0]} {ids[1]} {parts[2] if len(parts) == 3 else ''}")
    return load_edge_list("\n".join(lines), n=len(mapping)), mapping


def serialize(g: Graph) -> str:
    """Canonical text form: node-count header, then edges sorted i < j."""
    out = [f"# n={g.n}"]
    out += [f"{i} {j} {w:.17g}" for i, j, w in g.edges()]
    return "\n".join(out) + "\n"


def load_karate() -> Graph:
    """Zachary's karate club (34 nodes, 78 unit-weight edges)."""
    text = resources.files("grf").joinpath("data/karate.edges").read_text()
    return load_edge_list(text)


def generate_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p) with unit weights; bit-deterministic for fixed (n, p, seed)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    i, j = iu[keep], ju[keep]
    rows = np.concatenate([i, j]).astype(np.int64)
    cols = np.concatenate([j, i]).astype(np.int64)
    return _from_coo(n, rows, cols, np.ones(len(rows)))


def weighted_degree(g: Graph, v: int) -> float:
    if not 0 <= v < g.n:
        raise IndexError(f"node {v} out of range for n={g.n}")
    return float(g.weights[g.offsets[v]:g.offsets[v + 1]].sum())


def weighted_degrees(g: Graph) -> np.ndarray:
    rows = np.repeat(np.arange(g.n), np.diff(g.offsets))
    return np.bincount(rows, weights=g.weights, minlength=g.n).astype(np.float64)


def _normalized_adjacency(g: Graph) -> sp.csr_matrix:
    deg = weighted_degrees(g)
    rows = np.repeat(np.arange(g.n), np.diff(g.offsets))
    vals = g.weights / np.sqrt(deg[rows] * deg[g.neighbors])
    return sp.csr_matrix((vals, g.neighbors, g.offsets), shape=(g.n, g.n))


def normalized_laplacian(g: Graph) -> sp.csr_matrix:
    """I - D^{-1/2} W D^{-1/2}; isolated vertices keep a bare unit diagonal."""
    return (sp.identity(g.n, format="csr") - _normalized_adjacency(g)).tocsr()


@dataclass(frozen=True, eq=False)
class WalkMatrix:
    """Sparse symmetric nonnegative U with the scale lambda = sigma2 + 1.

    ``lam * (I - U)`` is the matrix whose inverse the walks estimate. For a
    Laplacian-derived U, ``perron`` holds sqrt(deg_W), a positive vector
    certifying rho(U) <= sigma2 / (sigma2 + 1).
    """

    n: int
    offsets: np.ndarray
    neighbors: np.ndarray
    values: np.ndarray
    scale: float = 1.0
    sigma2: float | None = None
    perron: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.offsets, self.neighbors, self.values):
            arr.setflags(write=False)

    @classmethod
    def from_matrix(cls, u, scale: float = 1.0) -> "WalkMatrix":
        """Wrap an arbitrary symmetric matrix (dense or sparse) with zero diagonal."""
        m = sp.csr_matrix(u, dtype=np.float64)
        m.eliminate_zeros()
        m.sort_indices()
        if m.shape[0] != m.shape[1]:
            raise ValueError("U must be square")
        if m.diagonal().any():
            raise ValueError("U must have zero diagonal (self-loops are not walks here)")
        if abs(m - m.T).max() > 1e-12 * max(1.0, abs(m).max()):
            raise ValueError("U must be symmetric")
        return cls(m.shape[0], m.indptr.astype(np.int64), m.indices.astype(np.int64),
                   m.data.copy(), float(scale))

    def to_sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.neighbors, self.offsets),
                             shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    @property
    def nnz(self) -> int:
        return len(self.values)

    def apply_system(self, x):
        """lam * (I - U) @ x, i.e. I + sigma2*L for Laplacian-derived U."""
        return self.scale * (x - self.to_sparse() @ x)


def build_u_matrix(g: Graph, sigma2: float) -> WalkMatrix:
    """U with (sigma2 + 1)(I - U) = I + sigma2 * normalized Laplacian."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    a = _normalized_adjacency(g)
    deg = weighted_degrees(g)
    return WalkMatrix(
        g.n, g.offsets.copy(), g.neighbors.copy(),
        a.data * (sigma2 / (sigma2 + 1.0)),
        scale=sigma2 + 1.0, sigma2=float(sigma2), perron=np.sqrt(deg),
    )


def spectral_radius_upper_bound(u: WalkMatrix, iters: int = 100, seed: int = 0):
    """Return (power-iteration estimate, rigorous upper bound) for rho(U).

    The bound is the smallest Collatz-Wielandt ratio max_i (|U|x)_i / x_i over
    a few positive test vectors: all-ones (plain Gershgorin row sums), the
    power-iteration vector, and sqrt(deg_W) when U came from a graph.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    a = abs(u.to_sparse())
    if u.nnz == 0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    x = rng.random(u.n) + 0.5
    estimate = 0.0
    for _ in range(iters):
        y = a @ x
        norm_y = np.linalg.norm(y)
        estimate = norm_y / np.linalg.norm(x)
        if norm_y == 0:
            break
        x = y / norm_y
    candidates = [np.ones(u.n), np.abs(x) + 1e-12]
    if u.perron is not None:
        candidates.append(np.where(u.perron > 0, u.perron, 1.0))
    bound = min(float(np.max((a @ c) / c)) for c in candidates)
    return float(estimate), bound


def check_kernel_entries_positive(g: Graph, sigma2: float) -> bool:
    """Warn (never raise) when (I + sigma2 L)^-1 has non-positive entries."""
    m = np.eye(g.n) + sigma2 * normalized_laplacian(g).toarray()
    inv = np.linalg.inv(m)
    ok = bool((inv > 0).all())
    if not ok:
        warnings.warn(
            "inverse of I + sigma2*L has non-positive entries; the d-regularized "
            "kernels may not be positive definite for this graph",
            stacklevel=2,
        )
    return ok
