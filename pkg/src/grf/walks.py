"""Signature vectors from terminating random walks (the GRF walk engine)."""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .graph import WalkMatrix

SAMPLERS = {"uniform": _kernels.UNIFORM, "weighted": _kernels.WEIGHTED,
            "reinforced": _kernels.REINFORCED}

# Rows per dense scratch block, scaled down for wide outputs.
_BLOCK_CELLS = 1 << 22


@dataclass(frozen=True)
class WalkConfig:
    """Parameters of the walk process.

    ``sampler`` is one of "uniform", "weighted" (probability proportional to
    u_vw) or "reinforced" (q-GRF, f(n) = (1 + n) ** -alpha over per-node
    edge-traversal counts).
    """

    p_term: float = 0.1
    m: int = 80
    sampler: str = "uniform"
    alpha: float = 1.0
    master_seed: int = 0
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not 0.0 < self.p_term <= 1.0:
            raise ValueError(f"p_term must lie in (0, 1], got {self.p_term}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}; expected one of {sorted(SAMPLERS)}")
        if self.sampler == "reinforced" and not self.alpha > 0:
            raise ValueError("reinforced sampler needs alpha > 0 (f must be decreasing)")

    def with_seed(self, seed: int) -> "WalkConfig":
        return replace(self, master_seed=int(seed))


class History:
    """Visit counts N(v, w) over unordered edges."""

    def __init__(self):
        self.edge_counts: dict[tuple[int, int], int] = {}

    def count(self, v: int, w: int) -> int:
        return self.edge_counts.get((min(v, w), max(v, w)), 0)

    def add(self, v: int, w: int) -> None:
        key = (min(v, w), max(v, w))
        self.edge_counts[key] = self.edge_counts.get(key, 0) + 1

    def reset(self) -> None:
        self.edge_counts.clear()


@dataclass
class SignatureVector:
    owner: int
    entries: dict[int, float]
    walks_used: int
    steps: int = 0
    truncated: int = 0

    def to_dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for k, v in self.entries.items():
            out[k] = v
        return out


@dataclass
class FeatureMatrix:
    """Row-sparse stack of signature vectors.

    ``columns`` names the node behind each column (all nodes, or the anchor
    set when walks deposit only at anchors).
    """

    matrix: sp.csr_matrix
    config: WalkConfig
    columns: np.ndarray
    steps: int = 0
    truncated: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class _WalkArrays:
    offsets: np.ndarray
    neighbors: np.ndarray
    values: np.ndarray
    cumw: np.ndarray
    reverse: np.ndarray


def _walk_arrays(u: WalkMatrix) -> _WalkArrays:
    cached = u.__dict__.get("_walk_arrays")
    if cached is None:
        cached = _build_walk_arrays(u)
        object.__setattr__(u, "_walk_arrays", cached)
    return cached


def _build_walk_arrays(u: WalkMatrix) -> _WalkArrays:
    rows = np.repeat(np.arange(u.n), np.diff(u.offsets))
    cumw = np.cumsum(u.values)
    # row-local cumulative weights
    starts = np.repeat(u.offsets[:-1], np.diff(u.offsets))
    base = np.concatenate([[0.0], cumw])[starts]
    cumw = cumw - base
    order = np.lexsort((rows, u.neighbors))
    reverse = np.empty(u.nnz, dtype=np.int64)
    reverse[order] = np.arange(u.nnz)
    return _WalkArrays(u.offsets, u.neighbors, u.values, cumw, reverse)


def sample_neighbor(v: int, u: WalkMatrix, h: History | None, strategy: str,
                    rng: np.random.Generator, alpha: float = 1.0) -> tuple[int, float]:
    """Draw a neighbor of v; return it with the probability it had."""
    probs = neighbor_probabilities(v, u, h, strategy, alpha)
    k = rng.choice(len(probs), p=probs)
    return int(u.neighbors[u.offsets[v] + k]), float(probs[k])


def neighbor_probabilities(v: int, u: WalkMatrix, h: History | None, strategy: str,
                           alpha: float = 1.0) -> np.ndarray:
    lo, hi = u.offsets[v], u.offsets[v + 1]
    if hi == lo:
        raise ValueError(f"node {v} has no neighbors")
    arrays = _walk_arrays(u)
    counts = np.zeros(u.nnz, dtype=np.int64)
    if h is not None:
        for e in range(lo, hi):
            counts[e] = h.count(v, int(u.neighbors[e]))
    stamp = np.zeros(u.nnz, dtype=np.int64)
    return _kernels.neighbor_probabilities(
        arrays.offsets, arrays.values, arrays.cumw, counts, stamp, 0, v,
        SAMPLERS[strategy], float(alpha))


def _row_seeds(master_seed, nodes) -> np.ndarray:
    return _kernels.derive_seeds(np.uint64(master_seed), np.asarray(nodes, dtype=np.uint64))


def _run_rows(arrays, sources, seeds, cfg: WalkConfig, col_map, row_scale, ncols, threads):
    out = np.zeros((len(sources), ncols))
    steps = np.zeros(len(sources), dtype=np.int64)
    trunc = np.zeros(len(sources), dtype=np.int64)

    def work(lo, hi):
        s, t = _kernels.walk_rows(
            arrays.offsets, arrays.neighbors, arrays.values, arrays.cumw, arrays.reverse,
            sources[lo:hi], seeds[lo:hi], float(cfg.p_term), int(cfg.m),
            SAMPLERS[cfg.sampler], float(cfg.alpha), int(cfg.max_steps),
            col_map, float(row_scale), out[lo:hi])
        steps[lo:hi] = s
        trunc[lo:hi] = t

    bounds = np.linspace(0, len(sources), max(1, threads) + 1).astype(int)
    if threads <= 1:
        work(0, len(sources))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            for f in futures:
                f.result()
    return out, steps, trunc


def _column_map(n, anchors):
    if anchors is None:
        return np.arange(n, dtype=np.int64), np.arange(n, dtype=np.int64), 1.0
    nodes = np.asarray(anchors.nodes, dtype=np.int64)
    if len(nodes) == 0:
        raise ValueError("anchor set is empty")
    col_map = np.full(n, -1, dtype=np.int64)
    col_map[nodes] = np.arange(len(nodes))
    return col_map, nodes, n / len(nodes)


def compute_signature(u: WalkMatrix, i: int, cfg: WalkConfig) -> SignatureVector:
    """phi(i): m walks from i, loads deposited at every visited node, / m.

    The visit history used by the reinforced sampler is private to this call.
    """
    return _signature(u, i, cfg, None)


def compute_signature_anchored(u: WalkMatrix, i: int, cfg: WalkConfig, anchors) -> SignatureVector:
    """phi(i) recorded only at anchor nodes, renormalized by N / (K m)."""
    return _signature(u, i, cfg, anchors)


def _signature(u, i, cfg, anchors):
    if not 0 <= i < u.n:
        raise IndexError(f"node {i} out of range for n={u.n}")
    col_map, cols, factor = _column_map(u.n, anchors)
    out, steps, trunc = _run_rows(
        _walk_arrays(u), np.array([i], dtype=np.int64), _row_seeds(cfg.master_seed, [i]),
        cfg, col_map, factor / cfg.m, len(cols), 1)
    nz = np.flatnonzero(out[0])
    return SignatureVector(i, {int(cols[k]): float(out[0, k]) for k in nz}, cfg.m,
                           int(steps[0]), int(trunc[0]))


def compute_feature_matrix(u: WalkMatrix, cfg: WalkConfig, threads: int = 1,
                           anchors=None, nodes=None, scale: float = 1.0) -> FeatureMatrix:
    """Stack phi(i) for every node (or for the shard ``nodes``) into a CSR matrix.

    Row i depends only on (master_seed, i), so the result is bit-identical
    for any thread count and for any partition of the nodes into shards.
    ``scale`` is folded into the final 1/m renormalization.
    """
    col_map, cols, factor = _column_map(u.n, anchors)
    arrays = _walk_arrays(u)
    sources = np.arange(u.n, dtype=np.int64) if nodes is None else np.asarray(nodes, dtype=np.int64)
    seeds = _row_seeds(cfg.master_seed, sources)
    block = max(1, _BLOCK_CELLS // max(1, len(cols)))
    pieces, steps, trunc = [], 0, 0
    for lo in range(0, len(sources), block):
        dense, s, t = _run_rows(arrays, sources[lo:lo + block], seeds[lo:lo + block],
                                cfg, col_map, scale * factor / cfg.m, len(cols), threads)
        pieces.append(sp.csr_matrix(dense))
        steps += int(s.sum())
        trunc += int(t.sum())
    if len(pieces) == 1:
        mat = pieces[0]
    elif pieces:
        mat = sp.vstack(pieces, format="csr")
    else:
        mat = sp.csr_matrix((0, len(cols)))
    if nodes is not None:
        # scatter shard rows into their node positions
        full = sp.csr_matrix((u.n, len(cols)))
        sel = sp.csr_matrix((np.ones(len(sources)), (sources, np.arange(len(sources)))),
                            shape=(u.n, len(sources)))
        mat = (full + sel @ mat).tocsr()
        mat.sort_indices()
    return FeatureMatrix(mat, cfg, cols, steps, trunc)


def sample_feature_batch(u: WalkMatrix, cfg: WalkConfig, n_samples: int,
                         anchors=None, threads: int = 1, scale: float = 1.0) -> np.ndarray:
    """Dense (n_samples, N, ncols) stack of independent feature matrices.

    Sample t equals ``compute_feature_matrix`` run with master seed
    ``batch_seeds(cfg.master_seed, n_samples)[t]``. Meant for Monte Carlo
    checks on small graphs.
    """
    col_map, cols, factor = _column_map(u.n, anchors)
    masters = batch_seeds(cfg.master_seed, n_samples)
    nodes = np.arange(u.n, dtype=np.uint64)
    seeds = _kernels.derive_seeds(masters[:, None], nodes[None, :]).ravel()
    sources = np.tile(np.arange(u.n, dtype=np.int64), n_samples)
    out, _, _ = _run_rows(_walk_arrays(u), sources, seeds, cfg, col_map,
                          scale * factor / cfg.m, len(cols), threads)
    return out.reshape(n_samples, u.n, len(cols))


def batch_seeds(master_seed: int, n_samples: int) -> np.ndarray:
    return _kernels.derive_seeds(np.uint64(master_seed), np.arange(n_samples, dtype=np.uint64))


def write_feature_matrix(fm: FeatureMatrix, stream) -> None:
    """Row-sparse triplets "i j value" under a key=value header."""
    c = fm.config
    stream.write(f"# N={fm.shape[0]} cols={fm.shape[1]} m={c.m} p_term={c.p_term!r} "
                 f"sampler={c.sampler} alpha={c.alpha!r} seed={c.master_seed}\n")
    stream.write("# columns " + " ".join(str(int(x)) for x in fm.columns) + "\n")
    coo = fm.matrix.tocoo()
    for i, j, v in zip(coo.row, coo.col, coo.data):
        stream.write(f"{i} {j} {v:.17g}\n")


def read_feature_matrix(stream) -> FeatureMatrix:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = dict(kv.split("=", 1) for kv in stream.readline()[1:].split())
    columns = np.array(stream.readline().split()[2:], dtype=np.int64)
    rows, cols, vals = [], [], []
    for line in stream:
        i, j, v = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(float(v))
    shape = (int(header["N"]), int(header["cols"]))
    cfg = WalkConfig(p_term=float(header["p_term"]), m=int(header["m"]),
                     sampler=header["sampler"], alpha=float(header["alpha"]),
                     master_seed=int(header["seed"]))
    mat = sp.csr_matrix((vals, (rows, cols)), shape=shape)
    mat.sort_indices()
    return FeatureMatrix(mat, cfg, columns)
