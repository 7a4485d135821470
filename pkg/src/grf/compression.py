"""Anchor-point subsampling and Gaussian JL projection of signature vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class AnchorSet:
    nodes: np.ndarray
    seed: int

    @property
    def k(self) -> int:
        return len(self.nodes)


def sample_anchors(n: int, k: int, seed: int) -> AnchorSet:
    """Uniform K-subset of range(n) without repetition, sorted."""
    if not 1 <= k <= n:
        raise ValueError(f"anchor count must satisfy 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    nodes = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
    nodes.setflags(write=False)
    return AnchorSet(nodes, seed)


@dataclass(frozen=True)
class JltProjection:
    """G / sqrt(K) with G a K x N matrix of i.i.d. N(0, 1) entries."""

    matrix: np.ndarray
    seed: int

    @classmethod
    def sample(cls, k: int, n: int, seed: int) -> "JltProjection":
        if k < 1 or n < 1:
            raise ValueError("JLT dimensions must be positive")
        g = np.random.default_rng(seed).standard_normal((k, n))
        g.setflags(write=False)
        return cls(g, seed)

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def project_rows(self, features) -> np.ndarray:
        """Apply the projection to every row of an (R, N) matrix -> (R, K)."""
        if features.shape[1] != self.n:
            raise ValueError(f"feature width {features.shape[1]} != projection width {self.n}")
        scaled = self.matrix.T / np.sqrt(self.k)
        if sp.issparse(features):
            return np.asarray(features @ scaled)
        return features @ scaled


def apply_jlt(phi, g: JltProjection) -> np.ndarray:
    """Project one signature vector; touches only its nonzero coordinates.

    ``phi`` is a SignatureVector (entries keyed by node id), a mapping, or a
    dense vector of length N.
    """
    entries = getattr(phi, "entries", phi)
    if isinstance(entries, dict):
        if entries and max(entries) >= g.n:
            raise ValueError("signature vector has coordinates beyond the projection width")
        idx = np.fromiter(entries.keys(), dtype=np.int64, count=len(entries))
        vals = np.fromiter(entries.values(), dtype=np.float64, count=len(entries))
    else:
        dense = np.asarray(entries, dtype=np.float64)
        if dense.shape != (g.n,):
            raise ValueError(f"vector of shape {dense.shape} does not match projection width {g.n}")
        idx = np.flatnonzero(dense)
        vals = dense[idx]
    return g.matrix[:, idx] @ vals / np.sqrt(g.k)
