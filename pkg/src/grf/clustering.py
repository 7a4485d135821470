"""Kernel k-means driven only by kernel matvecs, and the pairwise clustering error."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class ClusteringResult:
    labels: np.ndarray
    n_clusters: int
    iterations_run: int
    converged: bool
    objective: list


class DenseKernel:
    """Adapter giving a dense matrix the matvec + diagonal interface."""

    def __init__(self, k):
        self.k = np.asarray(k, dtype=np.float64)
        self.shape = self.k.shape

    def matvec(self, x):
        return self.k @ x

    def diagonal(self):
        return np.diag(self.k).copy()


def _distances(kernel, diag, labels, n_clusters):
    """dist^2(i, c) = K(i,i) - 2/|c| sum_{j in c} K(i,j) + 1/|c|^2 sum_{j,l in c} K(j,l)."""
    n = len(diag)
    dist = np.full((n, n_clusters), np.inf)
    for c in range(n_clusters):
        ind = (labels == c).astype(np.float64)
        size = ind.sum()
        if size == 0:
            continue
        kx = np.asarray(kernel.matvec(ind)).ravel()
        # for asymmetric estimates use the symmetric part of the cross term
        if hasattr(kernel, "rmatvec"):
            kx = 0.5 * (kx + np.asarray(kernel.rmatvec(ind)).ravel())
        dist[:, c] = diag - 2.0 * kx / size + ind @ kx / size ** 2
    return dist


def _point_distances(kernel, diag, j):
    e = np.zeros(len(diag))
    e[j] = 1.0
    col = np.asarray(kernel.matvec(e)).ravel()
    if hasattr(kernel, "rmatvec"):
        col = 0.5 * (col + np.asarray(kernel.rmatvec(e)).ravel())
    return diag - 2.0 * col + diag[j]


def _objective(dist, labels):
    return float(np.maximum(dist[np.arange(len(labels)), labels], 0.0).sum())


def kernel_kmeans(kernel, n_clusters: int, seed: int = 0, max_iter: int = 100,
                  n_init: int = 1) -> ClusteringResult:
    """Lloyd iterations in the kernel feature space.

    ``kernel`` needs ``matvec(x)``, ``diagonal()`` and ``shape``; an optional
    ``rmatvec`` is used to symmetrize randomized, asymmetric estimates.
    Seeding is k-means++ on kernel distances. A cluster that empties is
    refilled with the point farthest from its current centroid. With
    ``n_init > 1`` the run with the lowest final objective is kept; restart
    r is seeded by ``(seed, r)``.
    """
    n = kernel.shape[0]
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    if n_clusters > n:
        raise ValueError(f"n_clusters={n_clusters} exceeds the number of points {n}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    diag = np.asarray(kernel.diagonal(), dtype=np.float64)
    if n_init == 1:
        return _lloyd(kernel, diag, n_clusters, np.random.default_rng(seed), max_iter)
    best = None
    for r in range(n_init):
        res = _lloyd(kernel, diag, n_clusters, np.random.default_rng([seed, r]), max_iter)
        if best is None or res.objective[-1] < best.objective[-1]:
            best = res
    return best


def _lloyd(kernel, diag, n_clusters, rng, max_iter) -> ClusteringResult:
    n = len(diag)

    centers = [int(rng.integers(n))]
    closest = np.maximum(_point_distances(kernel, diag, centers[0]), 0.0)
    to_center = [closest]
    while len(centers) < n_clusters:
        weights = closest.copy()
        weights[centers] = 0.0
        total = weights.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=weights / total))
        else:
            rest = np.setdiff1d(np.arange(n), centers)
            nxt = int(rng.choice(rest))
        centers.append(nxt)
        d = np.maximum(_point_distances(kernel, diag, nxt), 0.0)
        to_center.append(d)
        closest = np.minimum(closest, d)
    labels = np.argmin(np.stack(to_center, axis=1), axis=1)
    labels[centers] = np.arange(n_clusters)

    objective = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        dist = _distances(kernel, diag, labels, n_clusters)
        objective.append(_objective(dist, labels))
        raw_min = dist.min(axis=1)
        if (raw_min < 0).any():
            log.debug("clamped %d negative kernel distances (min %.3g)",
                      int((raw_min < 0).sum()), raw_min.min())
        new = np.argmin(np.maximum(dist, 0.0), axis=1)
        keep_current = np.maximum(dist[np.arange(n), labels], 0.0) <= np.maximum(dist[np.arange(n), new], 0.0)
        new = np.where(keep_current, labels, new)
        new = _repair_empty(new, n_clusters, dist)
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new
    if not converged:
        objective.append(_objective(_distances(kernel, diag, labels, n_clusters), labels))
    return ClusteringResult(labels, n_clusters, it, converged, objective)


def _repair_empty(labels, n_clusters, dist):
    labels = labels.copy()
    for c in range(n_clusters):
        if (labels == c).any():
            continue
        own = np.maximum(dist[np.arange(len(labels)), labels], 0.0)
        sizes = np.bincount(labels, minlength=n_clusters)
        own[sizes[labels] <= 1] = -np.inf  # never empty another cluster
        labels[int(np.argmax(own))] = c
    return labels


def clustering_error(a, b) -> float:
    """Fraction of unordered pairs co-clustered in exactly one labeling."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("labelings have different lengths")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two points")
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    disagree = np.triu(same_a != same_b, k=1).sum()
    return float(disagree / (n * (n - 1) / 2))
