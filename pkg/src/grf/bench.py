"""Experiment drivers: relative Frobenius error sweeps and FLOP comparisons."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .estimators import estimate_d1, estimate_kernel
from .flops import FlopCounter
from .graph import Graph, build_u_matrix, generate_erdos_renyi
from .oracle import LaplacianKernelSpec, exact_kernel_matrix
from .solvers import cg_solve, gauss_seidel_solve, jacobi_solve
from .walks import WalkConfig, batch_seeds

log = logging.getLogger(__name__)

FROBENIUS_FIELDS = ("graph", "d", "p_term", "m", "mean", "std")
SPEED_FIELDS = ("n", "method", "flops")


def frobenius_error(exact, approx) -> float:
    """||exact - approx||_F / ||exact||_F."""
    exact = np.asarray(exact, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if exact.shape != approx.shape:
        raise ValueError(f"shape mismatch {exact.shape} vs {approx.shape}")
    norm = np.linalg.norm(exact)
    if norm == 0:
        raise ValueError("exact matrix has zero norm")
    return float(np.linalg.norm(exact - approx) / norm)


@dataclass
class ExperimentRecord:
    graph: str
    d: int
    p_term: float
    m: int
    s: int
    mean: float
    std: float

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("a record needs at least one trial")
        if self.std < 0:
            raise ValueError("std must be nonnegative")


def frobenius_trials(graph: Graph, spec: LaplacianKernelSpec, cfg: WalkConfig, s: int,
                     exact=None, threads: int = 1, **kwargs) -> np.ndarray:
    """Relative errors of s independent GRF estimates (trial seeds derived from cfg)."""
    exact = exact_kernel_matrix(graph, spec) if exact is None else exact
    u = build_u_matrix(graph, spec.sigma2)
    errs = []
    for seed in batch_seeds(cfg.master_seed, s):
        chain = estimate_kernel(graph, spec, cfg.with_seed(int(seed)), threads=threads, u=u, **kwargs)
        errs.append(frobenius_error(exact, chain.materialize()))
    return np.array(errs)


def run_frobenius_experiment(graph: Graph, d: int, sigma2: float, p_terms, ms, s: int = 10,
                             seed: int = 0, graph_id: str = "graph", sampler: str = "uniform",
                             threads: int = 1, symmetric: bool = False,
                             csv_path=None) -> list[ExperimentRecord]:
    """Mean and std of the relative Frobenius error per (p_term, m) cell.

    Every cell uses the same s trial seeds, so neighboring cells share
    common random numbers. A single trial reports std = 0 with a warning.
    ``symmetric`` scores the symmetrized estimator (X Y^T + Y X^T) / 2.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if s == 1:
        log.warning("s=1: reporting std=0 for every cell")
    spec = LaplacianKernelSpec(d, sigma2)
    exact = exact_kernel_matrix(graph, spec)
    records = []
    for p in p_terms:
        for m in ms:
            cfg = WalkConfig(p_term=p, m=m, sampler=sampler, master_seed=seed)
            errs = frobenius_trials(graph, spec, cfg, s, exact=exact, threads=threads,
                                    symmetric=symmetric)
            std = float(errs.std(ddof=1)) if s > 1 else 0.0
            records.append(ExperimentRecord(graph_id, d, p, m, s, float(errs.mean()), std))
    if csv_path is not None:
        write_frobenius_csv(records, csv_path)
    return records


def write_frobenius_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FROBENIUS_FIELDS)
        for r in records:
            row = asdict(r)
            w.writerow([row[k] for k in FROBENIUS_FIELDS])


def brute_force_flops(n: int) -> int:
    """Dense inversion (n^3) plus one dense matvec (n^2)."""
    return n ** 3 + n ** 2


def grf_flops(graph: Graph, sigma2: float, cfg: WalkConfig, threads: int = 1) -> int:
    """Pre-processing plus one kernel matvec for the d = 1 implicit chain.

    The chain [C, C'^T, I + sigma2 L] is applied right to left, so the
    system matrix is never multiplied into the features.
    """
    counter = FlopCounter()
    u = build_u_matrix(graph, sigma2)
    chain = estimate_d1(graph, sigma2, cfg, threads=threads, counter=counter, u=u,
                        materialize_d=False)
    x = np.random.default_rng(cfg.master_seed).standard_normal(graph.n)
    chain.matvec(x, counter)
    return counter.count


def run_speed_comparison(n_list, density: float = 1.0, sigma2: float = 0.2,
                         cfg: WalkConfig | None = None, iters: int = 10, graph_seed: int = 0,
                         threads: int = 1, csv_path=None) -> list[dict]:
    """FLOPs for one solve / kernel matvec per method on ER(n, density) graphs.

    Methods: GRF (d = 1 chain), BF (dense inverse + matvec), Jacobi and
    Gauss-Seidel (``iters`` sweeps), CG (at most n iterations, tol 1e-10).
    """
    cfg = cfg or WalkConfig(p_term=0.1, m=20)
    rows = []
    for n in n_list:
        g = generate_erdos_renyi(n, density, graph_seed)
        u = build_u_matrix(g, sigma2)
        b = np.random.default_rng(graph_seed).standard_normal(n)
        _, jac = jacobi_solve(u, b, iters)
        _, gs = gauss_seidel_solve(u, b, iters)
        _, cg, _ = cg_solve(u, b, max(1, n))
        for method, flops in (("GRF", grf_flops(g, sigma2, cfg, threads)),
                              ("BF", brute_force_flops(n)),
                              ("Jacobi", jac), ("GaussSeidel", gs), ("CG", cg)):
            rows.append({"n": n, "method": method, "flops": int(flops)})
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SPEED_FIELDS)
            w.writeheader()
            w.writerows(rows)
    return rows
