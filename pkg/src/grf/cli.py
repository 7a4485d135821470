"""Command-line front end: ``grf <command> [options]``.

Every command writes its outputs plus ``<output>.manifest.json`` holding the
fully resolved arguments; ``grf replay <manifest>`` reruns it. Failures are
reported on stderr as one JSON object and a nonzero exit code.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np
import scipy.sparse as sp

from . import bench, graph as graphs
from .clustering import DenseKernel, kernel_kmeans
from .estimators import Compression, estimate_kernel, solve_linear
from .oracle import LaplacianKernelSpec, exact_kernel_matrix, positive_definiteness_check
from .solvers import cg_solve, gauss_seidel_solve, jacobi_solve
from .walks import WalkConfig, compute_feature_matrix, write_feature_matrix

MANIFEST_VERSION = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(kind: str, payload: dict) -> None:
    sys.stderr.write(json.dumps({kind: payload}) + "\n")


# ---------------------------------------------------------------- arguments

def _add_graph_args(p, required=True):
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--graph", help="edge-list file")
    src.add_argument("--er", nargs=2, metavar=("N", "P"), help="Erdos-Renyi graph G(N, P) seeded by --seed")
    src.add_argument("--karate", action="store_true", help="bundled 34-node karate club graph")


def _add_walk_args(p, d=True):
    if d:
        p.add_argument("--d", type=int, default=1, help="kernel power (default 1)")
    p.add_argument("--sigma2", type=float, default=0.2)
    p.add_argument("--p-term", type=float, default=0.1)
    p.add_argument("--m", type=int, default=80, help="walks per node")
    p.add_argument("--sampler", choices=["uniform", "weighted", "reinforced"], default="uniform")
    p.add_argument("--alpha", type=float, default=1.0, help="reinforced sampler exponent")
    p.add_argument("--anchors", type=int, help="number of anchor points K")
    p.add_argument("--jlt", type=int, help="JLT output dimension K")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grf", description="Graph random features for regularized Laplacian kernels.")
    parser.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write an edge list")
    _add_graph_args(p)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("features", help="write the GRF feature matrix")
    _add_graph_args(p)
    _add_walk_args(p, d=False)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("estimate", help="write a kernel decomposition chain")
    _add_graph_args(p)
    _add_walk_args(p)
    p.add_argument("--symmetric", action="store_true", help="symmetrize the chain: (X Y^T + Y X^T) / 2")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = sub.add_parser("solve", help="solve (I - U) x = b")
    _add_graph_args(p)
    _add_walk_args(p, d=False)
    p.add_argument("--rhs", help="file with one value per line (default: all ones)")
    p.add_argument("--method", choices=["grf", "jacobi", "gauss-seidel", "cg", "dense"], default="grf")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("kmeans", help="kernel k-means on a GRF or exact kernel")
    _add_graph_args(p)
    _add_walk_args(p)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--exact", action="store_true", help="use the exact kernel")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("-o", "--output", required=True, help="CSV node,cluster")

    p = sub.add_parser("bench-frobenius", help="relative Frobenius error sweep")
    _add_graph_args(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--sigma2", type=float, default=0.2)
    p.add_argument("--p-terms", type=float, nargs="+", default=[0.1, 0.06, 0.01])
    p.add_argument("--ms", type=int, nargs="+", default=[1, 2, 10, 20, 40, 80])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--symmetric", action="store_true", help="score the symmetrized estimator")
    p.add_argument("--sampler", choices=["uniform", "weighted", "reinforced"], default="uniform")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("bench-speed", help="FLOP comparison against baselines")
    p.add_argument("--n", type=int, nargs="+", default=[800, 1000])
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=0.2)
    p.add_argument("--p-term", type=float, default=0.1)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("validate", help="positive-definiteness and spectral-radius checks")
    _add_graph_args(p)
    p.add_argument("--sigma2", type=float, default=0.2)
    p.add_argument("--d", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("-o", "--output", help="JSON report (default: stdout)")

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    return parser


# ---------------------------------------------------------------- helpers

def _load_graph(args):
    if args.graph:
        with open(args.graph) as fh:
            return graphs.load_edge_list(fh)
    if args.karate:
        return graphs.load_karate()
    n, p = int(args.er[0]), float(args.er[1])
    return graphs.generate_erdos_renyi(n, p, args.seed)


def _walk_config(args) -> WalkConfig:
    return WalkConfig(p_term=args.p_term, m=args.m, sampler=args.sampler, alpha=args.alpha,
                      master_seed=args.seed)


def _compression(args) -> Compression:
    if args.anchors is not None and args.jlt is not None:
        _emit("warning", {"message": "--anchors with --jlt: anchors are applied during the walks, "
                                     "then the JLT is applied to the anchored features"})
    return Compression(anchors=args.anchors, jlt=args.jlt)


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def write_manifest(path, args, argv, outputs, extra=None) -> str:
    resolved = {k: v for k, v in vars(args).items()}
    doc = {"manifest_version": MANIFEST_VERSION, "command": args.command, "argv": list(argv),
           "args": resolved, "outputs": outputs}
    if getattr(args, "graph", None):
        doc["graph_sha256"] = _file_digest(args.graph)
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def _manifest_for(output):
    if os.path.isdir(output):
        return os.path.join(output, "manifest.json")
    return output + ".manifest.json"


def write_factor(path, f) -> None:
    """Nonzero entries as "i j value" triplets under a shape header."""
    coo = sp.coo_matrix(f)
    with open(path, "w") as fh:
        fh.write(f"# shape={coo.shape[0]} {coo.shape[1]}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def read_factor(path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline()
        r, c = (int(x) for x in header.split("=", 1)[1].split())
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((r, c))
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(r, c))


# ---------------------------------------------------------------- commands

def cmd_generate(args):
    g = _load_graph(args)
    with open(args.output, "w") as fh:
        fh.write(graphs.serialize(g))
    return [args.output], {"n": g.n, "edges": g.edge_count}


def cmd_features(args):
    g = _load_graph(args)
    u = graphs.build_u_matrix(g, args.sigma2)
    anchors = None
    if args.anchors is not None:
        from .compression import sample_anchors
        anchors = sample_anchors(g.n, args.anchors, args.seed)
    fm = compute_feature_matrix(u, _walk_config(args), threads=args.threads, anchors=anchors)
    with open(args.output, "w") as fh:
        write_feature_matrix(fm, fh)
    return [args.output], {"steps": fm.steps, "truncated_walks": fm.truncated}


def cmd_estimate(args):
    g = _load_graph(args)
    spec = LaplacianKernelSpec(args.d, args.sigma2)
    chain = estimate_kernel(g, spec, _walk_config(args), _compression(args), threads=args.threads,
                            symmetric=args.symmetric)
    os.makedirs(args.output, exist_ok=True)
    outputs = []
    for k, f in enumerate(chain.factors):
        path = os.path.join(args.output, f"factor_{k}.txt")
        write_factor(path, f)
        outputs.append(path)
    return outputs, {"factor_shapes": [list(f.shape) for f in chain.factors],
                     "symmetric": chain.symmetric}


def cmd_solve(args):
    g = _load_graph(args)
    u = graphs.build_u_matrix(g, args.sigma2)
    b = np.loadtxt(args.rhs, ndmin=1) if args.rhs else np.ones(g.n)
    flops = None
    if args.method == "grf":
        x = solve_linear(u, b, _walk_config(args), threads=args.threads)
    elif args.method == "jacobi":
        x, flops = jacobi_solve(u, b, args.iters)
    elif args.method == "gauss-seidel":
        x, flops = gauss_seidel_solve(u, b, args.iters)
    elif args.method == "cg":
        x, flops, _ = cg_solve(u, b, args.iters)
    else:
        x = np.linalg.solve(np.eye(g.n) - u.to_dense(), b)
    np.savetxt(args.output, x, fmt="%.17g")
    return [args.output], {"flops": flops}


def cmd_kmeans(args):
    g = _load_graph(args)
    spec = LaplacianKernelSpec(args.d, args.sigma2)
    if args.exact:
        kernel = DenseKernel(exact_kernel_matrix(g, spec))
    else:
        kernel = estimate_kernel(g, spec, _walk_config(args), _compression(args), threads=args.threads)
    res = kernel_kmeans(kernel, args.clusters, seed=args.seed, max_iter=args.max_iter)
    with open(args.output, "w") as fh:
        fh.write("node,cluster\n")
        for i, c in enumerate(res.labels):
            fh.write(f"{i},{int(c)}\n")
    return [args.output], {"iterations_run": res.iterations_run, "converged": res.converged}


def cmd_bench_frobenius(args):
    g = _load_graph(args)
    graph_id = args.graph or ("karate" if args.karate else f"ER-{args.er[1]}-{args.er[0]}")
    bench.run_frobenius_experiment(g, args.d, args.sigma2, args.p_terms, args.ms, s=args.trials,
                                   seed=args.seed, graph_id=graph_id, sampler=args.sampler,
                                   threads=args.threads, symmetric=args.symmetric,
                                   csv_path=args.output)
    return [args.output], None


def cmd_bench_speed(args):
    cfg = WalkConfig(p_term=args.p_term, m=args.m, master_seed=args.seed)
    bench.run_speed_comparison(args.n, args.density, args.sigma2, cfg, iters=args.iters,
                               graph_seed=args.seed, threads=args.threads, csv_path=args.output)
    return [args.output], None


def cmd_validate(args):
    g = _load_graph(args)
    u = graphs.build_u_matrix(g, args.sigma2)
    estimate, bound = graphs.spectral_radius_upper_bound(u, seed=args.seed)
    report = {"n": g.n, "sigma2": args.sigma2, "spectral_radius_estimate": estimate,
              "spectral_radius_bound": bound, "walks_converge": bool(bound < 1),
              "kernel_entries_positive": graphs.check_kernel_entries_positive(g, args.sigma2),
              "positive_definite": {str(d): positive_definiteness_check(
                  exact_kernel_matrix(g, LaplacianKernelSpec(d, args.sigma2)), args.tol)
                  for d in args.d}}
    text = json.dumps(report, indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
        return [args.output], None
    print(text)
    return None, None


COMMANDS = {
    "generate": cmd_generate, "features": cmd_features, "estimate": cmd_estimate,
    "solve": cmd_solve, "kmeans": cmd_kmeans, "bench-frobenius": cmd_bench_frobenius,
    "bench-speed": cmd_bench_speed, "validate": cmd_validate,
}


def run(argv) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        with open(args.manifest) as fh:
            return run(json.load(fh)["argv"])
    outputs, extra = COMMANDS[args.command](args)
    if outputs:
        write_manifest(_manifest_for(args.output), args, argv, outputs, extra)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except UsageError as exc:
        _emit("error", {"type": "usage", "message": str(exc)})
        return 2
    except (OSError, ValueError, IndexError, ZeroDivisionError) as exc:
        _emit("error", {"type": type(exc).__name__, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
