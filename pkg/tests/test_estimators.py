import numpy as np
import pytest
import scipy.sparse as sp

from conftest import corpus, path3
from grf.estimators import (Compression, DecompositionChain, SystemOperator, estimate_d1,
                            estimate_d2, estimate_kernel, extend_d_plus_2, kernel_matvec,
                            solve_linear, symmetrize)
from grf.flops import FlopCounter
from grf.graph import WalkMatrix, build_u_matrix, from_edges, generate_erdos_renyi, load_karate
from grf.oracle import LaplacianKernelSpec, exact_kernel_matrix
from grf.walks import WalkConfig


def z_ok(samples, target, n_se=5.0):
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(len(samples))
    diff = np.abs(mean - target)
    return np.all(np.where(se > 0, diff <= n_se * se, diff <= 1e-12))


def mc(g, spec, trials, cfg=WalkConfig(p_term=0.5, m=1), **kw):
    u = build_u_matrix(g, spec.sigma2)
    return np.array([estimate_kernel(g, spec, cfg.with_seed(s), u=u, **kw).materialize()
                     for s in range(trials)])


EMPTY = from_edges(4, [])


def test_d2_empty_graph_exact():
    chain = estimate_d2(EMPTY, 0.2, WalkConfig())
    c, cpt = chain.factors
    np.testing.assert_allclose(c.toarray(), np.eye(4) / 1.2)
    np.testing.assert_allclose(cpt.toarray(), np.eye(4) / 1.2)
    assert chain.materialize()[0, 0] == pytest.approx(0.69444, abs=1e-5)


def test_d2_path_unbiased():
    g = path3()
    spec = LaplacianKernelSpec(2, 0.2)
    assert z_ok(mc(g, spec, 20_000), exact_kernel_matrix(g, spec))


def test_d1_empty_graph_exact_and_zero_matvec():
    chain = estimate_d1(EMPTY, 0.2, WalkConfig())
    np.testing.assert_allclose(chain.materialize(), np.eye(4) / 1.2, atol=1e-15)
    np.testing.assert_array_equal(chain.matvec(np.zeros(4)), np.zeros(4))


def test_d1_karate_unbiased():
    g = load_karate()
    spec = LaplacianKernelSpec(1, 0.2)
    # a few walks per node tame the right skew of single-walk estimates on hub nodes
    assert z_ok(mc(g, spec, 5000, WalkConfig(p_term=0.5, m=4)), exact_kernel_matrix(g, spec))


def test_implicit_d1_chain_matches_materialized():
    g = generate_erdos_renyi(15, 0.3, 2)
    cfg = WalkConfig(m=4, master_seed=3)
    dense = estimate_d1(g, 0.2, cfg).materialize()
    implicit = estimate_d1(g, 0.2, cfg, materialize_d=False)
    assert len(implicit.factors) == 3 and isinstance(implicit.factors[2], SystemOperator)
    np.testing.assert_allclose(implicit.materialize(), dense, atol=1e-13)
    x = np.arange(15.0)
    np.testing.assert_allclose(implicit.matvec(x), dense @ x, atol=1e-12)


def test_system_operator_is_laplacian_system():
    from grf.graph import normalized_laplacian

    g = corpus()["er12w"]
    op = SystemOperator(build_u_matrix(g, 0.3))
    np.testing.assert_allclose(op.toarray(), np.eye(g.n) + 0.3 * normalized_laplacian(g).toarray(), atol=1e-14)
    np.testing.assert_allclose(op.T.toarray(), op.toarray().T)


def test_symmetrized_is_exactly_symmetric():
    g = generate_erdos_renyi(30, 0.2, 4)
    for s in range(5):
        m = symmetrize(estimate_d1(g, 0.2, WalkConfig(m=3, master_seed=s))).materialize()
        assert np.abs(m - m.T).max() <= 1e-15
    np.testing.assert_allclose(symmetrize(estimate_d1(EMPTY, 0.2, WalkConfig())).materialize(),
                               np.eye(4) / 1.2, atol=1e-15)


def test_symmetrized_unbiased():
    g = corpus()["er8"]
    spec = LaplacianKernelSpec(1, 0.2)
    assert z_ok(mc(g, spec, 20_000, symmetric=True), exact_kernel_matrix(g, spec))


def test_extension_empty_graph_exact():
    for d in (3, 4):
        chain = estimate_kernel(EMPTY, LaplacianKernelSpec(d, 0.2), WalkConfig())
        np.testing.assert_allclose(chain.materialize(), np.eye(4) / 1.2 ** d, atol=1e-14)


def test_extension_shapes_and_zero_width():
    g = generate_erdos_renyi(9, 0.4, 1)
    chain = estimate_kernel(g, LaplacianKernelSpec(4, 0.2), WalkConfig(m=2), Compression(anchors=5))
    x, y = chain.two_factors()
    assert x.shape == y.shape == (9, 5)
    bad = DecompositionChain([np.zeros((9, 0)), np.zeros((0, 9))])
    with pytest.raises(ValueError):
        extend_d_plus_2(bad, g, 0.2, WalkConfig())


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_edgeless_estimates_are_exact(d):
    g = corpus()["edgeless3"]
    spec = LaplacianKernelSpec(d, 0.2)
    for s in range(3):
        est = estimate_kernel(g, spec, WalkConfig(master_seed=s)).materialize()
        np.testing.assert_allclose(est, exact_kernel_matrix(g, spec), atol=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_unbiased_each_d(d):
    g = corpus()["er8"]
    spec = LaplacianKernelSpec(d, 0.2)
    assert z_ok(mc(g, spec, 4000), exact_kernel_matrix(g, spec))


@pytest.mark.parametrize("comp", [Compression(anchors=4), Compression(jlt=5), Compression(anchors=5, jlt=3)])
def test_compressed_unbiased(comp):
    g = corpus()["er8"]
    spec = LaplacianKernelSpec(2, 0.2)
    assert z_ok(mc(g, spec, 8000, compression=comp), exact_kernel_matrix(g, spec))


def test_chain_validation():
    with pytest.raises(ValueError):
        DecompositionChain([])
    with pytest.raises(ValueError):
        DecompositionChain([np.ones((3, 2)), np.ones((3, 3))])
    with pytest.raises(ValueError):
        DecompositionChain([np.ones((3, 2)), np.ones((2, 4))])


def test_kernel_matvec_examples():
    eye = DecompositionChain([np.eye(5), np.eye(5)])
    x = np.arange(5.0)
    np.testing.assert_array_equal(kernel_matvec(eye, x), x)
    np.testing.assert_array_equal(kernel_matvec(eye, np.zeros(5)), np.zeros(5))
    with pytest.raises(ValueError):
        kernel_matvec(eye, np.zeros(4))
    rng = np.random.default_rng(0)
    factors = [rng.standard_normal((10, 4)), sp.random(4, 6, density=0.5, random_state=1, format="csr"),
               rng.standard_normal((6, 10))]
    chain = DecompositionChain(factors)
    v = rng.standard_normal(10)
    np.testing.assert_allclose(kernel_matvec(chain, v), chain.materialize() @ v, atol=1e-10)
    np.testing.assert_allclose(chain.rmatvec(v), chain.materialize().T @ v, atol=1e-10)
    counter = FlopCounter()
    kernel_matvec(chain, v, counter)
    assert counter.count == 60 + factors[1].nnz + 40


def test_diagonal_matches_materialized():
    g = generate_erdos_renyi(12, 0.3, 5)
    for d in (1, 2, 3):
        chain = estimate_kernel(g, LaplacianKernelSpec(d, 0.2), WalkConfig(m=3))
        np.testing.assert_allclose(chain.diagonal(), np.diag(chain.materialize()), atol=1e-13)


def test_flop_counts_reproducible():
    g = generate_erdos_renyi(40, 0.2, 1)
    counts = []
    for _ in range(2):
        c = FlopCounter()
        estimate_kernel(g, LaplacianKernelSpec(3, 0.2), WalkConfig(m=5, master_seed=2), counter=c)
        counts.append(c.count)
    assert counts[0] == counts[1] > 0


def test_solve_linear_examples():
    u = WalkMatrix.from_matrix(np.zeros((4, 4)))
    b = np.array([1.0, -2.0, 0.5, 3.0])
    np.testing.assert_array_equal(solve_linear(u, b, WalkConfig()), b)
    u = build_u_matrix(corpus()["er8"], 0.2)
    np.testing.assert_array_equal(solve_linear(u, np.zeros(8), WalkConfig()), np.zeros(8))
    with pytest.raises(ValueError):
        solve_linear(u, np.zeros(7), WalkConfig())


@pytest.mark.parametrize("d", [2, 3])
def test_symmetrized_higher_d_symmetric_and_unbiased(d):
    g = corpus()["er8"]
    spec = LaplacianKernelSpec(d, 0.2)
    one = estimate_kernel(g, spec, WalkConfig(m=3), symmetric=True).materialize()
    assert np.abs(one - one.T).max() <= 1e-15
    assert z_ok(mc(g, spec, 4000, symmetric=True), exact_kernel_matrix(g, spec))
