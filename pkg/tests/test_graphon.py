import math

import numpy as np
import pytest
from scipy import optimize

from netmetrics.graph import Graph, density
from netmetrics.graphon import (
    GraphonConfigError, GraphonSpec, beta_model_loglik, erdos_renyi, load_grid, sample_adjacency, sample_graph,
    sample_threshold,
)


def test_constant_one_is_complete():
    g, _ = sample_graph(GraphonSpec.constant(1.0), 12, seed=1)
    assert g.n_edges == math.comb(12, 2)


def test_constant_zero_is_empty():
    g, _ = sample_graph(GraphonSpec.constant(0.0), 12, seed=1)
    assert g.n_edges == 0


def test_beta_model_zero_latents_half():
    spec = GraphonSpec.beta_two_point(0.0, 0.0)
    assert np.all(spec.edge_prob(np.zeros(5), np.zeros(5)) == 0.5)


def test_threshold_extremes():
    assert sample_threshold(15, 0.0, seed=2).n_edges == math.comb(15, 2)
    assert sample_threshold(15, 2.0, seed=2).n_edges == 0


def test_threshold_half_density():
    assert density(sample_threshold(2000, 1.0, seed=5)) == pytest.approx(0.5, abs=0.03)


def test_invalid_probability_rejected():
    with pytest.raises(GraphonConfigError):
        GraphonSpec.constant(1.2)
    with pytest.raises(GraphonConfigError):
        GraphonSpec.grid([[0.5, 0.9], [0.9, 0.5]], rho_n=2.0)
    with pytest.raises(GraphonConfigError):
        GraphonSpec.threshold(2.5)


def test_loglik_zero_latents():
    g = Graph.from_edges(6, [(0, 1), (2, 3), (1, 5)])
    assert beta_model_loglik(g, np.zeros(6)) == pytest.approx(-math.comb(6, 2) * math.log(2), rel=1e-14)


def test_loglik_single_dyad():
    g = Graph.from_edges(2, [(0, 1)])
    logit = math.log(0.9 / 0.1)
    assert beta_model_loglik(g, [logit / 2, logit / 2]) == pytest.approx(math.log(0.9), rel=1e-12)


def test_loglik_matches_product():
    adj, u = sample_adjacency(GraphonSpec.beta(0.0, 1.0), 9, seed=4)
    prod = 1.0
    for i in range(9):
        for j in range(i + 1, 9):
            p = 1 / (1 + math.exp(-(u[i] + u[j])))
            prod *= p if adj[i, j] else 1 - p
    assert beta_model_loglik(adj, u) == pytest.approx(math.log(prod), rel=1e-12)


def test_constant_density_within_binomial_error():
    rho, n = 0.3, 40
    dens = np.array([density(Graph.from_adjacency(erdos_renyi(n, rho, seed=s))) for s in range(500)])
    pairs = math.comb(n, 2) * len(dens)
    assert abs(dens.mean() - rho) <= 4 * math.sqrt(rho * (1 - rho) / pairs)


def test_common_constant_recovers_logit_density():
    spec = GraphonSpec.beta_two_point(-0.4, -0.4)
    adj, _ = sample_adjacency(spec, 300, seed=8)
    d = density(Graph.from_adjacency(adj))
    res = optimize.minimize_scalar(lambda c: -beta_model_loglik(adj, np.full(300, c)), bounds=(-5, 5),
                                   method="bounded", options={"xatol": 1e-10})
    assert 2 * res.x == pytest.approx(math.log(d / (1 - d)), abs=1e-6)
    assert 2 * res.x == pytest.approx(-0.8, abs=0.05)


def test_sparse_grid_average_degree(tmp_path):
    f = tmp_path / "w.txt"
    f.write_text("2 0.1\n1.0 3.0\n3.0 1.0\n")
    spec = load_grid(f)
    n = 200
    avg = np.mean([sample_adjacency(spec, n, seed=s)[0].sum() / n for s in range(100)])
    assert spec.w_integral() == pytest.approx(2.0)
    assert avg == pytest.approx(spec.expected_average_degree(n), rel=0.03)


def test_grid_symmetrized_at_load(tmp_path):
    f = tmp_path / "w.txt"
    f.write_text("2 1\n0.2 0.4\n0.6 0.8\n")
    w = load_grid(f).w
    assert np.allclose(w, w.T)


def test_grid_file_errors(tmp_path):
    f = tmp_path / "w.txt"
    f.write_text("3 1\n0.2 0.4\n")
    with pytest.raises(GraphonConfigError):
        load_grid(f)


def test_seed_reproducibility():
    a, ua = sample_adjacency(GraphonSpec.beta(0, 1), 50, seed=11)
    b, ub = sample_adjacency(GraphonSpec.beta(0, 1), 50, seed=11)
    c, _ = sample_adjacency(GraphonSpec.beta(0, 1), 50, seed=12)
    assert np.array_equal(a, b) and np.array_equal(ua, ub)
    assert not np.array_equal(a, c)


def test_samples_symmetric_no_loops():
    adj, _ = sample_adjacency(GraphonSpec.constant(0.5), 30, seed=0)
    assert np.array_equal(adj, adj.T)
    assert not adj.diagonal().any()
