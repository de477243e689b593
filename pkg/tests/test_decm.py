import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kcycle.benchmark import BenchmarkParams, generate
from kcycle.decm import (
    BoundaryDegreeError,
    ConvergenceError,
    DecmParams,
    FitOptions,
    edge_prob,
    fit_mle,
    log_density_unnorm,
    sample_weight_matrix,
)
from kcycle.graph import WeightedDigraph, degrees


def params(a, b, f, s):
    return DecmParams(np.array(a, float), np.array(b, float), np.array(f, float), np.array(s, float))


def oracle_expectations(p, allowed):
    """Expected degrees and strengths by direct evaluation of the edge law, pair by pair."""
    n = p.n
    out = np.zeros((4, n))
    for u in range(n):
        for v in range(n):
            if not allowed[u, v]:
                continue
            lam = -p.phi[u] - p.psi[v]
            e = math.exp(p.alpha[u] + p.beta[v])
            q = e / (e + lam)
            out[0, u] += q
            out[1, v] += q
            out[2, u] += q / lam
            out[3, v] += q / lam
    return out


def max_oracle_residual(p, G):
    e = oracle_expectations(p, G.allowed_mask())
    d = degrees(G)
    obs = np.vstack([d.out_deg, d.in_deg, G.out_strength, G.in_strength])
    return float(np.abs(e - obs).max())


def test_edge_prob_examples():
    assert edge_prob(params([0, 0], [0, 0], [-1, -1], [-1, -1]), 0, 1) == pytest.approx(1 / 3)
    assert edge_prob(params([0, 0], [0, 0], [-0.5, -0.5], [-0.5, -0.5]), 0, 1) == pytest.approx(0.5)
    assert edge_prob(params([800, 0], [800, 0], [-1, -1], [-1, -1]), 0, 1) == 1.0


@given(
    st.floats(-15, 15), st.floats(-15, 15), st.floats(-20, -1e-3), st.floats(-20, -1e-3)
)
def test_edge_prob_strictly_inside(a, b, f, s):
    q = edge_prob(params([a], [b], [f], [s]), 0, 0)
    assert 0 < q < 1


def test_params_validation():
    with pytest.raises(ValueError):
        params([0, 0], [0, 0], [1.5, -1], [-1, -1])  # rate of (0, 1) is -0.5
    with pytest.raises(ValueError):
        params([0, 1], [0], [-1], [-1])
    with pytest.raises(ValueError):
        params([np.inf], [0], [-1], [-1])


def test_nonpositive_self_rate_tolerated(rng):
    # rate of (0, 0) is -0.1; both distinct pairs stay positive
    p = params([0, 0], [0, 0], [0.5, -2.0], [-0.4, -1.0])
    assert p.rate()[0, 0] < 0 and p.edge_prob_matrix()[0, 0] == 0
    assert edge_prob(p, 0, 0) == 0.0
    W = sample_weight_matrix(p, rng)
    assert W[0, 0] == 0
    with pytest.raises(ValueError):
        sample_weight_matrix(p, rng, allowed=np.ones((2, 2), bool))


def test_log_density_unnorm():
    p = params([0.3, -0.2], [1.1, 0.4], [-1.0, -2.0], [-0.5, -0.7])
    assert log_density_unnorm(p, WeightedDigraph(2)) == 0.0
    w = 2.5
    G = WeightedDigraph(2, [(0, 1, w)])
    assert log_density_unnorm(p, G) == pytest.approx(0.3 + 0.4 + (-1.0) * w + (-0.7) * w)


def test_log_density_depends_only_on_sufficient_statistics():
    p = params([0.1, 0.2, 0.3, 0.4], [0.5, -0.6, 0.7, 0.8], [-1, -2, -3, -4], [-0.4, -0.3, -0.2, -0.1])
    G1 = WeightedDigraph(4, [(0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0)])
    G2 = WeightedDigraph(4, [(0, 2, 1.5), (0, 3, 0.5), (1, 2, 0.5), (1, 3, 1.5)])
    assert degrees(G1) == degrees(G2)
    np.testing.assert_allclose(G1.out_strength, G2.out_strength)
    np.testing.assert_allclose(G1.in_strength, G2.in_strength)
    assert G1 != G2
    assert log_density_unnorm(p, G1) == pytest.approx(log_density_unnorm(p, G2))


def test_sampling_laws(rng):
    """Edge frequency, conditional mean and memorylessness over 1e5 independent draws."""
    p = params([0.2, -0.5, 0.0], [0.1, 0.3, -1.0], [-0.6, -1.2, -0.9], [-0.4, -0.8, -0.3])
    N = 100_000
    W = np.stack([sample_weight_matrix(p, rng) for _ in range(N)])
    P = p.edge_prob_matrix()
    lam = p.rate()
    for u in range(3):
        for v in range(3):
            x = W[:, u, v]
            if u == v:
                assert not x.any()
                continue
            freq = np.mean(x > 0)
            se = math.sqrt(P[u, v] * (1 - P[u, v]) / N)
            assert abs(freq - P[u, v]) < 3 * se
            pos = x[x > 0]
            assert abs(pos.mean() - 1 / lam[u, v]) < 3 * (1 / lam[u, v]) / math.sqrt(len(pos))
    # memoryless reinforcement: P(w >= x + 1 | w >= x) = exp(phi_u + psi_v)
    x = W[:, 0, 1]
    for t in (0.5, 1.0):
        above = x[x >= t]
        r = np.mean(above >= t + 1)
        target = math.exp(p.phi[0] + p.psi[1])
        assert abs(r - target) < 3 * math.sqrt(target * (1 - target) / len(above))


def test_fit_two_nodes():
    # with self-loops forbidden both degrees would sit at their maximum of 1,
    # so the symmetric example is fitted with no forbidden pairs
    G = WeightedDigraph(2, [(0, 1, 1.0), (1, 0, 1.0)], forbidden=())
    p = fit_mle(G)
    assert max_oracle_residual(p, G) <= 1e-6


def test_fit_two_nodes_without_loops_is_boundary():
    G = WeightedDigraph(2, [(0, 1, 1.0), (1, 0, 1.0)])
    with pytest.raises(BoundaryDegreeError):
        fit_mle(G)


def test_full_out_degree_is_boundary():
    G = WeightedDigraph(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 0, 2.0), (2, 3, 1.0), (3, 1, 1.0)])
    with pytest.raises(BoundaryDegreeError) as e:
        fit_mle(G)
    assert e.value.node == 0 and e.value.side == "out"


def test_zero_degree_needs_drop_empty(rng):
    draw = generate(BenchmarkParams(n=30), rng)
    G = draw.graph
    assert (degrees(G).out_deg == 0).any()
    with pytest.raises(BoundaryDegreeError):
        fit_mle(G)
    p = fit_mle(G, FitOptions(drop_empty=True))
    assert max_oracle_residual(p, G) <= 1e-5


def test_non_convergence_reported():
    G = WeightedDigraph(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0), (0, 2, 0.5), (1, 0, 4.0), (2, 1, 1.0)], forbidden=())
    with pytest.raises(ConvergenceError):
        fit_mle(G, FitOptions(max_iter=1))


def test_fit_benchmark_n20():
    G = None
    for seed in range(200):
        draw = generate(BenchmarkParams(n=20, node_law=_dense_law()), np.random.default_rng(seed))
        d = degrees(draw.graph)
        if d.out_deg.min() >= 1 and d.in_deg.min() >= 1 and d.out_deg.max() <= 18 and d.in_deg.max() <= 18:
            G = draw.graph
            break
    assert G is not None
    p = fit_mle(G)
    assert max_oracle_residual(p, G) <= 1e-6


def _dense_law():
    from kcycle.benchmark import NodeLaw

    return NodeLaw(density=6.0)
