"""Ground-truth community benchmark and the core-periphery demo network.

The benchmark is a DECM in which pairs inside the same group have their edge
probability multiplied by ``theta`` (capped at 1) and their conditional mean
weight multiplied by ``theta``. With ``theta = 1`` it is the plain DECM.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .decm import DecmParams
from .graph import WeightedDigraph, as_partition


@dataclass
class NodeLaw:
    """Heavy-tailed node propensities ``x ~ Pareto(shape, min 1)``.

    Sets ``alpha = beta = log x + (log density - log n) / 2`` and
    ``phi = psi = -1 / x``. Expected degree grows with ``density``; the
    default of 1 gives a mean out-degree of about 2.5 at ``n = 100``.
    """

    shape: float = 2.5
    density: float = 1.0

    def draw(self, n: int, rng: np.random.Generator) -> DecmParams:
        x = 1.0 + rng.pareto(self.shape, n)
        a = np.log(x) + 0.5 * (np.log(self.density) - np.log(n))
        return DecmParams(a, a.copy(), -1.0 / x, -1.0 / x)


@dataclass
class BenchmarkParams:
    n: int = 100
    theta: float = 1.0
    alpha1: float = 2.0
    s_min: int | None = None
    s_max: int | None = None
    node_law: NodeLaw = field(default_factory=NodeLaw)
    node_params: DecmParams | None = None

    def __post_init__(self):
        if self.s_min is None:
            self.s_min = max(1, self.n // 5)
        if self.s_max is None:
            self.s_max = max(self.s_min, 3 * self.s_min // 2)
        if self.theta < 1:
            raise ValueError("theta must be >= 1")
        if not 1 <= self.s_min <= self.s_max <= self.n:
            raise ValueError("need 1 <= s_min <= s_max <= n")
        if self.node_params is not None and self.node_params.n != self.n:
            raise ValueError("node parameters do not match n")

    def describe(self) -> dict:
        d = asdict(self)
        d.pop("node_params")
        return d


def draw_group_sizes(alpha1: float, s_min: int, s_max: int, n: int, rng: np.random.Generator):
    """Group sizes from a truncated discrete power law, rescaled to sum to ``n``.

    Returns ``(sizes, raw)``: the raw draws (all in ``[s_min, s_max]``) and the
    sizes after proportional rescaling with largest-remainder rounding.
    """
    if not 1 <= s_min <= s_max:
        raise ValueError("need 1 <= s_min <= s_max")
    if s_min > n:
        raise ValueError("s_min exceeds n")
    support = np.arange(s_min, s_max + 1)
    probs = support.astype(float) ** -alpha1
    probs /= probs.sum()
    raw = []
    while sum(raw) < n:
        raw.append(int(rng.choice(support, p=probs)))
    raw = np.array(raw)
    exact = raw * n / raw.sum()
    sizes = np.floor(exact).astype(int)
    short = n - sizes.sum()
    # ties in the remainder go to the earlier group
    order = np.argsort(-(exact - sizes), kind="stable")
    sizes[order[:short]] += 1
    return sizes, raw


def assign_groups(sizes, rng: np.random.Generator) -> np.ndarray:
    """Random partition with the given group sizes."""
    n = int(np.sum(sizes))
    labels = np.repeat(np.arange(len(sizes)), sizes)
    c = np.empty(n, np.int64)
    c[rng.permutation(n)] = labels
    return c


def planted_weight_matrix(p: DecmParams, theta: float, c, rng: np.random.Generator) -> np.ndarray:
    c = as_partition(c, p.n)
    same = c[:, None] == c[None, :]
    boost = np.where(same, theta, 1.0)
    allowed = ~np.eye(p.n, dtype=bool)
    # consumes the generator exactly like decm.sample_weight_matrix
    present = (rng.random((p.n, p.n)) < np.minimum(p.edge_prob_matrix() * boost, 1.0)) & allowed
    lam = p.rate()
    W = rng.exponential(1.0, (p.n, p.n)) * boost / np.where(lam > 0, lam, 1.0)
    return np.where(present, W, 0.0)


def sample_benchmark(p: BenchmarkParams, c, rng: np.random.Generator) -> WeightedDigraph:
    """One benchmark graph for the planted partition ``c``; self-loops are never drawn."""
    node = p.node_params if p.node_params is not None else p.node_law.draw(p.n, rng)
    return WeightedDigraph.from_dense(planted_weight_matrix(node, p.theta, c, rng))


@dataclass
class BenchmarkDraw:
    graph: WeightedDigraph
    partition: np.ndarray
    node_params: DecmParams
    raw_sizes: np.ndarray


def generate(p: BenchmarkParams, rng: np.random.Generator) -> BenchmarkDraw:
    """Group sizes, partition, node parameters and graph in one seeded draw."""
    sizes, raw = draw_group_sizes(p.alpha1, p.s_min, p.s_max, p.n, rng)
    c = assign_groups(sizes, rng)
    node = p.node_params if p.node_params is not None else p.node_law.draw(p.n, rng)
    W = planted_weight_matrix(node, p.theta, c, rng)
    return BenchmarkDraw(WeightedDigraph.from_dense(W), c, node, raw)


# core-periphery demo

CORE_CLIQUES = 5
CORE_SIZE = 50
PERIPHERY_CLIQUES = 75
PERIPHERY_SIZE = 10
DEMO_MEAN_WEIGHT = 1000.0


def core_periphery_partition() -> np.ndarray:
    sizes = [CORE_SIZE] * CORE_CLIQUES + [PERIPHERY_SIZE] * PERIPHERY_CLIQUES
    return np.repeat(np.arange(len(sizes)), sizes).astype(np.int64)


def generate_core_periphery(rng: np.random.Generator) -> WeightedDigraph:
    """1000 nodes: five 50-cliques then seventy-five 10-cliques, chained by single bridges.

    Every ordered pair inside a clique is an edge; clique ``i`` sends one edge
    from its last node to the first node of clique ``i + 1``. Weights are
    i.i.d. exponential with mean 1000.
    """
    c = core_periphery_partition()
    n = len(c)
    starts = np.flatnonzero(np.r_[True, c[1:] != c[:-1]])
    ends = np.r_[starts[1:], n]
    pairs = []
    for s, e in zip(starts, ends):
        for u in range(s, e):
            pairs.extend((u, v) for v in range(s, e) if v != u)
    pairs.extend((ends[i] - 1, starts[i + 1]) for i in range(len(starts) - 1))
    weights = rng.exponential(DEMO_MEAN_WEIGHT, len(pairs))
    return WeightedDigraph(n, ((u, v, w) for (u, v), w in zip(pairs, weights)))
