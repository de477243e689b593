"""Test statistics, community detection and empirical p-values.

Graphs may be passed as :class:`~kcycle.graph.WeightedDigraph` or as dense
weight matrices; null samples are handled as dense matrices throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .graph import as_dense, as_partition


def empirical_p_value(t0: float, samples) -> float:
    """Fraction of null statistics at least as large as ``t0`` (equality counts)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one null sample")
    return float(np.mean(samples >= t0))


def within_community_edges(G, c) -> int:
    W = as_dense(G)
    c = as_partition(c, W.shape[0])
    same = c[:, None] == c[None, :]
    np.fill_diagonal(same, False)
    return int(np.count_nonzero((W > 0) & same))


def modularity(G, c) -> float:
    """Directed weighted modularity ``(1/w) sum_uv [w_uv - s_out_u s_in_v / w] [c_u == c_v]``."""
    W = as_dense(G)
    total = W.sum()
    if total <= 0:
        raise ValueError("modularity is undefined for a graph without weight")
    c = as_partition(c, W.shape[0])
    k = c.max() + 1
    inside = W[c[:, None] == c[None, :]].sum()
    s_out = np.bincount(c, weights=W.sum(1), minlength=k)
    s_in = np.bincount(c, weights=W.sum(0), minlength=k)
    return float(inside / total - s_out @ s_in / total**2)


@dataclass
class DetectOptions:
    """``seed`` permutes the node order used to break ties; ``None`` keeps the input order."""

    seed: int | None = None
    min_gain: float = 1e-12


@njit(cache=True)
def _row_best(E, ao, ai, alive, a):
    best = -np.inf
    arg = -1
    for b in range(E.shape[0]):
        if b == a or not alive[b] or E[a, b] <= 0.0:
            continue
        g = E[a, b] - ao[a] * ai[b] - ao[b] * ai[a]
        if g > best:
            best = g
            arg = b
    return best, arg


@njit(cache=True)
def _greedy(W, min_gain):
    n = W.shape[0]
    total = W.sum()
    E = (W + W.T) / total
    ao = W.sum(axis=1) / total
    ai = W.sum(axis=0) / total
    alive = np.ones(n, np.bool_)
    parent = np.arange(n)
    best = np.empty(n)
    arg = np.empty(n, np.int64)
    for a in range(n):
        best[a], arg[a] = _row_best(E, ao, ai, alive, a)
    while True:
        a = -1
        top = min_gain
        for r in range(n):
            if alive[r] and best[r] > top:
                top = best[r]
                a = r
        if a < 0:
            break
        b = arg[a]
        if b < a:
            a, b = b, a
        # fold b into a
        for c in range(n):
            E[a, c] += E[b, c]
            E[c, a] += E[c, b]
        E[a, a] = 0.0
        ao[a] += ao[b]
        ai[a] += ai[b]
        alive[b] = False
        parent[b] = a
        best[a], arg[a] = _row_best(E, ao, ai, alive, a)
        for c in range(n):
            if not alive[c] or c == a:
                continue
            if arg[c] == a or arg[c] == b:
                best[c], arg[c] = _row_best(E, ao, ai, alive, c)
            elif E[c, a] > 0.0:
                g = E[c, a] - ao[c] * ai[a] - ao[a] * ai[c]
                if g > best[c]:
                    best[c] = g
                    arg[c] = a
    labels = np.empty(n, np.int64)
    for u in range(n):
        r = u
        while parent[r] != r:
            r = parent[r]
        labels[u] = r
    return labels


def detect_communities(G, opts: DetectOptions | None = None) -> np.ndarray:
    """Greedy agglomerative modularity maximisation.

    Starting from singletons, repeatedly merges the pair of communities with
    the largest modularity gain until no merge gains more than ``min_gain``.
    Deterministic for a given ``opts.seed``.
    """
    opts = opts or DetectOptions()
    W = np.ascontiguousarray(as_dense(G), dtype=float)
    n = W.shape[0]
    if n == 0:
        raise ValueError("empty graph")
    if W.sum() <= 0:
        return np.arange(n, dtype=np.int64)
    if opts.seed is None:
        order = np.arange(n)
    else:
        order = np.random.default_rng(opts.seed).permutation(n)
    labels = np.empty(n, np.int64)
    labels[order] = _greedy(np.ascontiguousarray(W[np.ix_(order, order)]), opts.min_gain)
    return as_partition(labels)


def modularity_detected(G, opts: DetectOptions | None = None) -> float:
    """Modularity of the partition found by :func:`detect_communities`."""
    return modularity(G, detect_communities(G, opts))


def adjusted_rand_index(a, b) -> float:
    """Adjusted Rand index between two labelings of the same nodes."""
    a = as_partition(a)
    b = as_partition(b, len(a))
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1)

    def pairs(x):
        return float(np.sum(x * (x - 1) / 2))

    n_pairs = len(a) * (len(a) - 1) / 2
    index = pairs(table)
    rows, cols = pairs(table.sum(1)), pairs(table.sum(0))
    expected = rows * cols / n_pairs if n_pairs else 0.0
    top = 0.5 * (rows + cols)
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))
