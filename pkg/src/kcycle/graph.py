"""Weighted directed graphs with degree and strength bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np


@dataclass(frozen=True)
class DegreeVector:
    out_deg: np.ndarray
    in_deg: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, DegreeVector)
            and np.array_equal(self.out_deg, other.out_deg)
            and np.array_equal(self.in_deg, other.in_deg)
        )

    @property
    def n(self) -> int:
        return len(self.out_deg)


@dataclass(frozen=True)
class StrengthVector:
    out_str: np.ndarray
    in_str: np.ndarray

    @property
    def n(self) -> int:
        return len(self.out_str)


def self_loops(n: int) -> frozenset:
    return frozenset((i, i) for i in range(n))


class WeightedDigraph:
    """Sparse weighted digraph on nodes ``0..n-1``.

    Weights are strictly positive; an absent edge has weight zero. Pairs in
    ``forbidden`` can never carry an edge. By default self-loops are
    forbidden.

    Out- and in-strengths are maintained incrementally as edges are mutated.
    Call :meth:`recompute` to re-derive them from the stored weights.
    """

    def __init__(self, n: int, edges: Iterable = (), forbidden: Iterable | None = None):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = int(n)
        self.forbidden = self_loops(n) if forbidden is None else frozenset(
            (int(u), int(v)) for u, v in forbidden
        )
        for u, v in self.forbidden:
            self._check_node(u)
            self._check_node(v)
        self._out: list[dict[int, float]] = [dict() for _ in range(n)]
        self._in: list[dict[int, float]] = [dict() for _ in range(n)]
        self._out_str = np.zeros(n)
        self._in_str = np.zeros(n)
        for u, v, w in edges:
            self.set_weight(u, v, w)

    # construction helpers

    @classmethod
    def from_dense(cls, W, forbidden: Iterable | None = None) -> "WeightedDigraph":
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        rows, cols = np.nonzero(W)
        G = cls(W.shape[0], forbidden=forbidden)
        for u, v in zip(rows.tolist(), cols.tolist()):
            G.set_weight(u, v, float(W[u, v]))
        return G

    def copy(self) -> "WeightedDigraph":
        G = WeightedDigraph(self.n, forbidden=())
        G.forbidden = self.forbidden
        G._out = [dict(d) for d in self._out]
        G._in = [dict(d) for d in self._in]
        G._out_str = self._out_str.copy()
        G._in_str = self._in_str.copy()
        return G

    # mutation

    def _check_node(self, u: int) -> None:
        if not 0 <= u < self.n:
            raise IndexError(f"node {u} out of range [0, {self.n})")

    def set_weight(self, u: int, v: int, w: float) -> None:
        """Set ``w_uv``; a weight of exactly zero removes the edge."""
        u, v, w = int(u), int(v), float(w)
        self._check_node(u)
        self._check_node(v)
        if not np.isfinite(w) or w < 0:
            raise ValueError(f"weight of edge ({u}, {v}) must be finite and >= 0, got {w}")
        if w > 0 and (u, v) in self.forbidden:
            raise ValueError(f"edge ({u}, {v}) is forbidden")
        old = self._out[u].get(v, 0.0)
        if w == 0.0:
            if old:
                del self._out[u][v]
                del self._in[v][u]
        else:
            self._out[u][v] = w
            self._in[v][u] = w
        self._out_str[u] += w - old
        self._in_str[v] += w - old

    def remove_edge(self, u: int, v: int) -> None:
        self.set_weight(u, v, 0.0)

    def recompute(self) -> None:
        """Re-derive strengths from the stored weights, discarding drift."""
        self._out_str = np.array([sum(d.values()) for d in self._out], dtype=float)
        self._in_str = np.array([sum(d.values()) for d in self._in], dtype=float)

    # queries

    def weight(self, u: int, v: int) -> float:
        return self._out[u].get(v, 0.0)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._out[u]

    def out_neighbors(self, u: int) -> dict[int, float]:
        return self._out[u]

    def in_neighbors(self, v: int) -> dict[int, float]:
        return self._in[v]

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Edges in (u, v) lexicographic order."""
        for u in range(self.n):
            for v in sorted(self._out[u]):
                yield u, v, self._out[u][v]

    @property
    def n_edges(self) -> int:
        return sum(len(d) for d in self._out)

    @property
    def total_weight(self) -> float:
        return float(sum(sum(d.values()) for d in self._out))

    @property
    def out_strength(self) -> np.ndarray:
        return self._out_str.copy()

    @property
    def in_strength(self) -> np.ndarray:
        return self._in_str.copy()

    def to_dense(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        for u, d in enumerate(self._out):
            if d:
                W[u, list(d.keys())] = list(d.values())
        return W

    def allowed_mask(self) -> np.ndarray:
        mask = np.ones((self.n, self.n), dtype=bool)
        for u, v in self.forbidden:
            mask[u, v] = False
        return mask

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedDigraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.forbidden == other.forbidden
            and self._out == other._out
        )

    def __repr__(self) -> str:
        return f"WeightedDigraph(n={self.n}, edges={self.n_edges})"


def as_dense(G) -> np.ndarray:
    """Dense weight matrix of a graph or an already-dense array."""
    if isinstance(G, WeightedDigraph):
        return G.to_dense()
    return np.asarray(G, dtype=float)


def degrees(G: WeightedDigraph) -> DegreeVector:
    out_deg = np.array([len(d) for d in G._out], dtype=np.int64)
    in_deg = np.array([len(d) for d in G._in], dtype=np.int64)
    return DegreeVector(out_deg, in_deg)


def strengths(G: WeightedDigraph) -> StrengthVector:
    return StrengthVector(G.out_strength, G.in_strength)


def within_slack(G: WeightedDigraph, d0: DegreeVector, m: int) -> bool:
    """True iff every in- and out-degree of ``G`` is within ``m`` of ``d0``."""
    if d0.n != G.n:
        raise ValueError(f"degree vector has n={d0.n}, graph has n={G.n}")
    d = degrees(G)
    if G.n == 0:
        return True
    dev = max(
        np.abs(d.out_deg - d0.out_deg).max(),
        np.abs(d.in_deg - d0.in_deg).max(),
    )
    return bool(dev <= m)


def bipartite_components(G: WeightedDigraph) -> list[tuple[frozenset, frozenset]]:
    """Connected components of the row/column bipartite graph of ``G``.

    Row vertex ``u`` is joined to column vertex ``v`` whenever ``w_uv > 0``.
    Each component is returned as ``(rows, cols)``. A row (column) with no
    edges is its own component with an empty column (row) set. Components
    are ordered by their smallest row, then smallest column.
    """
    n = G.n
    parent = list(range(2 * n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u in range(n):
        for v in G._out[u]:
            ra, rb = find(u), find(n + v)
            if ra != rb:
                parent[rb] = ra
    groups: dict[int, tuple[set, set]] = {}
    for x in range(2 * n):
        rows, cols = groups.setdefault(find(x), (set(), set()))
        (rows if x < n else cols).add(x % n)

    def key(rc):
        rows, cols = rc
        return (min(rows) if rows else n, min(cols) if cols else n)

    return sorted(((frozenset(r), frozenset(c)) for r, c in groups.values()), key=key)


@dataclass
class AdmissibilityReport:
    components: list
    n_blocks: int
    balanced: bool
    max_imbalance: float

    @property
    def confined(self) -> bool:
        """More than one block: the sampler can never join them with an edge."""
        return self.n_blocks > 1


def admissibility_report(G: WeightedDigraph, rtol: float = 1e-9) -> AdmissibilityReport:
    """Diagnose the block structure that the strength constraints impose.

    Every component of the bipartite graph must carry equal out- and
    in-strength totals. Components with both rows and columns are blocks;
    edges between different blocks can never be created by a k-cycle. Nodes
    with zero strength are trivially consistent.
    """
    comps = bipartite_components(G)
    s_out, s_in = G.out_strength, G.in_strength
    total = max(G.total_weight, 1.0)
    worst = 0.0
    n_blocks = 0
    for rows, cols in comps:
        if rows and cols:
            n_blocks += 1
        diff = abs(s_out[list(rows)].sum() - s_in[list(cols)].sum())
        worst = max(worst, diff / total)
    return AdmissibilityReport(comps, n_blocks, worst <= rtol, worst)


def as_partition(labels, n: int | None = None) -> np.ndarray:
    """Validate community labels and relabel them to ``0..K-1`` by first appearance."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("partition must be one label per node")
    if n is not None and len(labels) != n:
        raise ValueError(f"partition covers {len(labels)} nodes, graph has {n}")
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64)
