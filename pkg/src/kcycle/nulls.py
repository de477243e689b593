"""Competing null models: weighted Erdos-Renyi (WER) and the continuous configuration model (CCM)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import WeightedDigraph, degrees


@dataclass(frozen=True)
class WerParams:
    n: int
    edge_prob: float
    mean_weight: float


@dataclass(frozen=True)
class CcmParams:
    out_deg: np.ndarray
    in_deg: np.ndarray
    out_str: np.ndarray
    in_str: np.ndarray
    n_edges: int
    total_weight: float

    @property
    def n(self) -> int:
        return len(self.out_deg)

    def edge_prob_matrix(self) -> np.ndarray:
        raw = np.outer(self.out_deg, self.in_deg) / self.n_edges
        return np.minimum(raw, 1.0)

    @property
    def n_clipped(self) -> int:
        """Pairs whose raw probability exceeds 1; on those the expectation match fails."""
        return int(np.count_nonzero(np.outer(self.out_deg, self.in_deg) > self.n_edges))


def wer_fit(G: WeightedDigraph) -> WerParams:
    """Edge probability and mean weight over distinct ordered pairs (self-loops excluded)."""
    n = G.n
    if n < 2:
        raise ValueError("WER needs at least two nodes")
    a = G.n_edges
    if a == 0:
        raise ValueError("reference graph has no edges")
    return WerParams(n, a / (n * (n - 1)), G.total_weight / a)


def wer_weight_matrix(p: WerParams, rng: np.random.Generator) -> np.ndarray:
    n = p.n
    present = rng.random((n, n)) < p.edge_prob
    np.fill_diagonal(present, False)
    W = np.zeros((n, n))
    W[present] = rng.exponential(p.mean_weight, size=int(present.sum()))
    return W


def wer_sample(p: WerParams, rng: np.random.Generator) -> WeightedDigraph:
    return WeightedDigraph.from_dense(wer_weight_matrix(p, rng))


def ccm_fit(G: WeightedDigraph) -> CcmParams:
    if G.n_edges == 0:
        raise ValueError("reference graph has no edges")
    d = degrees(G)
    return CcmParams(
        d.out_deg.astype(float),
        d.in_deg.astype(float),
        G.out_strength,
        G.in_strength,
        G.n_edges,
        G.total_weight,
    )


def ccm_weight_matrix(p: CcmParams, rng: np.random.Generator) -> np.ndarray:
    """Independent edges with p_uv = min(d_out_u d_in_v / a_T, 1), self-loops included.

    Given an edge, its weight is exponential with mean s_out_u s_in_v / (w_T p_uv),
    so that E[w_uv] = s_out_u s_in_v / w_T.
    """
    P = p.edge_prob_matrix()
    present = rng.random(P.shape) < P
    mean = np.outer(p.out_str, p.in_str)[present] / (p.total_weight * P[present])
    W = np.zeros(P.shape)
    W[present] = rng.exponential(1.0, size=len(mean)) * mean
    return W


def ccm_sample(p: CcmParams, rng: np.random.Generator) -> WeightedDigraph:
    return WeightedDigraph.from_dense(ccm_weight_matrix(p, rng), forbidden=())
