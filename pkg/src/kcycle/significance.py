"""Significance testing: observed statistic vs. statistics of null-model samples."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

import numpy as np

from .decm import DecmParams
from .graph import WeightedDigraph, as_dense, as_partition
from .nulls import ccm_fit, ccm_weight_matrix, wer_fit, wer_weight_matrix
from .sampler import Chain, SamplerConfig
from .stats import (
    DetectOptions,
    detect_communities,
    empirical_p_value,
    modularity,
    within_community_edges,
)

STATISTICS = ("modularity-detected", "within-community", "modularity-fixed")
NULL_MODELS = ("kcycle", "wer", "ccm", "identity")


@dataclass
class SignificanceConfig:
    """Pipeline settings.

    The k-cycle chain burns in for ``burn_in_per_edge * M`` steps and keeps
    one graph every ``thin_per_edge * M`` steps, ``M`` being the edge count of
    the observed graph.
    """

    null: str = "kcycle"
    n_samples: int = 200
    m: int = 1
    burn_in_per_edge: float = 50.0
    thin_per_edge: float = 5.0
    nuisance: str = "auto"
    seed: int = 0
    detect_seed: int | None = None

    def __post_init__(self):
        if self.null not in NULL_MODELS:
            raise ValueError(f"unknown null model {self.null!r}")
        if self.n_samples < 1:
            raise ValueError("need at least one null sample")

    def chain_config(self, n_edges: int) -> SamplerConfig:
        return SamplerConfig(
            m=self.m,
            nuisance=self.nuisance,
            burn_in=int(round(self.burn_in_per_edge * n_edges)),
            thin=max(1, int(round(self.thin_per_edge * n_edges))),
            seed=self.seed,
        )


@dataclass
class SignificanceReport:
    statistic: str
    t0: float
    samples: np.ndarray
    p_value: float
    config: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def summary(self) -> dict:
        q = np.quantile(self.samples, [0.0, 0.25, 0.5, 0.75, 1.0])
        return dict(zip(("min", "q25", "median", "q75", "max"), map(float, q)))

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "t0": float(self.t0),
            "p_value": self.p_value,
            "n_samples": self.n_samples,
            "samples_summary": self.summary(),
            "config": self.config,
        }


def make_statistic(name: str, partition=None, detect: DetectOptions | None = None) -> Callable:
    """Statistic as a function of a dense weight matrix."""
    if name == "modularity-detected":
        return lambda W: modularity(W, detect_communities(W, detect))
    if partition is None:
        raise ValueError(f"statistic {name!r} needs a partition")
    c = as_partition(partition)
    if name == "within-community":
        return lambda W: float(within_community_edges(W, c))
    if name == "modularity-fixed":
        return lambda W: modularity(W, c)
    raise ValueError(f"unknown statistic {name!r}")


def null_samples(G0: WeightedDigraph, cfg: SignificanceConfig, params: DecmParams | None = None) -> Iterator[np.ndarray]:
    """Dense weight matrices drawn from the configured null model.

    The yielded buffer may be reused between iterations; copy it to keep it.
    """
    if cfg.null == "identity":
        W = as_dense(G0)
        for _ in range(cfg.n_samples):
            yield W
        return
    if cfg.null == "kcycle":
        scfg = cfg.chain_config(G0.n_edges)
        chain = Chain(G0, scfg, params=params)
        chain.advance(scfg.burn_in)
        buf = np.zeros((G0.n, G0.n))
        for _ in range(cfg.n_samples):
            chain.advance(scfg.thin)
            yield chain.state.to_dense(buf)
        return
    rng = np.random.default_rng(cfg.seed)
    if cfg.null == "wer":
        p = wer_fit(G0)
        for _ in range(cfg.n_samples):
            yield wer_weight_matrix(p, rng)
    else:
        p = ccm_fit(G0)
        for _ in range(cfg.n_samples):
            yield ccm_weight_matrix(p, rng)


def significance_many(
    G0: WeightedDigraph,
    statistics: dict[str, Callable],
    cfg: SignificanceConfig,
    params: DecmParams | None = None,
) -> dict[str, SignificanceReport]:
    """Evaluate several statistics on the same null draws."""
    W0 = as_dense(G0)
    t0 = {name: f(W0) for name, f in statistics.items()}
    values = {name: [] for name in statistics}
    for W in null_samples(G0, cfg, params):
        for name, f in statistics.items():
            values[name].append(f(W))
    out = {}
    for name in statistics:
        samples = np.asarray(values[name], dtype=float)
        out[name] = SignificanceReport(name, t0[name], samples, empirical_p_value(t0[name], samples), asdict(cfg))
    return out


def significance_pipeline(
    G0: WeightedDigraph,
    statistic: str,
    cfg: SignificanceConfig,
    partition=None,
    params: DecmParams | None = None,
) -> SignificanceReport:
    detect = DetectOptions(seed=cfg.detect_seed)
    f = make_statistic(statistic, partition, detect)
    return significance_many(G0, {statistic: f}, cfg, params)[statistic]
