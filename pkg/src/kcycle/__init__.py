"""Strength-preserving null models for weighted directed graphs, sampled by k-cycle MCMC."""

from .benchmark import BenchmarkParams, generate, generate_core_periphery, sample_benchmark
from .decm import DecmParams, FitOptions, fit_mle, sample_graph
from .graph import WeightedDigraph, bipartite_components, degrees, strengths, within_slack
from .io import load_edge_list, save_edge_list
from .nulls import ccm_fit, ccm_sample, wer_fit, wer_sample
from .sampler import Chain, CycleCoords, SamplerConfig, run
from .significance import SignificanceConfig, SignificanceReport, significance_pipeline
from .stats import detect_communities, empirical_p_value, modularity, within_community_edges

__version__ = "0.1.0"

__all__ = [
    "BenchmarkParams", "Chain", "CycleCoords", "DecmParams", "FitOptions", "SamplerConfig",
    "SignificanceConfig", "SignificanceReport", "WeightedDigraph", "bipartite_components",
    "ccm_fit", "ccm_sample", "degrees", "detect_communities", "empirical_p_value", "fit_mle",
    "generate", "generate_core_periphery", "load_edge_list", "modularity", "run", "sample_benchmark",
    "sample_graph", "save_edge_list", "significance_pipeline", "strengths", "wer_fit", "wer_sample",
    "within_community_edges", "within_slack",
]
