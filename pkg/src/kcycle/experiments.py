"""Experiment harnesses: core-periphery randomization and the power study."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .benchmark import BenchmarkParams, NodeLaw, core_periphery_partition, generate, generate_core_periphery
from .io import save_edge_list
from .sampler import Chain, SamplerConfig
from .significance import SignificanceConfig, make_statistic, significance_many
from .stats import DetectOptions, modularity

log = logging.getLogger(__name__)

DETECTOR = "greedy-modularity"


@dataclass
class RandomizeDemoConfig:
    m: int = 1
    iterations: int = 15_000_000
    snapshots: tuple = (0, 1_000_000, 2_000_000, 3_000_000, 4_000_000, 15_000_000)
    trace_every: int = 100_000
    nuisance: str = "zero"
    seed: int = 0


@dataclass
class DemoResult:
    trace: np.ndarray  # rows of (iteration, planted modularity, edge count)
    snapshot_files: list
    max_strength_drift: float
    max_slack: int
    seconds: float

    @property
    def decay(self) -> float:
        """Final planted-partition modularity as a fraction of the initial value."""
        return float(self.trace[-1, 1] / self.trace[0, 1])


def randomize_demo(cfg: RandomizeDemoConfig, out_dir: Path | None = None) -> DemoResult:
    """Randomize the core-periphery graph, tracing planted modularity and writing snapshots."""
    rng = np.random.default_rng(cfg.seed)
    G0 = generate_core_periphery(rng)
    c = core_periphery_partition()
    scfg = SamplerConfig(m=cfg.m, nuisance=cfg.nuisance, seed=cfg.seed)
    chain = Chain(G0, scfg)
    checkpoints = sorted({int(s) for s in cfg.snapshots if s <= cfg.iterations}
                         | set(range(0, cfg.iterations + 1, cfg.trace_every)) | {cfg.iterations})
    # the final state is always written
    snaps = {int(s) for s in cfg.snapshots if s <= cfg.iterations} | {cfg.iterations}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    buf = np.zeros((G0.n, G0.n))
    trace, files = [], []
    done = 0
    t = time.perf_counter()
    for it in checkpoints:
        chain.advance(it - done)
        done = it
        W = chain.state.to_dense(buf)
        trace.append((it, modularity(W, c), chain.state.n_edges))
        if it in snaps and out_dir is not None:
            G = chain.graph()
            path = out_dir / f"snapshot_{it:09d}.tsv"
            save_edge_list(G, path)
            _save_occupancy(G, out_dir / f"occupancy_{it:09d}.csv")
            files.append(path)
    seconds = time.perf_counter() - t
    chain.resync()
    trace = np.array(trace)
    if out_dir is not None:
        with open(out_dir / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "planted_modularity", "edge_count"])
            for it, q, a in trace:
                w.writerow([int(it), repr(float(q)), int(a)])
    return DemoResult(trace, files, chain.stats.max_strength_drift, chain.state.max_slack(), seconds)


def _save_occupancy(G, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col"])
        for u, v, _ in G.edges():
            w.writerow([u, v])


# power study

MODELS = ("kcycle-m1", "kcycle-m-large", "wer", "ccm")
PHASES = ("modularity-detected", "within-community")
CSV_COLUMNS = ("theta", "null_model", "statistic", "replication", "p_value", "seed")


@dataclass
class PowerStudyConfig:
    """Grid and protocol of the power study.

    The benchmark graph of a replication depends on (theta index, replication)
    only, so every null model is tested on the same graphs; null sampling is
    seeded by (theta index, model, replication).
    """

    thetas: tuple = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
    models: tuple = MODELS
    statistics: tuple = PHASES
    replications: int = 200
    n_samples: int = 200
    n: int = 100
    alpha1: float = 2.0
    shape: float = 2.5
    density: float = 1.0
    burn_in_per_edge: float = 50.0
    thin_per_edge: float = 5.0
    nuisance: str = "auto"
    seed: int = 0
    threads: int = 1
    detector: str = field(default=DETECTOR, init=False)

    def __post_init__(self):
        bad = set(self.models) - set(MODELS)
        if bad:
            raise ValueError(f"unknown null models {sorted(bad)}")
        bad = set(self.statistics) - set(PHASES)
        if bad:
            raise ValueError(f"unknown statistics {sorted(bad)}")

    @classmethod
    def full(cls, **kw) -> "PowerStudyConfig":
        kw.setdefault("replications", 5000)
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


def _seed(base: int, *key: int) -> int:
    return int(np.random.SeedSequence(base, spawn_key=key).generate_state(1, np.uint64)[0])


def _replication(cfg: PowerStudyConfig, ti: int, rep: int) -> list[tuple]:
    theta = cfg.thetas[ti]
    bp = BenchmarkParams(n=cfg.n, theta=theta, alpha1=cfg.alpha1, node_law=NodeLaw(cfg.shape, cfg.density))
    draw = generate(bp, np.random.default_rng(_seed(cfg.seed, ti, rep)))
    stats = {}
    if "modularity-detected" in cfg.statistics:
        stats["modularity-detected"] = make_statistic("modularity-detected", detect=DetectOptions())
    if "within-community" in cfg.statistics:
        stats["within-community"] = make_statistic("within-community", draw.partition)
    rows = []
    for model in cfg.models:
        seed = _seed(cfg.seed, ti, MODELS.index(model), rep)
        null = "kcycle" if model.startswith("kcycle") else model
        m = 1 if model == "kcycle-m1" else cfg.n
        scfg = SignificanceConfig(
            null=null, n_samples=cfg.n_samples, m=m, burn_in_per_edge=cfg.burn_in_per_edge,
            thin_per_edge=cfg.thin_per_edge, nuisance=cfg.nuisance, seed=seed,
        )
        if draw.graph.n_edges == 0:
            reports = None
        else:
            reports = significance_many(draw.graph, stats, scfg)
        for name in cfg.statistics:
            p = reports[name].p_value if reports else 1.0
            rows.append((theta, model, name, rep, p, seed))
    return rows


def _task(args):
    return _replication(*args)


def power_study(cfg: PowerStudyConfig, out_csv: Path | None = None, progress: bool = False) -> list[tuple]:
    """Rows (theta, null_model, statistic, replication, p_value, seed), sorted by the grid order."""
    tasks = [(cfg, ti, rep) for ti in range(len(cfg.thetas)) for rep in range(cfg.replications)]
    rows = []
    t = time.perf_counter()
    if cfg.threads > 1:
        with ProcessPoolExecutor(cfg.threads) as pool:
            for i, r in enumerate(pool.map(_task, tasks, chunksize=4)):
                rows.extend(r)
                if progress and (i + 1) % 50 == 0:
                    log.info("%d/%d replications (%.0f s)", i + 1, len(tasks), time.perf_counter() - t)
    else:
        for i, task in enumerate(tasks):
            rows.extend(_task(task))
            if progress and (i + 1) % 50 == 0:
                log.info("%d/%d replications (%.0f s)", i + 1, len(tasks), time.perf_counter() - t)
    order = {m: i for i, m in enumerate(cfg.models)}
    srt = {s: i for i, s in enumerate(cfg.statistics)}
    rows.sort(key=lambda r: (cfg.thetas.index(r[0]), order[r[1]], srt[r[2]], r[3]))
    if out_csv is not None:
        write_power_csv(rows, out_csv)
    return rows


def write_power_csv(rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for theta, model, stat, rep, p, seed in rows:
            w.writerow([repr(float(theta)), model, stat, rep, repr(float(p)), seed])


def read_power_csv(path: Path) -> list[tuple]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return [(float(d["theta"]), d["null_model"], d["statistic"], int(d["replication"]),
                 float(d["p_value"]), int(d["seed"])) for d in r]


def rejection_rates(rows, alpha: float = 0.05) -> dict:
    """{(model, statistic): {theta: fraction of p-values <= alpha}}."""
    acc: dict = {}
    for theta, model, stat, _, p, _ in rows:
        acc.setdefault((model, stat), {}).setdefault(theta, []).append(p <= alpha)
    return {k: {t: float(np.mean(v)) for t, v in sorted(d.items())} for k, d in acc.items()}


def grid_inversions(rates: dict) -> int:
    """Number of adjacent theta steps where the rejection rate decreases."""
    vals = [rates[t] for t in sorted(rates)]
    return sum(b < a for a, b in zip(vals, vals[1:]))


def p_values(rows, theta: float, model: str, stat: str) -> np.ndarray:
    return np.array([r[4] for r in rows if r[0] == theta and r[1] == model and r[2] == stat])
