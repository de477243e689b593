"""Command-line interface.

Every command accepts ``--seed``, ``--threads``, ``--manifest-out`` and
``--config`` (a flat ``key = value`` file whose keys are flag names; explicit
flags win). ``--from-manifest`` re-runs the command recorded in a manifest.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

log = logging.getLogger("kcycle")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(","))


def _names(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


# commands; each returns (inputs, outputs, extra manifest fields)


def cmd_fit(a):
    from .decm import FitOptions, fit_mle, residuals
    from .io import save_params

    G = _load_graph(a)
    p = fit_mle(G, FitOptions(tol=a.tol, max_iter=a.max_iter, drop_empty=a.drop_empty))
    save_params(p, a.out)
    res = float(np.max(np.abs(residuals(p, G))))
    log.info("max residual %.3g", res)
    return _inputs(a), [a.out], {"max_residual": res}


def cmd_sample(a):
    from .io import load_params, save_edge_list
    from .nulls import ccm_fit, ccm_sample, wer_fit, wer_sample
    from .sampler import Chain, SamplerConfig

    G = _load_graph(a)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    extra = {}
    if a.model == "kcycle":
        params = load_params(a.params) if a.params else None
        cfg = SamplerConfig(m=a.slack, nuisance=a.nuisance, burn_in=a.burn_in, thin=a.thin, seed=a.seed)
        chain = Chain(G, cfg, params=params)
        chain.advance(cfg.burn_in)
        draws = []
        for _ in range(a.samples):
            chain.advance(cfg.thin)
            draws.append(chain.graph())
        chain.resync()
        extra = {"nuisance": chain.nuisance, "chain": chain.stats.as_dict()}
    else:
        rng = np.random.default_rng(a.seed)
        if a.model == "wer":
            p = wer_fit(G)
            draws = [wer_sample(p, rng) for _ in range(a.samples)]
        else:
            p = ccm_fit(G)
            extra = {"clipped_pairs": p.n_clipped}
            draws = [ccm_sample(p, rng) for _ in range(a.samples)]
    for i, H in enumerate(draws):
        path = out / f"sample_{i:05d}.tsv"
        save_edge_list(H, path)
        files.append(path)
    return _inputs(a), files, extra


def cmd_benchmark(a):
    from .benchmark import BenchmarkParams, NodeLaw, generate
    from .io import save_edge_list, save_partition

    p = BenchmarkParams(
        n=a.n, theta=a.theta, alpha1=a.alpha1, s_min=a.s_min, s_max=a.s_max,
        node_law=NodeLaw(a.shape, a.density),
    )
    draw = generate(p, np.random.default_rng(a.seed))
    save_edge_list(draw.graph, a.out)
    outs = [a.out]
    if a.partition_out:
        save_partition(draw.partition, a.partition_out)
        outs.append(a.partition_out)
    return [], outs, {"benchmark": p.describe(), "n_edges": draw.graph.n_edges}


def cmd_demo_graph(a):
    from .benchmark import generate_core_periphery
    from .io import save_edge_list

    G = generate_core_periphery(np.random.default_rng(a.seed))
    save_edge_list(G, a.out)
    return [], [a.out], {"n_edges": G.n_edges}


def cmd_randomize_demo(a):
    from .experiments import RandomizeDemoConfig, randomize_demo

    cfg = RandomizeDemoConfig(m=a.slack, iterations=a.iterations, trace_every=a.trace_every,
                              nuisance=a.nuisance, seed=a.seed)
    res = randomize_demo(cfg, Path(a.out_dir))
    outs = list(res.snapshot_files) + [Path(a.out_dir) / "trace.csv"]
    log.info("planted modularity %.4f -> %.4f in %.1f s", res.trace[0, 1], res.trace[-1, 1], res.seconds)
    return [], outs, {"decay": res.decay, "max_strength_drift": res.max_strength_drift,
                      "max_slack": res.max_slack, "sampler_seconds": res.seconds}


def cmd_significance(a):
    from .io import load_params, load_partition
    from .significance import SignificanceConfig, significance_pipeline

    G = _load_graph(a)
    c = load_partition(a.partition, G.n) if a.partition else None
    params = load_params(a.params) if a.params else None
    cfg = SignificanceConfig(
        null=a.null, n_samples=a.samples, m=a.slack, burn_in_per_edge=a.burn_in_per_edge,
        thin_per_edge=a.thin_per_edge, nuisance=a.nuisance, seed=a.seed,
    )
    rep = significance_pipeline(G, a.statistic, cfg, partition=c, params=params)
    doc = rep.to_dict()
    text = json.dumps(doc, indent=1) + "\n"
    if a.report:
        Path(a.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return _inputs(a), [a.report] if a.report else [], {"p_value": rep.p_value, "t0": rep.t0}


def cmd_power_study(a):
    from .experiments import PowerStudyConfig, power_study, rejection_rates

    kw = dict(
        thetas=a.thetas, models=a.models, statistics=a.statistics, n_samples=a.samples,
        n=a.n, density=a.density, seed=a.seed, threads=a.threads, nuisance=a.nuisance,
    )
    if a.replications is not None:
        kw["replications"] = a.replications
    cfg = PowerStudyConfig.full(**kw) if a.full else PowerStudyConfig(**kw)
    rows = power_study(cfg, Path(a.out), progress=True)
    rates = {f"{m}/{s}": r for (m, s), r in rejection_rates(rows).items()}
    return [], [a.out], {"power_study": cfg.to_dict(), "rejection_rate_0.05": rates}


# plumbing


def _load_graph(a):
    from .io import load_edge_list, load_forbidden

    forbidden = load_forbidden(a.forbidden) if getattr(a, "forbidden", None) else None
    return load_edge_list(a.input, forbidden=forbidden)


def _inputs(a) -> list:
    return [p for p in (getattr(a, k, None) for k in ("input", "forbidden", "partition", "params")) if p]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for the power study")
    common.add_argument("--manifest-out", help="write a JSON run manifest here")
    common.add_argument("--config", help="key = value file of flag defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="kcycle", description="Strength-preserving null models for weighted digraphs.")
    ap.add_argument("--from-manifest", help="re-run the command recorded in a manifest")
    sub = ap.add_subparsers(dest="command")

    def graph_in(p):
        p.add_argument("--input", required=True, help="edge list (u<TAB>v<TAB>w)")
        p.add_argument("--forbidden", help="forbidden-pair file (default: self-loops)")

    p = sub.add_parser("fit", parents=[common], help="fit DECM parameters by maximum likelihood")
    graph_in(p)
    p.add_argument("--out", required=True, help="parameter JSON")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--drop-empty", action="store_true", help="pin parameters of zero-degree sides")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", parents=[common], help="draw null graphs")
    graph_in(p)
    p.add_argument("--model", choices=("kcycle", "wer", "ccm"), default="kcycle")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--slack", type=int, default=1, help="degree slack m")
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--nuisance", choices=("zero", "mle", "file", "auto"), default="auto")
    p.add_argument("--params", help="parameter JSON for --nuisance file")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("benchmark", parents=[common], help="planted-partition benchmark graph")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--alpha1", type=float, default=2.0)
    p.add_argument("--s-min", type=int)
    p.add_argument("--s-max", type=int)
    p.add_argument("--shape", type=float, default=2.5, help="Pareto exponent of node propensities")
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--partition-out")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("demo-graph", parents=[common], help="1000-node core-periphery graph")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo_graph)

    p = sub.add_parser("randomize-demo", parents=[common], help="randomize the core-periphery graph")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--iterations", type=int, default=15_000_000)
    p.add_argument("--trace-every", type=int, default=100_000)
    p.add_argument("--slack", type=int, default=1)
    p.add_argument("--nuisance", choices=("zero", "mle", "auto"), default="zero")
    p.set_defaults(func=cmd_randomize_demo)

    p = sub.add_parser("significance", parents=[common], help="empirical p-value of a statistic")
    graph_in(p)
    p.add_argument("--statistic", choices=("modularity-detected", "within-community", "modularity-fixed"),
                   default="modularity-detected")
    p.add_argument("--partition", help="partition file (u<TAB>label)")
    p.add_argument("--null", choices=("kcycle", "wer", "ccm"), default="kcycle")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--slack", type=int, default=1)
    p.add_argument("--burn-in-per-edge", type=float, default=50.0)
    p.add_argument("--thin-per-edge", type=float, default=5.0)
    p.add_argument("--nuisance", choices=("zero", "mle", "file", "auto"), default="auto")
    p.add_argument("--params")
    p.add_argument("--report", help="JSON report path (default: stdout)")
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("power-study", parents=[common], help="p-values over a theta grid")
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--thetas", type=_floats, default=(1.0, 1.2, 1.4, 1.6, 1.8, 2.0))
    p.add_argument("--models", type=_names, default=("kcycle-m1", "kcycle-m-large", "wer", "ccm"))
    p.add_argument("--statistics", type=_names, default=("modularity-detected", "within-community"))
    p.add_argument("--replications", type=int, help="default 200, or 5000 with --full")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--nuisance", choices=("zero", "mle", "auto"), default="auto")
    p.add_argument("--full", action="store_true", help="full-scale replication count")
    p.set_defaults(func=cmd_power_study)
    return ap


def _parse(parser, argv):
    a = parser.parse_args(argv)
    if a.command and a.config:
        defaults = read_config(a.config)
        subp = parser._subparsers._group_actions[0].choices[a.command]
        known = {act.dest: act for act in subp._actions}
        conv = {}
        for k, v in defaults.items():
            if k not in known:
                raise SystemExit(f"unknown config key {k!r} for {a.command}")
            act = known[k]
            if isinstance(act, argparse._StoreTrueAction):
                conv[k] = v.lower() in ("1", "true", "yes", "on")
            else:
                conv[k] = act.type(v) if act.type else v
        subp.set_defaults(**conv)
        a = parser.parse_args(argv)
    return a


def _jsonable(v):
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    return v


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    a = _parse(parser, argv)
    if a.from_manifest:
        doc = json.loads(Path(a.from_manifest).read_text(encoding="utf-8"))
        rest = [x for x in argv if x not in ("--from-manifest", a.from_manifest)]
        return main(list(doc["argv"]) + rest)
    if not a.command:
        parser.print_help()
        return 2
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    t = time.perf_counter()
    inputs, outputs, extra = a.func(a)
    if a.config:
        inputs = [a.config, *inputs]
    duration = time.perf_counter() - t
    if a.manifest_out:
        # the manifest path itself is not part of the reproducible invocation
        replay, skip = [], False
        for x in argv:
            if skip:
                skip = False
                continue
            if x == "--manifest-out":
                skip = True
                continue
            if x.startswith("--manifest-out="):
                continue
            replay.append(x)
        config = {k: _jsonable(v) for k, v in vars(a).items() if k not in ("func", "manifest_out", "from_manifest")}
        doc = {
            "command": a.command,
            "argv": replay,
            "config": config,
            "seed": a.seed,
            "version": _version(),
            "inputs": {str(p): sha256(p) for p in inputs},
            "outputs": {str(p): sha256(p) for p in outputs},
            "duration_seconds": duration,
            **{k: _jsonable(v) for k, v in extra.items()},
        }
        Path(a.manifest_out).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
