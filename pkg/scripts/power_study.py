"""Desk-scale power study: p-values of both statistics over the theta grid, then rejection rates.

    python3 scripts/power_study.py --out results/power.csv --threads 4
    python3 scripts/power_study.py --summarize results/power.csv

Run with ``--full`` for 5000 replications per grid point.
"""
import argparse
import logging
from pathlib import Path

import numpy as np
from scipy import stats

from kcycle.experiments import PowerStudyConfig, grid_inversions, p_values, power_study, read_power_csv, rejection_rates


def summarize(rows, alpha=0.05):
    rates = rejection_rates(rows, alpha)
    thetas = sorted({r[0] for r in rows})
    print(f"rejection rate at alpha={alpha}")
    print(f"{'model':<16}{'statistic':<22}" + "".join(f"{t:>7.1f}" for t in thetas) + "  inversions")
    for (model, stat), by_theta in rates.items():
        cells = "".join(f"{by_theta.get(t, np.nan):7.3f}" for t in thetas)
        print(f"{model:<16}{stat:<22}{cells}  {grid_inversions(by_theta)}")
    if 1.0 in thetas:
        print("uniformity of p-values at theta = 1 (KS)")
        for model, stat in rates:
            p = p_values(rows, 1.0, model, stat)
            print(f"  {model:<16}{stat:<22} mean {p.mean():.3f}  KS p {stats.kstest(p, 'uniform').pvalue:.3g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/power.csv"))
    ap.add_argument("--models", default="kcycle-m1,kcycle-m-large,wer,ccm")
    ap.add_argument("--replications", type=int)
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--summarize", type=Path, help="only summarize an existing CSV")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if args.summarize:
        summarize(read_power_csv(args.summarize))
        return
    kw = dict(models=tuple(args.models.split(",")), threads=args.threads, seed=args.seed)
    if args.replications:
        kw["replications"] = args.replications
    cfg = PowerStudyConfig.full(**kw) if args.full else PowerStudyConfig(**kw)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    summarize(power_study(cfg, args.out, progress=True))


if __name__ == "__main__":
    main()
