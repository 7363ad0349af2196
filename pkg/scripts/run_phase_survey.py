#!/usr/bin/env python3
"""Effective-mass survey across the dynamical phase diagram.

Computes the critical mass, then evolves quenches above (+0.001), at (0)
and below (-9) the critical point, writing r_eff(t) tables and log-log
decay plots with the (3/16)/t^2 guide.
"""
import argparse
from pathlib import Path

from onquench.model import ModelConfig
from onquench.pipeline import ExperimentPlan, run
from onquench.plots import emit_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/phase_survey")
    ap.add_argument("--t-end", type=float, default=300.0)
    ap.add_argument("--n-k", type=int, default=20000)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)

    for delta in (0.001, 0.0, -9.0):
        t_end = min(args.t_end, 50.0) if delta == -9.0 else args.t_end
        cfg = ModelConfig(r_i=100.0, u=10.0, delta=delta, n_k=args.n_k,
                          n_tot=60000, n_par=64, t_end=t_end,
                          checkpoint_times=(t_end,))
        sub = out / f"delta_{delta:g}"
        run(ExperimentPlan(kind="rc", config=cfg), out_dir=sub,
            cache_dir=out / "cache", threads=args.threads)
        run(ExperimentPlan(kind="evolve", config=cfg), out_dir=sub,
            cache_dir=out / "cache", threads=args.threads)
        emit_plot(sub / "evolve" / "reff.csv", "reff", sub / "plots" / "reff.svg")
        print(f"delta = {delta:+g}: tables and plot under {sub}")


if __name__ == "__main__":
    main()
