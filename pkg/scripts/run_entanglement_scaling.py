#!/usr/bin/env python3
"""Entanglement-spectrum scaling: dispersion exponents, gap collapse and the
quench-depth scan of the dispersion prefactor.

The dispersion fits live in the scaling window q t in [2, 10]; t = 1000 is
the default because the window has not fully opened by t ~ 300 at this
resolution. Expect ~15 minutes per fresh quench depth at the defaults.
"""
import argparse
from pathlib import Path

import numpy as np

from onquench.model import ModelConfig
from onquench.pipeline import ExperimentPlan, run
from onquench.plots import emit_plot


def config(delta, t_end, n_k, times=()):
    return ModelConfig(r_i=100.0, u=10.0, delta=delta, n_k=n_k, n_tot=60000,
                       n_par=64, t_end=t_end, checkpoint_times=tuple(times))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/entanglement_scaling")
    ap.add_argument("--t-fit", type=float, default=1000.0)
    ap.add_argument("--n-k", type=int, default=20000)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)

    gap_times = tuple(np.geomspace(1.5, min(300.0, args.t_fit), 40))
    gap_times += tuple(t for t in (400.0, 500.0, 650.0, 800.0, 1000.0)
                       if t <= args.t_fit)
    for delta in (-1.0, 0.0):
        cfg = config(delta, args.t_fit, args.n_k, times=gap_times)
        sub = out / f"delta_{delta:g}"
        run(ExperimentPlan(kind="dispersion", config=cfg, fit_time=args.t_fit),
            out_dir=sub, cache_dir=out / "cache", threads=args.threads)
        emit_plot(sub / "dispersion" / "dispersion.csv", "dispersion",
                  sub / "plots" / "dispersion.svg")
        run(ExperimentPlan(kind="gap", config=cfg,
                           times=tuple(t for t in gap_times if t <= args.t_fit)),
            out_dir=sub, cache_dir=out / "cache", threads=args.threads)
        emit_plot(sub / "gap" / "gap_series.csv", "gap", sub / "plots" / "gap.svg")
        print(f"delta = {delta:+g}: dispersion + gap under {sub}")

    scan_cfg = config(-1.0, 300.0, args.n_k)
    run(ExperimentPlan(kind="delta_scan", config=scan_cfg, fit_time=300.0),
        out_dir=out, cache_dir=out / "cache", threads=args.threads)
    print(f"quench-depth scan under {out / 'delta_scan'}")


if __name__ == "__main__":
    main()
