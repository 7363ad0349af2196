#!/usr/bin/env python3
"""Entropy crossover and eigenmode fronts after a quench into the ordered
phase: area-to-volume law of the slab entropy, zero-mode logarithmic growth,
and the ballistic structure of the two lowest entanglement modes.
"""
import argparse
from pathlib import Path

import numpy as np

from onquench.model import ModelConfig
from onquench.pipeline import ExperimentPlan, run
from onquench.plots import emit_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/entropy_crossover")
    ap.add_argument("--delta", type=float, default=-1.0)
    ap.add_argument("--t-end", type=float, default=300.0)
    ap.add_argument("--n-k", type=int, default=20000)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)

    growth = tuple(t for t in np.arange(1.0, 17.0, 1.0) if t <= args.t_end)
    late = tuple(t for t in (30.0, 60.0, 100.0, 200.0, 300.0) if t <= args.t_end)
    front = tuple(t for t in np.arange(1.0, 11.6, 0.75) if t <= args.t_end)
    times = tuple(sorted({0.0, *growth, *late, *front}))

    cfg = ModelConfig(r_i=100.0, u=10.0, delta=args.delta, n_k=args.n_k,
                      n_tot=60000, n_par=64, t_end=args.t_end,
                      checkpoint_times=times)

    run(ExperimentPlan(kind="entropy_scan", config=cfg,
                       ns_list=(25, 50, 75, 100), times=(0.0, *growth, *late)),
        out_dir=out, cache_dir=out / "cache", threads=args.threads)
    emit_plot(out / "entropy_scan" / "entropy.csv", "entropy_scan",
              out / "plots" / "entropy_vs_L.svg")
    emit_plot(out / "entropy_scan" / "entropy_q_ns100.csv", "entropy_growth",
              out / "plots" / "zero_mode_growth.svg")

    mode_times = tuple(sorted({*front, *(t for t in (15.0, 25.0) if t <= args.t_end),
                               *late}))
    run(ExperimentPlan(kind="modes", config=cfg, ns_list=(100,), times=mode_times),
        out_dir=out, cache_dir=out / "cache", threads=args.threads)
    sample = front[len(front) // 2]
    emit_plot(out / "modes" / f"profile_t{sample:g}.csv", "profile",
              out / "plots" / "mode_profiles.svg")
    print(f"entropy scan + mode analysis under {out}")


if __name__ == "__main__":
    main()
