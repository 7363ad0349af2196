"""Render result tables to self-contained SVG panels."""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigError
from .storage import read_csv

PLOT_KINDS = ("reff", "dispersion", "gap", "entropy_scan", "entropy_growth", "profile")

_REQUIRED = {
    "reff": ("t", "r_eff"),
    "dispersion": ("q_par", "omega0"),
    "gap": ("L", "t", "inv_gap"),
    "entropy_scan": ("t", "L", "S_per_area"),
    "entropy_growth": ("t", "S_zero_mode"),
    "profile": ("z_index", "density_j0"),
}


def _check_table(kind: str, columns, data):
    if kind not in _REQUIRED:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    for col in _REQUIRED[kind]:
        if col not in columns:
            raise ConfigError(f"plot kind {kind!r} needs column {col!r}, "
                              f"table has {columns}")
    n = data[_REQUIRED[kind][0]].size
    if n == 0:
        raise ConfigError("table has no rows")


def emit_plot(table: Path, kind: str, out_path: Path) -> Path:
    """Render one table; returns the SVG path. Nothing is written when the
    table does not match the plot kind."""
    columns, data = read_csv(table)
    _check_table(kind, columns, data)

    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    if kind == "reff":
        t, y = data["t"], np.abs(data["r_eff"])
        pos = (t > 0) & (y > 0)
        if not np.any(pos):
            raise ConfigError("r_eff table has no plottable rows")
        ax.loglog(t[pos], y[pos], lw=1.2, label="|r_eff(t)|")
        guide_t = np.geomspace(max(t[pos].min(), 1e-2), t[pos].max(), 50)
        ax.loglog(guide_t, (3.0 / 16.0) / guide_t**2, "k--", lw=1, label="(3/16) t^-2")
        ax.set_xlabel("t")
        ax.set_ylabel("effective mass")
        ax.legend(frameon=False)
    elif kind == "dispersion":
        q, w = data["q_par"], data["omega0"]
        ax.loglog(q, w, "o", ms=3, label="omega0(q)")
        slope, intercept = np.polyfit(np.log(q), np.log(w), 1)
        ax.loglog(q, np.exp(intercept) * q**slope, "k--", lw=1,
                  label=f"fit q^{slope:.3f}")
        ax.set_xlabel("q_par")
        ax.set_ylabel("omega0")
        ax.legend(frameon=False)
    elif kind == "gap":
        for length in np.unique(data["L"]):
            sel = data["L"] == length
            ax.loglog(data["t"][sel], data["inv_gap"][sel], lw=1.2, label=f"L = {length:.3g}")
        ax.set_xlabel("t")
        ax.set_ylabel("1 / gap")
        ax.legend(frameon=False)
    elif kind == "entropy_scan":
        for t in np.unique(data["t"]):
            sel = data["t"] == t
            order = np.argsort(data["L"][sel])
            ax.plot(data["L"][sel][order], data["S_per_area"][sel][order],
                    "o-", ms=3, lw=1.0, label=f"t = {t:.3g}")
        ax.set_xlabel("L")
        ax.set_ylabel("S per unit area")
        ax.legend(frameon=False, fontsize=7)
    elif kind == "entropy_growth":
        t, s0 = data["t"], data["S_zero_mode"]
        pos = t > 0
        ax.semilogx(t[pos], s0[pos], lw=1.2, label="S_{q=0}(t)")
        ax.set_xlabel("t")
        ax.set_ylabel("zero-mode entropy")
        ax.legend(frameon=False)
    elif kind == "profile":
        z = data["z_index"]
        for col in columns:
            if col.startswith("density_j"):
                ax.plot(z, data[col], lw=1.2, label=col.replace("density_", ""))
        ax.set_xlabel("z index")
        ax.set_ylabel("|psi(z)|^2")
        ax.legend(frameon=False)
    fig.tight_layout()

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_path.parent, suffix=".svg")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg")
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)
    return out_path
