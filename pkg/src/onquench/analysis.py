"""Scaling fits, data collapse and eigenmode-front extraction.

Every fitter recovers exact synthetic data of its own model family; the
physics enters only through which windows the pipeline feeds in. Residuals
are normalized RMS values in the space the fit is linear in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericsError
from .symplectic import ModeProfile

FIT_KINDS = ("power_law", "shifted_power", "log_growth", "collapse")

# Shared fit-window defaults. The low edge of the dispersion window excludes
# both the few lowest discrete momenta (finite N_tot) and momenta still
# outside the light cone (q t < 2) at the fit time.
DISPERSION_Q_MAX = 0.1
DISPERSION_SKIP_MODES = 5
COLLAPSE_GRID_POINTS = 64
SATURATION_TAIL_FRACTION = 0.2


@dataclass(frozen=True)
class FitReport:
    kind: str
    exponent: float
    prefactor: float
    offset: float
    residual: float
    window: tuple[float, float]
    n_points: int

    def __post_init__(self):
        if self.kind not in FIT_KINDS:
            raise ConfigError(f"unknown fit kind {self.kind!r}")
        if self.residual < 0:
            raise ConfigError("residual must be >= 0")
        if not (self.window[0] < self.window[1]):
            raise ConfigError("fit window must have lo < hi")
        if self.n_points < 4:
            raise ConfigError("fits need at least 4 points")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind, "exponent": self.exponent,
            "prefactor": self.prefactor, "offset": self.offset,
            "residual": self.residual, "window": list(self.window),
            "n_points": self.n_points,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


@dataclass(frozen=True)
class GapSeries:
    """Inverse entanglement gap 1/omega^{j=0}_{q_par=0}(t) for one slab width."""

    length: float
    times: np.ndarray
    inv_gap: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, float)
        y = np.asarray(self.inv_gap, float)
        if t.shape != y.shape or t.ndim != 1:
            raise ConfigError("times and inv_gap must be matching 1d arrays")
        if np.any(y <= 0):
            raise ConfigError("inv_gap must be positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "inv_gap", y)
        self.times.setflags(write=False)
        self.inv_gap.setflags(write=False)


def _normalized_rms(residuals: np.ndarray, reference: np.ndarray) -> float:
    scale = max(float(np.std(reference)), float(np.mean(np.abs(reference))), 1e-300)
    return float(np.sqrt(np.mean(residuals**2)) / scale)


def golden_section(fn, lo: float, hi: float, tol: float, coarse: int = 0):
    """Minimize a unimodal scalar function; optional coarse bracketing scan."""
    if not (lo < hi):
        raise ConfigError("need lo < hi")
    if coarse > 2:
        xs = np.linspace(lo, hi, coarse)
        vals = [fn(x) for x in xs]
        i = int(np.argmin(vals))
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, coarse - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def fit_power_law(xs, ys, window: tuple[float, float]) -> FitReport:
    """Least-squares line in (ln x, ln y) over the window."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    lo, hi = window
    sel = (xs >= lo) & (xs <= hi)
    if np.count_nonzero(sel) < 4:
        raise ConfigError(f"fewer than 4 points inside window [{lo:g}, {hi:g}]")
    x, y = xs[sel], ys[sel]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ConfigError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return FitReport(
        kind="power_law", exponent=float(slope),
        prefactor=float(np.exp(intercept)), offset=0.0,
        residual=_normalized_rms(resid, ly),
        window=(float(lo), float(hi)), n_points=int(x.size),
    )


def fixed_exponent_prefactor(xs, ys, exponent: float, window: tuple[float, float]) -> float:
    """Prefactor of y = A x^exponent with the exponent held fixed."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    sel = (xs >= window[0]) & (xs <= window[1])
    if np.count_nonzero(sel) < 1:
        raise ConfigError("empty prefactor window")
    x, y = xs[sel], ys[sel]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ConfigError("prefactor extraction needs positive data")
    return float(np.exp(np.mean(np.log(y) - exponent * np.log(x))))


def prefactor_scan(delta_list, dispersion_provider,
                   exponent: float = 0.5,
                   window: tuple[float, float] | None = None) -> FitReport:
    """Dispersion prefactor versus quench depth.

    For each delta the provider returns (q, omega0) arrays; the prefactor
    omega0/q^exponent is extracted at fixed exponent, then fitted as
    A |delta|^(-gamma). The report carries gamma as a positive exponent.
    """
    deltas = [float(d) for d in delta_list]
    if any(d >= 0 for d in deltas):
        raise ConfigError("prefactor scan needs quenches below the critical point")
    if len(deltas) < 4:
        raise ConfigError("prefactor scan needs at least 4 quench depths")
    prefs = []
    for d in deltas:
        q, om = dispersion_provider(d)
        w = window if window is not None else (float(np.min(q)), float(np.max(q)))
        prefs.append(fixed_exponent_prefactor(q, om, exponent, w))
    mags = np.abs(deltas)
    rep = fit_power_law(mags, prefs, (float(mags.min()) * 0.999, float(mags.max()) * 1.001))
    return FitReport(
        kind="power_law", exponent=-rep.exponent, prefactor=rep.prefactor,
        offset=0.0, residual=rep.residual, window=rep.window, n_points=rep.n_points,
    )


def _loglog_interp(x, y, x_grid):
    return np.interp(np.log(x_grid), np.log(x), np.log(y))


def collapse_fit(series: list[GapSeries], alpha_range: tuple[float, float],
                 n_grid: int = COLLAPSE_GRID_POINTS) -> FitReport:
    """Exponent alpha minimizing the spread of inv_gap/L^(2 alpha) vs t/L.

    Curves are interpolated piecewise linearly in log-log space onto a
    common logarithmic grid; the objective is the RMS over the grid of the
    across-curve standard deviation of ln y (invariant under a uniform
    rescaling of all inv_gap values). Golden-section search to 1e-3.
    """
    if len(series) < 3 or len({s.length for s in series}) < 3:
        raise ConfigError("collapse needs at least 3 distinct slab widths")
    xs = [s.times / s.length for s in series]
    lo = max(float(x.min()) for x in xs)
    hi = min(float(x.max()) for x in xs)
    if not (lo < hi):
        raise ConfigError("rescaled time windows do not overlap")
    grid = np.geomspace(lo, hi, n_grid)

    def spread(alpha: float) -> float:
        ly = np.stack([
            _loglog_interp(x, s.inv_gap / s.length**(2.0 * alpha), grid)
            for x, s in zip(xs, series)
        ])
        return float(np.sqrt(np.mean(np.var(ly, axis=0))))

    alpha, best = golden_section(spread, alpha_range[0], alpha_range[1],
                                 tol=1e-3, coarse=33)
    return FitReport(
        kind="collapse", exponent=float(alpha), prefactor=0.0, offset=0.0,
        residual=best, window=(lo, hi), n_points=n_grid,
    )


def fit_shifted_power(ts, ys, t_min: float) -> FitReport:
    """Fit y = A (t - a)^b for t > t_min by nested search over the offset a."""
    ts = np.asarray(ts, float)
    ys = np.asarray(ys, float)
    sel = ts > t_min
    if np.count_nonzero(sel) < 4:
        raise ConfigError("fewer than 4 points beyond t_min")
    t, y = ts[sel], ys[sel]
    if np.any(y <= 0):
        raise ConfigError("shifted-power fit needs positive data")
    t0 = float(t.min())
    span = float(t.max()) - t0
    a_lo = t0 - 10.0 * span
    a_hi = t0 - 1e-9 * span

    def resid(a: float) -> float:
        lt = np.log(t - a)
        slope, intercept = np.polyfit(lt, np.log(y), 1)
        return float(np.sqrt(np.mean((np.log(y) - slope * lt - intercept) ** 2)))

    a_fit, _ = golden_section(resid, a_lo, a_hi, tol=1e-7 * span, coarse=64)
    if a_fit <= a_lo + 1e-6 * span:
        raise NumericsError("shifted-power offset search did not converge")
    lt = np.log(t - a_fit)
    ly = np.log(y)
    slope, intercept = np.polyfit(lt, ly, 1)
    return FitReport(
        kind="shifted_power", exponent=float(slope),
        prefactor=float(np.exp(intercept)), offset=float(a_fit),
        residual=_normalized_rms(ly - slope * lt - intercept, ly),
        window=(float(t.min()), float(t.max())), n_points=int(t.size),
    )


def fit_log_growth(ts, values, t_min: float) -> FitReport:
    """Linear regression of values against ln t for t > t_min; the exponent
    field carries the slope (compare with the dynamical exponent alpha)."""
    ts = np.asarray(ts, float)
    values = np.asarray(values, float)
    sel = ts > t_min
    if np.count_nonzero(sel) < 4:
        raise ConfigError("fewer than 4 points beyond t_min")
    t, v = ts[sel], values[sel]
    lt = np.log(t)
    slope, intercept = np.polyfit(lt, v, 1)
    return FitReport(
        kind="log_growth", exponent=float(slope), prefactor=float(intercept),
        offset=0.0, residual=_normalized_rms(v - slope * lt - intercept, v),
        window=(float(t.min()), float(t.max())), n_points=int(t.size),
    )


def front_position(profile: ModeProfile, threshold: float) -> tuple[float, float]:
    """Front depth from each slab boundary, in (fractional) site units.

    Position where the cumulative density from that boundary first exceeds
    threshold * (half the total weight), linearly interpolated between
    sites. Boundary-concentrated profiles return the boundary sites.
    """
    if not (0.0 < threshold < 1.0):
        raise ConfigError("threshold must be in (0, 1)")
    d = profile.density
    target = threshold * 0.5 * float(d.sum())

    def crossing(dens: np.ndarray) -> float:
        cum = np.cumsum(dens)
        idx = int(np.searchsorted(cum, target))
        if idx >= dens.size:
            return float(dens.size - 1)
        if idx == 0:
            return 0.0
        below = cum[idx - 1]
        frac = (target - below) / max(cum[idx] - below, 1e-300)
        return float(idx - 1 + frac)

    z_left = crossing(d)
    z_right = (d.size - 1) - crossing(d[::-1])
    return z_left, z_right


def front_speed_fit(times, positions):
    """Linear fit position = speed * t + z0; returns (speed, z0, residual)."""
    t = np.asarray(times, float)
    z = np.asarray(positions, float)
    if t.size != z.size or t.size < 2:
        raise ConfigError("need matching arrays with at least 2 snapshots")
    speed, z0 = np.polyfit(t, z, 1)
    resid = _normalized_rms(z - (speed * t + z0), z)
    return float(speed), float(z0), resid


def degeneracy_splitting(omega0, omega1, times) -> np.ndarray:
    """Relative splitting |omega1 - omega0| / max(omega0, tiny) per time."""
    w0 = np.asarray(omega0, float)
    w1 = np.asarray(omega1, float)
    t = np.asarray(times, float)
    if not (w0.shape == w1.shape == t.shape):
        raise ConfigError("omega0, omega1 and times must have equal lengths")
    return np.abs(w1 - w0) / np.maximum(w0, 1e-300)


def saturation_slope(times, values, tail_fraction: float = SATURATION_TAIL_FRACTION) -> float:
    """Late-time slope per unit time, estimated over the final fraction of
    the window (fixed here so saturation checks are deterministic)."""
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    t_cut = t[-1] - tail_fraction * (t[-1] - t[0])
    sel = t >= t_cut
    if np.count_nonzero(sel) < 2:
        raise ConfigError("saturation window too small")
    slope, _ = np.polyfit(t[sel], v[sel], 1)
    return float(slope)
