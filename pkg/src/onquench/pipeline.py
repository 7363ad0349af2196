"""End-to-end experiments: evolve -> correlate -> diagonalize -> entropy -> fit.

Each experiment kind reproduces one family of observables (effective-mass
decay, dispersion scaling, gap collapse, entropy scans, eigenmode fronts,
quench-depth scans). Trajectories are the expensive stage and are cached on
disk keyed by the physics hash; reuse across quench depths is impossible by
construction, reuse across slab widths and momentum grids is free.

All writes are atomic (temp file + rename) and the manifest is written only
after every table it references, so an interrupted run never leaves a
manifest pointing at missing files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .analysis import (
    FitReport,
    GapSeries,
    collapse_fit,
    degeneracy_splitting,
    fit_log_growth,
    fit_power_law,
    fit_shifted_power,
    fixed_exponent_prefactor,
    front_position,
    front_speed_fit,
    prefactor_scan,
)
from .correlators import mixed_correlation_matrix
from .entropy import slab_entropy
from .errors import ConfigError
from .evolve import (
    ModeState,
    Trajectory,
    evolve,
    momentum_kernels,
    physics_hash,
)
from .model import ModelConfig, SlabGeometry, build_slab_geometry, critical_mass, radial_grid, resolve_post_quench_mass
from .storage import (
    atomic_write_text,
    read_checkpoint,
    write_checkpoint,
    write_csv,
)
from .symplectic import entanglement_block

OUT_ENV = "ONQUENCH_OUT"
PLAN_KINDS = ("rc", "evolve", "dispersion", "gap", "entropy_scan", "modes", "delta_scan")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "onquench_out"))


def config_hash(cfg: ModelConfig) -> str:
    blob = json.dumps(cfg.to_json_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentPlan:
    """One figure-shaped experiment. Unset parameters fall back to
    kind-specific defaults derived from the config."""

    kind: str
    config: ModelConfig
    deltas: tuple[float, ...] = ()
    ns_list: tuple[int, ...] = ()
    times: tuple[float, ...] = ()
    fit_time: float | None = None
    q_lo: float | None = None    # default: light-cone floor max(5 dq, 2/t)
    q_hi: float | None = None    # default: 10/t, the top of the scaling window
    q_points: int = 14
    n_profiles: int = 2
    front_threshold: float = 0.9999  # tracks the support edge of the profile

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind == "delta_scan" and len(self.deltas) == 0:
            object.__setattr__(self, "deltas", (-0.5, -1.0, -2.0, -4.0))
        if not (0.0 < self.front_threshold < 1.0):
            raise ConfigError("front threshold must be in (0, 1)")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config.to_json_dict(),
            "deltas": list(self.deltas),
            "ns_list": list(self.ns_list),
            "times": list(self.times),
            "fit_time": self.fit_time,
            "q_lo": self.q_lo,
            "q_hi": self.q_hi,
            "q_points": self.q_points,
            "n_profiles": self.n_profiles,
            "front_threshold": self.front_threshold,
        }


@dataclass
class RunManifest:
    config: dict
    plan: dict
    created_at: str
    content_hash: str
    artifacts: dict = field(default_factory=dict)   # name -> path (relative)
    hashes: dict = field(default_factory=dict)      # path -> sha256

    def to_json(self) -> str:
        return json.dumps({
            "config": self.config, "plan": self.plan,
            "created_at": self.created_at, "content_hash": self.content_hash,
            "artifacts": self.artifacts, "hashes": self.hashes,
        }, indent=2)


def load_manifest(path: Path) -> RunManifest:
    doc = json.loads(Path(path).read_text())
    man = RunManifest(config=doc["config"], plan=doc["plan"],
                      created_at=doc["created_at"], content_hash=doc["content_hash"],
                      artifacts=doc["artifacts"], hashes=doc["hashes"])
    base = Path(path).parent
    for rel, digest in man.hashes.items():
        p = base / rel
        if not p.exists():
            raise ConfigError(f"manifest references missing file {rel}")
        if hashlib.sha256(p.read_bytes()).hexdigest() != digest:
            raise ConfigError(f"manifest hash mismatch for {rel}")
    return man


# ---------------------------------------------------------------------------
# trajectory cache


def _trajectory_key(cfg: ModelConfig, times: tuple[float, ...]) -> str:
    blob = json.dumps({
        "physics": physics_hash(cfg),
        "t_end": cfg.t_end,
        "times": [repr(float(t)) for t in times],
    }, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def get_trajectory(cfg: ModelConfig, times, cache_dir: Path | None = None,
                   r: float | None = None) -> Trajectory:
    """Evolve (or reload) the trajectory with checkpoints at the given times."""
    times = tuple(sorted(float(t) for t in times))
    if cache_dir is None:
        return evolve(cfg, times, r=r)
    cache_dir = Path(cache_dir)
    key = _trajectory_key(cfg, times)
    entry = cache_dir / f"traj_{key}"
    meta_path = entry / "meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        states = [read_checkpoint(entry / name) for name in meta["checkpoints"]]
        series = np.load(entry / "reff.npy")
        dense_t = np.arange(series.size) * meta["dt"]
        return Trajectory(checkpoints=tuple(states), times=dense_t,
                          r_eff_series=series, config_hash=meta["physics_hash"])
    traj = evolve(cfg, times, r=r)
    entry.mkdir(parents=True, exist_ok=True)
    names = []
    for i, state in enumerate(traj.checkpoints):
        name = f"ckpt_{i:04d}.onq"
        write_checkpoint(entry / name, state, cfg)
        names.append(name)
    np.save(entry / "reff.npy", traj.r_eff_series)
    meta = {"physics_hash": traj.config_hash, "dt": cfg.dt,
            "t_end": cfg.t_end, "times": list(times), "checkpoints": names}
    atomic_write_text(meta_path, json.dumps(meta, indent=2))  # written last
    return traj


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# experiment stages


def default_q_grid(cfg: ModelConfig, geom: SlabGeometry, t: float,
                   q_lo: float | None, q_hi: float | None, q_points: int) -> np.ndarray:
    """Dispersion-fit momenta, log spaced across the scaling window.

    The asymptotic infrared dispersion occupies q t in roughly [2, 10]: below
    that the finite-time gap flattens the curve, above it the quench
    transient steepens it. The lower edge also stays clear of the few lowest
    discrete momenta, 5 * 2 pi/(N_tot a).
    """
    floor = 5.0 * 2.0 * math.pi / (geom.n_tot * geom.a)
    lo = max(floor, 2.0 / t) if q_lo is None else q_lo
    hi = 10.0 / t if q_hi is None else q_hi
    if not (0 < lo < hi):
        raise ConfigError(f"invalid dispersion window [{lo:g}, {hi:g}]")
    return np.geomspace(lo, hi, q_points)


def dispersion_curve(state: ModeState, cfg: ModelConfig, geom: SlabGeometry,
                     qs, grid=None, threads: int = 1):
    """omega^{j=0}(q_par) plus the full per-block spectra."""
    grid = radial_grid(cfg) if grid is None else grid
    kern = momentum_kernels(state, grid)

    def one(q):
        corr = mixed_correlation_matrix(kern, geom, float(q))
        return entanglement_block(corr)

    blocks = _pmap(one, list(qs), threads)
    omega0 = np.array([b.omegas[0] for b in blocks])
    return omega0, blocks


def gap_series_for(traj: Trajectory, cfg: ModelConfig, geom: SlabGeometry,
                   n_s: int, times, grid=None, threads: int = 1) -> GapSeries:
    """Inverse entanglement gap at q_par = 0 for one slab width."""
    grid = radial_grid(cfg) if grid is None else grid
    states = [traj.state_at(t) for t in times]

    def one(state):
        kern = momentum_kernels(state, grid)
        corr = mixed_correlation_matrix(kern, geom, 0.0, n_s=n_s)
        return entanglement_block(corr).gap()

    gaps = _pmap(one, states, threads)
    ts, inv = [], []
    for state, gap in zip(states, gaps):
        if math.isfinite(gap) and gap > 0:
            ts.append(state.t)
            inv.append(1.0 / gap)
    return GapSeries(length=n_s * geom.a, times=np.array(ts), inv_gap=np.array(inv))


class _Artifacts:
    """Collects written tables so the manifest can reference and hash them."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.paths: dict[str, str] = {}

    def csv(self, name: str, columns, rows, comment=None) -> Path:
        path = self.out_dir / f"{name}.csv"
        write_csv(path, columns, rows, comment)
        self.paths[name] = path.name
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.out_dir / f"{name}.json"
        atomic_write_text(path, json.dumps(payload, indent=2))
        self.paths[name] = path.name
        return path


def _decimated(times: np.ndarray, values: np.ndarray, max_rows: int = 20000):
    stride = max(1, times.size // max_rows)
    idx = np.arange(0, times.size, stride)
    if idx[-1] != times.size - 1:
        idx = np.append(idx, times.size - 1)
    return zip(times[idx], values[idx])


def run(plan: ExperimentPlan, out_dir: Path | None = None,
        cache_dir: Path | None = None, threads: int = 1) -> RunManifest:
    """Execute a plan, writing tables plus a manifest under out_dir/<kind>."""
    cfg = plan.config
    out_root = default_out_root() if out_dir is None else Path(out_dir)
    out = out_root / plan.kind
    out.mkdir(parents=True, exist_ok=True)
    cache = out_root / "cache" if cache_dir is None else Path(cache_dir)
    art = _Artifacts(out)

    if plan.kind == "rc":
        _run_rc(plan, cfg, art)
    elif plan.kind == "evolve":
        _run_evolve(plan, cfg, art, cache)
    elif plan.kind == "dispersion":
        _run_dispersion(plan, cfg, art, cache, threads)
    elif plan.kind == "gap":
        _run_gap(plan, cfg, art, cache, threads)
    elif plan.kind == "entropy_scan":
        _run_entropy(plan, cfg, art, cache, threads)
    elif plan.kind == "modes":
        _run_modes(plan, cfg, art, cache, threads)
    elif plan.kind == "delta_scan":
        _run_delta_scan(plan, cfg, art, cache, threads)

    manifest = RunManifest(
        config=cfg.to_json_dict(),
        plan=plan.to_json_dict(),
        created_at=datetime.now(timezone.utc).isoformat(),
        content_hash=config_hash(cfg),
        artifacts=dict(sorted(art.paths.items())),
    )
    for rel in manifest.artifacts.values():
        manifest.hashes[rel] = hashlib.sha256((out / rel).read_bytes()).hexdigest()
    atomic_write_text(out / "manifest.json", manifest.to_json())
    return manifest


def _run_rc(plan, cfg, art):
    grid = radial_grid(cfg)
    r_c = critical_mass(cfg, grid)
    payload = {"r_c": r_c, "delta": cfg.delta}
    line = f"r_c = {r_c:.6g}"
    if r_c < 0:
        payload["r"] = resolve_post_quench_mass(cfg, r_c)
        line += f"   r = {payload['r']:.6g}   (delta = {cfg.delta:g})"
    art.json("rc", payload)
    print(line)
    return payload


def _require_times(plan, cfg):
    times = plan.times or cfg.checkpoint_times
    if not times:
        raise ConfigError(f"experiment kind {plan.kind!r} needs checkpoint times")
    return tuple(float(t) for t in times)


def _run_evolve(plan, cfg, art, cache):
    times = plan.times or cfg.checkpoint_times or (cfg.t_end,)
    traj = get_trajectory(cfg, times, cache)
    art.csv("reff", ["t", "r_eff"], _decimated(traj.times, traj.r_eff_series))
    art.json("trajectory", {
        "physics_hash": traj.config_hash,
        "checkpoints": [s.t for s in traj.checkpoints],
        "wronskian_tail": float(np.max(np.abs(
            2 * np.imag(traj.checkpoints[-1].f * np.conj(traj.checkpoints[-1].fdot)) - 1))),
    })
    return traj


def _run_dispersion(plan, cfg, art, cache, threads):
    t_snap = plan.fit_time if plan.fit_time is not None else cfg.t_end
    geom = build_slab_geometry(cfg)
    traj = get_trajectory(cfg, (t_snap,), cache)
    state = traj.state_at(t_snap)
    qs = default_q_grid(cfg, geom, state.t, plan.q_lo, plan.q_hi, plan.q_points)
    omega0, blocks = dispersion_curve(state, cfg, geom, qs, threads=threads)
    art.csv("dispersion", ["q_par", "omega0"], zip(qs, omega0),
            comment=f"t = {state.t!r}")
    rows = []
    for q, blk in zip(qs, blocks):
        for j in range(blk.n_modes):
            rows.append((q, j, blk.lambdas[j], blk.omegas[j], blk.occupations[j]))
    art.csv("spectrum", ["q_par", "j", "lambda", "omega", "n"], rows,
            comment=f"t = {state.t!r}")
    fit = fit_power_law(qs, omega0, (float(qs[0]), float(qs[-1])))
    art.json("dispersion_fit", fit.to_json_dict())
    return fit


def _run_gap(plan, cfg, art, cache, threads):
    times = _require_times(plan, cfg)
    ns_list = plan.ns_list or (25, 50, 100)
    geom_full = build_slab_geometry(cfg, n_s=max(ns_list))
    traj = get_trajectory(cfg, times, cache)
    grid = radial_grid(cfg)
    rows = []
    series = []
    for n_s in ns_list:
        s = gap_series_for(traj, cfg, geom_full, n_s, times, grid, threads)
        series.append(s)
        rows.extend((s.length, t, y) for t, y in zip(s.times, s.inv_gap))
    art.csv("gap_series", ["L", "t", "inv_gap"], rows)
    # collapse on the branch inside the light cone, t >= L/(2c), where the
    # asymptotic part of the scaling function applies
    inside = []
    for s in series:
        sel = s.times >= s.length / 2.0
        if np.count_nonzero(sel) < 4:
            raise ConfigError(f"L = {s.length:g}: too few gap samples past L/(2c)")
        inside.append(GapSeries(length=s.length, times=s.times[sel],
                                inv_gap=s.inv_gap[sel]))
    collapse = collapse_fit(inside, (0.05, 0.95))
    art.json("collapse_fit", collapse.to_json_dict())
    per_l = []
    for s in series:
        try:
            rep = fit_shifted_power(s.times, s.inv_gap, t_min=s.length / 2.0)
        except ConfigError as exc:
            raise ConfigError(
                f"shifted-power fit for L = {s.length:g} (t_min = L/2): {exc}"
            ) from exc
        per_l.append({"L": s.length, **rep.to_json_dict()})
    b_values = sorted(r["exponent"] for r in per_l)
    headline = b_values[len(b_values) // 2]
    art.json("shifted_power_fit", {"per_L": per_l, "b_fit": headline})
    return collapse, per_l


def _run_entropy(plan, cfg, art, cache, threads):
    times = _require_times(plan, cfg)
    ns_list = plan.ns_list or (cfg.n_s,)
    geom = build_slab_geometry(cfg, n_s=max(ns_list))
    traj = get_trajectory(cfg, times, cache)
    grid = radial_grid(cfg)
    rows = []
    wide = {n_s: [] for n_s in ns_list}
    for t in times:
        state = traj.state_at(t)
        kern = momentum_kernels(state, grid)

        def one(n_s):
            return slab_entropy(kern, geom, n_s=n_s)

        recs = _pmap(one, list(ns_list), threads)
        for n_s, rec in zip(ns_list, recs):
            rows.append((rec.t, rec.length, rec.s_per_area, rec.s_zero_mode))
            wide[n_s].append((rec.t, rec))
    art.csv("entropy", ["t", "L", "S_per_area", "S_zero_mode"], rows)
    for n_s in ns_list:
        recs = wide[n_s]
        qcols = [f"S_q{q!r}" for q in recs[0][1].q_samples]
        art.csv(f"entropy_q_ns{n_s}",
                ["t", "L", "S_per_area", "S_zero_mode"] + qcols,
                [(t, r.length, r.s_per_area, r.s_zero_mode, *r.s_blocks)
                 for t, r in recs])
    return rows


def _run_modes(plan, cfg, art, cache, threads):
    times = _require_times(plan, cfg)
    n_s = plan.ns_list[0] if plan.ns_list else cfg.n_s
    geom = build_slab_geometry(cfg, n_s=n_s)
    traj = get_trajectory(cfg, times, cache)
    grid = radial_grid(cfg)

    def one(t):
        state = traj.state_at(t)
        kern = momentum_kernels(state, grid)
        corr = mixed_correlation_matrix(kern, geom, 0.0)
        return state.t, entanglement_block(corr, n_profiles=max(2, plan.n_profiles))

    results = _pmap(one, list(times), threads)
    spec_rows, front_rows = [], []
    for t_req, (t, blk) in zip(times, results):
        w0, w1 = blk.omegas[0], blk.omegas[1]
        split = degeneracy_splitting([w0], [w1], [t])[0]
        spec_rows.append((t, w0, w1, split))
        zl, zr = front_position(blk.profiles[0], plan.front_threshold)
        front_rows.append((t, zl * geom.a, zr * geom.a))
        prof_cols = ["z_index"] + [f"density_j{j}" for j in range(len(blk.profiles))]
        # file named by the requested time (predictable); the actual snapped
        # checkpoint time is recorded in the header
        art.csv(f"profile_t{t_req:g}", prof_cols,
                zip(range(n_s), *[p.density for p in blk.profiles]),
                comment=f"q_par = 0.0, t = {t!r}")
    art.csv("mode_spectrum", ["t", "omega0", "omega1", "splitting"], spec_rows)
    art.csv("fronts", ["t", "z_left", "z_right"], front_rows)

    length = n_s * geom.a
    early = [(t, zl) for t, zl, zr in front_rows if t <= length / 4.0]
    payload = {}
    if len(early) >= 2:
        ts = [t for t, _ in early]
        zs = [z for _, z in early]
        speed, z0, resid = front_speed_fit(ts, zs)
        payload.update(front_speed=speed, intercept=z0, residual=resid)
    t_meet = _front_meeting_time(front_rows, length)
    if t_meet is not None:
        payload["t_meet"] = t_meet
    payload["L"] = length
    art.json("front_fit", payload)
    return payload


def _front_meeting_time(front_rows, length: float, frac: float = 0.05):
    """Interpolated time at which the two fronts close to within frac * L.

    After meeting, the cumulative positions approach the slab center from
    opposite sides without crossing, so the meeting is detected from the
    closing of the gap between them.
    """
    target = frac * length
    prev = None
    for t, zl, zr in front_rows:
        gap = zr - zl
        if prev is not None and prev[1] > target >= gap:
            t0, g0 = prev
            return t0 + (g0 - target) * (t - t0) / (g0 - gap)
        prev = (t, gap)
    return None


def _run_delta_scan(plan, cfg, art, cache, threads):
    t_snap = plan.fit_time if plan.fit_time is not None else cfg.t_end
    geom = build_slab_geometry(cfg)

    curves = {}

    def provider(delta: float):
        sub = cfg.with_updates(delta=float(delta))
        traj = get_trajectory(sub, (t_snap,), cache)
        state = traj.state_at(t_snap)
        qs = default_q_grid(sub, geom, state.t, plan.q_lo, plan.q_hi, plan.q_points)
        omega0, _ = dispersion_curve(state, sub, geom, qs, threads=threads)
        curves[float(delta)] = (qs, omega0)
        return qs, omega0

    gamma = prefactor_scan(plan.deltas, provider)
    pref_rows = []
    for d in plan.deltas:
        qs, om = curves[float(d)]
        pref = fixed_exponent_prefactor(qs, om, 0.5, (float(qs[0]), float(qs[-1])))
        pref_rows.append((d, pref))
    art.csv("prefactors", ["delta", "prefactor"], pref_rows)
    art.json("gamma_fit", gamma.to_json_dict())
    return gamma
