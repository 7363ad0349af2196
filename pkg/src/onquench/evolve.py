"""Self-consistent mode-function evolution after the quench.

The mode functions obey  f''_k = -(k^2 + r_eff(t)) f_k  with the effective
mass fed back from the instantaneous mode populations,

    r_eff(t) = r + u/(12 pi^2) * int dk k^2 R(k) |f_k(t)|^2 .

The integrator is classical RK4 on the first-order system (f, f'), with
r_eff re-evaluated from stage-local populations at each of the four stages.
The Wronskian 2 Im[f f'*] = 1 and the energy functional are conserved
diagnostics, not enforced constraints.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, UnstableEvolutionError
from .model import (
    ModelConfig,
    RadialGrid,
    critical_mass,
    radial_grid,
    regulator,
    resolve_post_quench_mass,
)

# |f_k| overflow guard: infrared modes grow algebraically, never this far.
OVERFLOW_GUARD = 1e150
_GUARD_SQ = OVERFLOW_GUARD**2


def physics_hash(cfg: ModelConfig) -> str:
    """Hash of the fields that determine the trajectory.

    Geometry (n_s, n_tot, n_par) and output settings are excluded: the same
    trajectory serves any slab analysis. The quench depth is included, so a
    trajectory can never be reused across delta values.
    """
    key = {
        "r_i": cfg.r_i, "u": cfg.u, "lambda": cfg.lam, "k_max": cfg.k_max,
        "n_k": cfg.n_k, "delta": cfg.delta, "dt": cfg.dt,
    }
    blob = json.dumps(key, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ModeState:
    """Complex mode functions and their time derivatives at one instant."""

    t: float
    f: np.ndarray      # complex128, one entry per radial node
    fdot: np.ndarray   # complex128
    r_eff: float

    def __post_init__(self):
        if self.f.shape != self.fdot.shape or self.f.ndim != 1:
            raise ConfigError("f and fdot must be 1d arrays of equal length")
        self.f.setflags(write=False)
        self.fdot.setflags(write=False)

    @property
    def n_k(self) -> int:
        return self.f.size


def wronskian_residual(state: ModeState) -> float:
    """max_k |2 Im[f_k fdot_k*] - 1|; zero for exact evolution."""
    w = 2.0 * np.imag(state.f * np.conj(state.fdot))
    return float(np.max(np.abs(w - 1.0)))


@dataclass(frozen=True)
class Trajectory:
    """Checkpointed solution of one quench run."""

    checkpoints: tuple[ModeState, ...]
    times: np.ndarray        # dense step times, covers [0, t_end]
    r_eff_series: np.ndarray
    config_hash: str

    def __post_init__(self):
        ts = [s.t for s in self.checkpoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("checkpoint times must increase strictly")
        self.times.setflags(write=False)
        self.r_eff_series.setflags(write=False)

    def state_at(self, t: float) -> ModeState:
        """Checkpoint closest to the requested time."""
        ts = np.array([s.t for s in self.checkpoints])
        return self.checkpoints[int(np.argmin(np.abs(ts - t)))]


class _System:
    """Precomputed arrays binding a config to its grid and post-quench mass."""

    def __init__(self, cfg: ModelConfig, grid: RadialGrid, r: float | None):
        if grid.nodes.size != cfg.n_k or grid.k_max != cfg.k_max:
            raise ConfigError("grid does not match the config")
        if r is None:
            if cfg.u == 0:
                raise ConfigError(
                    "u = 0 leaves the post-quench mass undefined "
                    "(r_c = 0); pass it explicitly via r="
                )
            r = resolve_post_quench_mass(cfg, critical_mass(cfg, grid))
        self.cfg = cfg
        self.grid = grid
        self.r = float(r)
        k = grid.nodes
        self.k2 = np.ascontiguousarray(k * k)
        rk = regulator(k, cfg.lam)
        meas = grid.weights * self.k2 * rk                       # k^2 dk R(k)
        self.w_reff = np.ascontiguousarray(meas * (cfg.u / (12.0 * math.pi**2)))
        self.w_pop = np.ascontiguousarray(meas / (2.0 * math.pi**2))  # -> <|phi|^2>

    def r_eff_of(self, f: np.ndarray) -> float:
        return self.r + float(self.w_reff @ (f.real**2 + f.imag**2))


@numba.njit(cache=True)
def _rk4_chunk(fr, fi, gr, gi, k2, w_reff, r, dt, n_steps, reff_out, off):  # pragma: no cover
    """Advance n_steps RK4 steps in place; returns steps completed.

    Returns early (< n_steps) when a mode population blows through the
    overflow guard. r_eff at the start of each step lands in reff_out.
    """
    n = fr.size
    f2r = np.empty(n); f2i = np.empty(n); g2r = np.empty(n); g2i = np.empty(n)
    f3r = np.empty(n); f3i = np.empty(n); g3r = np.empty(n); g3i = np.empty(n)
    f4r = np.empty(n); f4i = np.empty(n); g4r = np.empty(n); g4i = np.empty(n)
    k1gr = np.empty(n); k1gi = np.empty(n)
    k2gr = np.empty(n); k2gi = np.empty(n)
    k3gr = np.empty(n); k3gi = np.empty(n)
    h = dt; h2 = 0.5 * dt; h6 = dt / 6.0
    acc = 0.0; mx = 0.0
    for i in range(n):
        p = fr[i] * fr[i] + fi[i] * fi[i]
        acc += w_reff[i] * p
        if p > mx:
            mx = p
    for s in range(n_steps):
        if mx > 1e300 or not np.isfinite(acc):
            return s
        r1 = r + acc
        reff_out[off + s] = r1
        acc2 = 0.0
        for i in range(n):
            c = k2[i] + r1
            k1gr[i] = -c * fr[i]; k1gi[i] = -c * fi[i]
            a = fr[i] + h2 * gr[i]; b = fi[i] + h2 * gi[i]
            f2r[i] = a; f2i[i] = b
            g2r[i] = gr[i] + h2 * k1gr[i]; g2i[i] = gi[i] + h2 * k1gi[i]
            acc2 += w_reff[i] * (a * a + b * b)
        r2 = r + acc2
        acc3 = 0.0
        for i in range(n):
            c = k2[i] + r2
            k2gr[i] = -c * f2r[i]; k2gi[i] = -c * f2i[i]
            a = fr[i] + h2 * g2r[i]; b = fi[i] + h2 * g2i[i]
            f3r[i] = a; f3i[i] = b
            g3r[i] = gr[i] + h2 * k2gr[i]; g3i[i] = gi[i] + h2 * k2gi[i]
            acc3 += w_reff[i] * (a * a + b * b)
        r3 = r + acc3
        acc4 = 0.0
        for i in range(n):
            c = k2[i] + r3
            k3gr[i] = -c * f3r[i]; k3gi[i] = -c * f3i[i]
            a = fr[i] + h * g3r[i]; b = fi[i] + h * g3i[i]
            f4r[i] = a; f4i[i] = b
            g4r[i] = gr[i] + h * k3gr[i]; g4i[i] = gi[i] + h * k3gi[i]
            acc4 += w_reff[i] * (a * a + b * b)
        r4 = r + acc4
        acc = 0.0; mx = 0.0
        for i in range(n):
            c = k2[i] + r4
            k4gr = -c * f4r[i]; k4gi = -c * f4i[i]
            fr[i] = fr[i] + h6 * (gr[i] + 2.0 * (g2r[i] + g3r[i]) + g4r[i])
            fi[i] = fi[i] + h6 * (gi[i] + 2.0 * (g2i[i] + g3i[i]) + g4i[i])
            gr[i] = gr[i] + h6 * (k1gr[i] + 2.0 * (k2gr[i] + k3gr[i]) + k4gr)
            gi[i] = gi[i] + h6 * (k1gi[i] + 2.0 * (k2gi[i] + k3gi[i]) + k4gi)
            p = fr[i] * fr[i] + fi[i] * fi[i]
            acc += w_reff[i] * p
            if p > mx:
                mx = p
    return n_steps


def init_modes(cfg: ModelConfig, grid: RadialGrid | None = None,
               r: float | None = None) -> ModeState:
    """Ground state of the u = 0 Hamiltonian with mass r_i.

    f_k(0) = 1/sqrt(2 w_k), fdot_k(0) = -i sqrt(w_k/2), w_k = sqrt(k^2 + r_i);
    the Wronskian condition holds exactly by construction.
    """
    if not (cfg.r_i > 0):
        raise ConfigError("r_i must be > 0: gapless initial state not supported")
    if grid is None:
        grid = radial_grid(cfg)
    sys = _System(cfg, grid, r)
    om0 = np.sqrt(grid.nodes**2 + cfg.r_i)
    f = (1.0 / np.sqrt(2.0 * om0)).astype(np.complex128)
    fdot = (-1j * np.sqrt(om0 / 2.0)).astype(np.complex128)
    return ModeState(t=0.0, f=f, fdot=fdot, r_eff=sys.r_eff_of(f))


def effective_mass(state: ModeState, cfg: ModelConfig, grid: RadialGrid,
                   r: float | None = None) -> float:
    """r + u/(12 pi^2) int k^2 dk R(k) |f_k|^2 for the given state."""
    return _System(cfg, grid, r).r_eff_of(state.f)


def _check_step_size(cfg: ModelConfig, r_eff: float):
    om = math.sqrt(cfg.k_max**2 + max(cfg.r_i, abs(r_eff)))
    if cfg.dt * om > 0.5:
        raise ConfigError(
            f"dt = {cfg.dt:g} too large: dt * max mode frequency = "
            f"{cfg.dt * om:.3g} exceeds the stability bound 0.5"
        )


def step(state: ModeState, cfg: ModelConfig, grid: RadialGrid,
         r: float | None = None) -> ModeState:
    """One RK4 step. Prefer evolve() for whole runs; this exists for
    diagnostics and convergence tests."""
    sys = _System(cfg, grid, r)
    _check_step_size(cfg, state.r_eff)
    fr = state.f.real.copy(); fi = state.f.imag.copy()
    gr = state.fdot.real.copy(); gi = state.fdot.imag.copy()
    buf = np.empty(1)
    done = _rk4_chunk(fr, fi, gr, gi, sys.k2, sys.w_reff, sys.r, cfg.dt, 1, buf, 0)
    if done < 1:
        raise UnstableEvolutionError(state.t)
    f = fr + 1j * fi
    return ModeState(t=state.t + cfg.dt, f=f, fdot=gr + 1j * gi, r_eff=sys.r_eff_of(f))


def evolve(cfg: ModelConfig, checkpoint_times=None, r: float | None = None,
           grid: RadialGrid | None = None) -> Trajectory:
    """Integrate from the free ground state to t_end with checkpoints.

    Checkpoints snap to the nearest integration step; the actual time is
    recorded on the snapshot. The dense r_eff series covers [0, t_end].
    """
    if grid is None:
        grid = radial_grid(cfg)
    if checkpoint_times is None:
        checkpoint_times = cfg.checkpoint_times
    req = [float(t) for t in checkpoint_times]
    if any(b < a for a, b in zip(req, req[1:])):
        raise ConfigError("checkpoint times must be sorted")
    if any(t < 0 or t > cfg.t_end + 1e-12 for t in req):
        raise ConfigError("checkpoint times must lie within [0, t_end]")

    sys = _System(cfg, grid, r)
    state0 = init_modes(cfg, grid, r=sys.r)
    _check_step_size(cfg, state0.r_eff)

    dt = cfg.dt
    n_total = int(round(cfg.t_end / dt))
    snap_steps = sorted({min(n_total, int(round(t / dt))) for t in req})

    fr = state0.f.real.copy(); fi = state0.f.imag.copy()
    gr = state0.fdot.real.copy(); gi = state0.fdot.imag.copy()
    reff = np.empty(n_total + 1)

    def snapshot(step_idx: int) -> ModeState:
        f = fr + 1j * fi
        return ModeState(t=step_idx * dt, f=f, fdot=gr + 1j * gi, r_eff=sys.r_eff_of(f))

    checkpoints = []
    pos = 0
    for target in snap_steps:
        if target > pos:
            done = _rk4_chunk(fr, fi, gr, gi, sys.k2, sys.w_reff, sys.r,
                              dt, target - pos, reff, pos)
            if done < target - pos:
                raise UnstableEvolutionError((pos + done) * dt)
            pos = target
        checkpoints.append(snapshot(pos))
    if pos < n_total:
        done = _rk4_chunk(fr, fi, gr, gi, sys.k2, sys.w_reff, sys.r,
                          dt, n_total - pos, reff, pos)
        if done < n_total - pos:
            raise UnstableEvolutionError((pos + done) * dt)
        pos = n_total
    reff[n_total] = sys.r_eff_of(fr + 1j * fi)

    times = np.arange(n_total + 1) * dt
    return Trajectory(
        checkpoints=tuple(checkpoints),
        times=times,
        r_eff_series=reff,
        config_hash=physics_hash(cfg),
    )


def conserved_energy(state: ModeState, cfg: ModelConfig, grid: RadialGrid,
                     r: float | None = None) -> float:
    """Energy density conserved exactly by the continuum dynamics.

    E = 1/(4 pi^2) int k^2 dk R [|fdot|^2 + k^2 |f|^2] + (r/2) V + (u/24) V^2
    with V = 1/(2 pi^2) int k^2 dk R |f|^2. Substituting the equation of
    motion into dE/dt makes the three terms cancel identically.
    """
    sys = _System(cfg, grid, r)
    pop = state.f.real**2 + state.f.imag**2
    kin = state.fdot.real**2 + state.fdot.imag**2
    v = float(sys.w_pop @ pop)
    quad = 0.5 * float(sys.w_pop @ (kin + sys.k2 * pop))
    return quad + 0.5 * sys.r * v + (cfg.u / 24.0) * v * v


@dataclass(frozen=True)
class MomentumKernels:
    """The three real correlation kernels of a state, tabulated on the
    radial grid: g_pp = |f|^2, g_pq = Re[f fdot*], g_qq = |fdot|^2."""

    k: np.ndarray
    g_pp: np.ndarray
    g_pq: np.ndarray
    g_qq: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for arr in (self.k, self.g_pp, self.g_pq, self.g_qq):
            arr.setflags(write=False)


def momentum_kernels(state: ModeState, grid: RadialGrid) -> MomentumKernels:
    f, fd = state.f, state.fdot
    return MomentumKernels(
        k=grid.nodes,
        g_pp=f.real**2 + f.imag**2,
        g_pq=f.real * fd.real + f.imag * fd.imag,
        g_qq=fd.real**2 + fd.imag**2,
        t=state.t,
    )
