"""Physical parameters, momentum grids, regulator and lattice geometry.

Everything here is exact bookkeeping: the only numerics is the radial
quadrature used for the critical mass. All objects are immutable and all
functions are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError

DIMENSION = 3

# JSON field names, in canonical order. "lambda" is the regulator scale
# (attribute ``lam`` below, since lambda is a keyword).
_JSON_FIELDS = (
    "r_i", "u", "lambda", "k_max", "n_k", "delta", "dt",
    "n_s", "n_tot", "n_par", "t_end", "checkpoint_times",
)


def default_dt(r_i: float, k_max: float) -> float:
    """Time step resolving the fastest initial mode.

    0.025 rad of the fastest phase per step keeps the RK4 Wronskian and
    energy drift below 1e-6 over runs of a few hundred time units.
    """
    return 0.025 / math.sqrt(k_max**2 + r_i)


@dataclass(frozen=True)
class ModelConfig:
    """Physical and numerical parameters of one quench run.

    The post-quench mass is never set directly: it is derived from the
    quench depth ``delta`` via the critical mass.
    """

    r_i: float                      # pre-quench mass, > 0
    u: float                        # coupling, >= 0
    delta: float = 0.0              # quench depth (r - r_c)/|r_c|
    lam: float = math.pi / 2        # Gaussian regulator scale
    k_max: float | None = None      # radial cutoff, default 10*lam
    n_k: int = 100_000              # radial grid points
    dt: float | None = None         # integration step, default from default_dt
    n_s: int = 100                  # slab sites
    n_tot: int = 60_000             # full chain sites
    n_par: int = 100                # transverse momentum samples
    t_end: float = 0.0
    checkpoint_times: tuple[float, ...] = ()
    d: int = DIMENSION

    def __post_init__(self):
        if self.d != DIMENSION:
            raise ConfigError(f"only d = {DIMENSION} is supported, got d = {self.d}")
        if not (self.r_i > 0):
            raise ConfigError("r_i must be > 0 (initial ground state must be gapped)")
        if self.u < 0:
            raise ConfigError("coupling u must be >= 0")
        if not (self.lam > 0):
            raise ConfigError("regulator scale must be > 0")
        if self.k_max is None:
            object.__setattr__(self, "k_max", 10.0 * self.lam)
        if self.k_max < 2.0 * self.lam:
            raise ConfigError(
                f"k_max = {self.k_max:g} < 2*lambda = {2 * self.lam:g}: "
                "regulator tail not decayed at the cutoff"
            )
        if self.n_k < 2:
            raise ConfigError("n_k must be >= 2")
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.r_i, self.k_max))
        if not (self.dt > 0):
            raise ConfigError("dt must be > 0")
        if not (0 < self.n_s < self.n_tot):
            raise ConfigError("need 0 < n_s < n_tot")
        if self.n_par < 1:
            raise ConfigError("n_par must be >= 1")
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        times = tuple(float(t) for t in self.checkpoint_times)
        object.__setattr__(self, "checkpoint_times", times)
        if any(t < 0 or t > self.t_end + 1e-12 for t in times):
            raise ConfigError("checkpoint times must lie within [0, t_end]")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ConfigError("checkpoint times must be sorted")

    def with_updates(self, **kw) -> "ModelConfig":
        return replace(self, **kw)

    def to_json_dict(self) -> dict:
        return {
            "r_i": self.r_i,
            "u": self.u,
            "lambda": self.lam,
            "k_max": self.k_max,
            "n_k": self.n_k,
            "delta": self.delta,
            "dt": self.dt,
            "n_s": self.n_s,
            "n_tot": self.n_tot,
            "n_par": self.n_par,
            "t_end": self.t_end,
            "checkpoint_times": list(self.checkpoint_times),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ModelConfig":
        unknown = set(doc) - set(_JSON_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "r_i" not in doc or "u" not in doc:
            raise ConfigError("config requires at least r_i and u")
        kw = {}
        for name in _JSON_FIELDS:
            if name not in doc or doc[name] is None:
                continue
            attr = "lam" if name == "lambda" else name
            val = doc[name]
            if name in ("n_k", "n_s", "n_tot", "n_par"):
                if val != int(val):
                    raise ConfigError(f"{name} must be an integer, got {val!r}")
                val = int(val)
            elif name == "checkpoint_times":
                val = tuple(float(t) for t in val)
            else:
                val = float(val)
            kw[attr] = val
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_json_dict(doc)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial momentum grid with composite-trapezoid weights."""

    nodes: np.ndarray    # strictly increasing, nodes[0] = 0, nodes[-1] = k_max
    weights: np.ndarray  # positive, sum to k_max

    def __post_init__(self):
        k = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if k.ndim != 1 or k.size < 2 or k.shape != w.shape:
            raise ConfigError("radial grid needs matching 1d nodes and weights")
        if k[0] != 0.0 or np.any(np.diff(k) <= 0):
            raise ConfigError("radial nodes must start at 0 and increase strictly")
        if np.any(w <= 0):
            raise ConfigError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", k)
        object.__setattr__(self, "weights", w)
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def k_max(self) -> float:
        return float(self.nodes[-1])

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid integral of samples over [0, k_max]."""
        return float(self.weights @ values)


def radial_grid(cfg: ModelConfig) -> RadialGrid:
    """Uniform n_k-point grid on [0, k_max]. The k=0 node carries an
    ordinary trapezoid weight; integrands vanish there through their k^2
    measure factor, so no special casing is needed."""
    k = np.linspace(0.0, cfg.k_max, cfg.n_k)
    h = k[1] - k[0]
    w = np.full(cfg.n_k, h)
    w[0] = w[-1] = 0.5 * h
    return RadialGrid(nodes=k, weights=w)


def regulator(k, lam: float):
    """Smooth Gaussian momentum regulator exp(-k^2 / (2 lambda^2))."""
    if lam <= 0:
        raise ConfigError("regulator scale must be > 0")
    return np.exp(-np.square(k) / (2.0 * lam * lam))


def critical_mass(cfg: ModelConfig, grid: RadialGrid | None = None) -> float:
    """Critical post-quench mass r_c.

    The 3d momentum measure cancels the 1/k^2 of the integrand, leaving
    r_c = -(u / 48 pi^2) * int dk R(k) (2 k^2 + r_i) / sqrt(k^2 + r_i),
    which is finite at k = 0. Linear in u and always <= 0.
    """
    if cfg.u < 0:
        raise ConfigError("coupling u must be >= 0")
    if grid is None:
        grid = radial_grid(cfg)
    k = grid.nodes
    integrand = regulator(k, cfg.lam) * (2.0 * k * k + cfg.r_i) / np.sqrt(k * k + cfg.r_i)
    return -(cfg.u / (48.0 * math.pi**2)) * grid.integrate(integrand)


def resolve_post_quench_mass(cfg: ModelConfig, r_c: float) -> float:
    """Post-quench mass r = r_c + delta * |r_c|."""
    if r_c >= 0:
        raise ConfigError(
            "quench depth is normalized by |r_c|; r_c >= 0 is degenerate "
            "(u = 0 has no quench parametrization)"
        )
    return r_c + cfg.delta * abs(r_c)


@dataclass(frozen=True)
class SlabGeometry:
    """Slab bipartition of the discretized chain.

    The lattice spacing is fixed by the radial cutoff, a = sqrt(3) pi / k_max,
    so that |k_z| <= pi/a = k_max/sqrt(3) and transverse momenta up to
    q_max = sqrt(2/3) k_max keep the total momentum inside the radial grid.
    """

    a: float
    n_s: int
    n_tot: int
    n_par: int
    q_max: float
    q_samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.q_samples.setflags(write=False)

    @property
    def length(self) -> float:
        """Slab width L = n_s * a."""
        return self.n_s * self.a

    @property
    def total_length(self) -> float:
        return self.n_tot * self.a

    def kz_grid(self) -> np.ndarray:
        """Half-open longitudinal momentum grid, n_tot points in [-pi/a, pi/a)."""
        j = np.arange(self.n_tot)
        return -math.pi / self.a + j * (2.0 * math.pi / (self.n_tot * self.a))


def build_slab_geometry(
    cfg: ModelConfig,
    n_s: int | None = None,
    n_tot: int | None = None,
    n_par: int | None = None,
) -> SlabGeometry:
    n_s = cfg.n_s if n_s is None else int(n_s)
    n_tot = cfg.n_tot if n_tot is None else int(n_tot)
    n_par = cfg.n_par if n_par is None else int(n_par)
    if not (0 < n_s < n_tot):
        raise ConfigError(f"need 0 < n_s < n_tot, got n_s = {n_s}, n_tot = {n_tot}")
    if n_par < 1:
        raise ConfigError("n_par must be >= 1")
    a = math.sqrt(3.0) * math.pi / cfg.k_max
    q_max = math.sqrt(2.0 / 3.0) * cfg.k_max
    if n_par == 1:
        q = np.zeros(1)
    else:
        q = np.linspace(0.0, q_max, n_par)
    # |k| = sqrt(kz^2 + q^2) <= k_max for every sampled pair, by construction
    assert math.hypot(math.pi / a, q_max) <= cfg.k_max * (1 + 1e-12)
    return SlabGeometry(a=a, n_s=n_s, n_tot=n_tot, n_par=n_par, q_max=q_max, q_samples=q)
