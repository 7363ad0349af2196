"""Momentum-space two-point functions and the mixed-representation
correlation matrix of one transverse-momentum block.

For a slab bipartition the correlation matrix is block diagonal in the
transverse momentum q_par. Each block is built by Fourier transforming the
three momentum kernels over the discrete longitudinal grid

    G(d a) = (1/N_tot) sum_j cos(k_z^j d a) g(sqrt(k_z^j^2 + q_par^2)),

with k_z^j = -pi/a + j * 2 pi/(N_tot a), j = 0 .. N_tot-1 (half-open DFT
convention). The kernels are linearly interpolated from the radial grid;
interpolating the real kernels rather than complex f keeps every 2x2
momentum kernel a convex combination of valid covariances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import ConfigError, NumericsError
from .evolve import ModeState, MomentumKernels, momentum_kernels
from .model import RadialGrid, SlabGeometry

# interpolation queries may exceed k_max by pure roundoff
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class MomentumCorrelators:
    """(G_phiphi, G_phipi, G_pipi) at a single momentum and time."""

    g_pp: float
    g_pq: float
    g_qq: float

    def uncertainty(self) -> float:
        """g_pp g_qq - g_pq^2; equals 1/4 for pure-state evolution."""
        return self.g_pp * self.g_qq - self.g_pq**2


def _interp_kernels(kern: MomentumKernels, k):
    k = np.asarray(k, dtype=float)
    k_max = kern.k[-1]
    if np.any(k < 0):
        raise ConfigError("momentum must be >= 0")
    if np.any(k > k_max * (1.0 + _EDGE_TOL)):
        raise ConfigError(
            f"momentum {float(np.max(k)):g} outside the radial grid "
            f"(k_max = {k_max:g})"
        )
    k = np.minimum(k, k_max)
    return (
        np.interp(k, kern.k, kern.g_pp),
        np.interp(k, kern.k, kern.g_pq),
        np.interp(k, kern.k, kern.g_qq),
    )


def correlators_at(state: ModeState, k: float, grid: RadialGrid) -> MomentumCorrelators:
    """Momentum correlators at |k|, interpolated from the radial grid."""
    kern = momentum_kernels(state, grid)
    pp, pq, qq = _interp_kernels(kern, k)
    return MomentumCorrelators(g_pp=float(pp), g_pq=float(pq), g_qq=float(qq))


@dataclass(frozen=True)
class CorrelationMatrix:
    """One 2 N_s x 2 N_s transverse-momentum block.

    The blocks are symmetric Toeplitz, so only the first columns are stored;
    ``matrix()`` assembles (and positivity-repairs) the dense form.
    """

    q_par: float
    t: float
    a: float
    c_pp: np.ndarray   # first Toeplitz column, phi-phi
    c_pq: np.ndarray
    c_qq: np.ndarray

    def __post_init__(self):
        for arr in (self.c_pp, self.c_pq, self.c_qq):
            arr.setflags(write=False)

    @property
    def n_s(self) -> int:
        return self.c_pp.size

    def block(self, which: str) -> np.ndarray:
        col = {"pp": self.c_pp, "pq": self.c_pq, "qq": self.c_qq}[which]
        return toeplitz(col)

    def matrix(self) -> np.ndarray:
        """Dense [[phiphi, phipi], [phipi, pipi]], positive definite.

        If roundoff grazes zero (smallest eigenvalue in (-1e-10, 0]) the
        diagonal gets a jitter 1e-12 * trace/(2 N_s); anything lower is a
        genuine error.
        """
        n = self.n_s
        m = np.empty((2 * n, 2 * n))
        m[:n, :n] = toeplitz(self.c_pp)
        m[:n, n:] = toeplitz(self.c_pq)
        m[n:, :n] = m[:n, n:]
        m[n:, n:] = toeplitz(self.c_qq)
        try:
            np.linalg.cholesky(m)
            return m
        except np.linalg.LinAlgError:
            pass
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min <= -1e-10:
            raise NumericsError(
                f"correlation block q_par = {self.q_par:g}, t = {self.t:g} is "
                f"not positive definite (min eigenvalue {lam_min:.3e})"
            )
        jitter = 1e-12 * np.trace(m) / (2 * n)
        m[np.diag_indices_from(m)] += jitter
        return m


def _kz_magnitudes(geom: SlabGeometry, q_par: float) -> np.ndarray:
    kz = geom.kz_grid()
    return np.sqrt(kz * kz + q_par * q_par)


def toeplitz_columns(kern: MomentumKernels, geom: SlabGeometry, q_par: float,
                     n_s: int | None = None):
    """First n_s Toeplitz columns of the three blocks, via a length-N_tot FFT.

    With the half-open k_z grid, exp(i k_z^j d a) = (-1)^d exp(2 pi i j d/N),
    so the cosine sum is (-1)^d Re ifft(g)[d]. The imaginary part vanishes
    identically because the kernels are even in k_z.
    """
    n_s = geom.n_s if n_s is None else int(n_s)
    if not (0 < n_s <= geom.n_tot):
        raise ConfigError("need 0 < n_s <= n_tot")
    sign = np.where(np.arange(n_s) % 2 == 0, 1.0, -1.0)
    kmag = _kz_magnitudes(geom, q_par)
    pp, pq, qq = _interp_kernels(kern, kmag)
    c_pp = sign * np.fft.ifft(pp)[:n_s].real
    c_pq = sign * np.fft.ifft(pq)[:n_s].real
    c_qq = sign * np.fft.ifft(qq)[:n_s].real
    return c_pp, c_pq, c_qq


def toeplitz_columns_naive(kern: MomentumKernels, geom: SlabGeometry, q_par: float,
                           n_s: int | None = None):
    """Direct cosine sums; oracle for the FFT path."""
    n_s = geom.n_s if n_s is None else int(n_s)
    kz = geom.kz_grid()
    kmag = _kz_magnitudes(geom, q_par)
    pp, pq, qq = _interp_kernels(kern, kmag)
    seps = np.arange(n_s) * geom.a
    cos = np.cos(np.outer(seps, kz))
    inv = 1.0 / geom.n_tot
    return inv * (cos @ pp), inv * (cos @ pq), inv * (cos @ qq)


def mixed_correlation_matrix(state: ModeState | MomentumKernels, geom: SlabGeometry,
                             q_par: float, grid: RadialGrid | None = None,
                             n_s: int | None = None) -> CorrelationMatrix:
    """Correlation-matrix block at transverse momentum q_par."""
    if not (0 <= q_par <= geom.q_max * (1 + _EDGE_TOL)):
        raise ConfigError(f"q_par = {q_par:g} outside [0, q_max = {geom.q_max:g}]")
    if isinstance(state, MomentumKernels):
        kern = state
    else:
        if grid is None:
            raise ConfigError("passing a ModeState requires its radial grid")
        kern = momentum_kernels(state, grid)
    c_pp, c_pq, c_qq = toeplitz_columns(kern, geom, q_par, n_s)
    return CorrelationMatrix(q_par=float(q_par), t=kern.t, a=geom.a,
                             c_pp=c_pp, c_pq=c_pq, c_qq=c_qq)


def block_csv_rows(corr: CorrelationMatrix):
    """Rows (separation_index, g_phiphi, g_phipi, g_pipi) for a CSV dump."""
    for d in range(corr.n_s):
        yield d, corr.c_pp[d], corr.c_pq[d], corr.c_qq[d]


def write_block_csv(corr: CorrelationMatrix, path):
    """Dump one block's Toeplitz columns; the header records q_par and t."""
    from .storage import write_csv

    write_csv(path, ["separation_index", "g_phiphi", "g_phipi", "g_pipi"],
              block_csv_rows(corr),
              header_comment=f"q_par = {corr.q_par!r}, t = {corr.t!r}")
