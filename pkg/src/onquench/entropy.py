"""Entanglement entropy of the slab: per-block sums and the transverse
quadrature, with the zero-mode contribution tracked separately.

The entropy per unit cross-section is the continuum transverse integral

    S/L_par^2 = (1/2 pi) int_0^{q_max} q S_q(L) dq ,

evaluated by trapezoid over the sampled q_par values. The q_par = 0 block
has zero measure in that integral but carries the logarithmic long-time
correction, so its absolute entropy is reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericsError
from .correlators import mixed_correlation_matrix
from .evolve import ModeState, MomentumKernels, momentum_kernels
from .model import RadialGrid, SlabGeometry
from .symplectic import EntanglementBlock, occupations_from_lambda, symplectic_spectrum


def mode_entropy(n):
    """Bose-Einstein entropy (1+n) ln(1+n) - n ln n, with s(0) = 0.

    Evaluated as n log1p(1/n) + log1p(n), which avoids the cancellation of
    the textbook form at large occupation.
    """
    arr = np.asarray(n, dtype=float)
    if np.any(arr < 0):
        raise ConfigError("occupation must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(arr > 0,
                     arr * np.log1p(1.0 / np.maximum(arr, 1e-300)) + np.log1p(arr),
                     0.0)
    return float(s) if np.isscalar(n) else s


def block_entropy(block: EntanglementBlock | np.ndarray) -> float:
    """Entropy of one q_par block: sum of mode entropies over all N_s modes."""
    occ = block.occupations if isinstance(block, EntanglementBlock) else np.asarray(block)
    return float(np.sum(mode_entropy(occ)))


@dataclass(frozen=True)
class EntropyRecord:
    """Slab entropy at one instant: per-area total, zero-mode part, and the
    per-block profile it was integrated from."""

    t: float
    length: float               # slab width L
    s_per_area: float
    s_zero_mode: float
    q_samples: np.ndarray
    s_blocks: np.ndarray        # S_q at each sample

    def __post_init__(self):
        if np.any(self.s_blocks < -1e-12):
            raise NumericsError("negative block entropy")
        self.q_samples.setflags(write=False)
        self.s_blocks.setflags(write=False)

    def integrate_blocks(self) -> float:
        """Recompute s_per_area from the stored per-block profile."""
        return transverse_quadrature(self.q_samples, self.s_blocks)


def transverse_quadrature(q: np.ndarray, s_q: np.ndarray) -> float:
    """(1/2 pi) int q S_q dq by trapezoid over the samples."""
    return float(np.trapezoid(q * s_q, q) / (2.0 * math.pi))


def slab_entropy(state: ModeState | MomentumKernels, geom: SlabGeometry,
                 grid: RadialGrid | None = None, n_s: int | None = None) -> EntropyRecord:
    """Entropy record for one snapshot and slab width.

    Symplectic failures are tagged with the offending q_par.
    """
    if isinstance(state, MomentumKernels):
        kern = state
    else:
        if grid is None:
            raise ConfigError("passing a ModeState requires its radial grid")
        kern = momentum_kernels(state, grid)
    n_s = geom.n_s if n_s is None else int(n_s)
    q = geom.q_samples
    s_blocks = np.empty(q.size)
    for i, q_par in enumerate(q):
        try:
            corr = mixed_correlation_matrix(kern, geom, float(q_par), n_s=n_s)
            lam = symplectic_spectrum(corr)
        except NumericsError as exc:
            raise NumericsError(f"block q_par = {q_par:g} failed: {exc}") from exc
        s_blocks[i] = float(np.sum(mode_entropy(occupations_from_lambda(lam))))
    return EntropyRecord(
        t=kern.t,
        length=n_s * geom.a,
        s_per_area=transverse_quadrature(q, s_blocks),
        s_zero_mode=float(s_blocks[0]) if q[0] == 0.0 else float("nan"),
        q_samples=q.copy(),
        s_blocks=s_blocks,
    )
