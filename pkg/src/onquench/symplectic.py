"""Williamson spectrum of a correlation block, entanglement dispersions and
eigenmode profiles.

The symplectic eigenvalues lambda_j >= 1/2 of a Gaussian covariance block G
are the moduli of the (purely imaginary) eigenvalues of J G. They are
computed through symmetric eigenproblems only: with G = T T^T the matrix
A = T^T J T is antisymmetric and similar to J G, so the eigenvalues of the
positive semidefinite A A^T are the lambda_j^2, each doubly degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericsError, PairingError
from .correlators import CorrelationMatrix

# lambda just below the pure-mode value 1/2 is quadrature noise
LAMBDA_FLOOR_TOL = 1e-8
PAIRING_TOL = 1e-8


def symplectic_form(n: int) -> np.ndarray:
    """J = [[0, I], [-I, 0]] for n modes (phi block first)."""
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def _apply_j(m: np.ndarray) -> np.ndarray:
    """J @ m without materializing J."""
    n = m.shape[0] // 2
    out = np.empty_like(m)
    out[:n] = m[n:]
    out[n:] = -m[:n]
    return out


def symplectic_spectrum(G: CorrelationMatrix | np.ndarray) -> np.ndarray:
    """All N_s symplectic eigenvalues, sorted descending.

    Values in [1/2 - 1e-8, 1/2) are clamped to 1/2; anything lower means the
    input was not a valid covariance. The double degeneracy of the squared
    spectrum is verified before deduplication.
    """
    m = G.matrix() if isinstance(G, CorrelationMatrix) else np.asarray(G, float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
        raise ConfigError("covariance must be square with even dimension")
    try:
        t = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericsError("covariance matrix is not positive definite") from exc
    a = t.T @ _apply_j(t)
    sq = np.linalg.eigvalsh(a @ a.T)          # lambda^2, doubly degenerate
    sq = np.sqrt(np.maximum(sq[::-1], 0.0))   # descending lambdas, duplicated
    pair_gap = np.abs(sq[0::2] - sq[1::2])
    scale = np.maximum(sq[0::2], 1e-300)
    if np.any(pair_gap / scale > PAIRING_TOL):
        worst = float(np.max(pair_gap / scale))
        raise PairingError(f"+-i lambda pairing residual {worst:.3e} exceeds {PAIRING_TOL}")
    lam = 0.5 * (sq[0::2] + sq[1::2])
    low = lam < 0.5
    if np.any(lam[low] < 0.5 - LAMBDA_FLOOR_TOL):
        raise NumericsError(
            f"symplectic eigenvalue {float(lam[low].min()):.12g} below 1/2: "
            "input is not a physical covariance"
        )
    lam[low] = 0.5
    return lam


def dispersion_from_lambda(lam):
    """Entanglement dispersion omega = ln((lambda + 1/2)/(lambda - 1/2)).

    Inverse of lambda = (1/2) coth(omega/2). Returns +inf for lambda = 1/2
    (empty mode); for lambda >> 1, omega ~ 1/lambda.
    """
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0.5):
        raise ConfigError("lambda must be >= 1/2")
    # log1p form of ln((lam + 1/2)/(lam - 1/2)) keeps full precision at large lam
    with np.errstate(divide="ignore"):
        om = np.log1p(1.0 / (arr - 0.5))
    return float(om) if np.isscalar(lam) else om


def occupations_from_lambda(lam):
    """Entanglement occupations n_j = lambda_j - 1/2."""
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0.5):
        raise ConfigError("lambda must be >= 1/2")
    n = arr - 0.5
    return float(n) if np.isscalar(lam) else n


@dataclass(frozen=True)
class ModeProfile:
    """Spatial density |psi(z)|^2 = |phi'(z)|^2 + |Pi'(z)|^2 of one
    entanglement eigenvector, normalized to unit total weight."""

    density: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.density, float)
        if np.any(d < -1e-12):
            raise ConfigError("density must be nonnegative")
        total = d.sum()
        if not math.isclose(total, 1.0, rel_tol=1e-10, abs_tol=1e-10):
            raise ConfigError("density must sum to 1")
        object.__setattr__(self, "density", d)
        self.density.setflags(write=False)

    @property
    def z_index(self) -> np.ndarray:
        return np.arange(self.density.size)

    def mean_position(self) -> float:
        return float(self.z_index @ self.density)


@dataclass(frozen=True)
class EntanglementBlock:
    """Symplectic data of one q_par block: eigenvalues (descending),
    dispersions, occupations, and optionally the leading mode profiles."""

    q_par: float
    t: float
    lambdas: np.ndarray
    omegas: np.ndarray
    occupations: np.ndarray
    profiles: tuple[ModeProfile, ...] = ()

    def __post_init__(self):
        for arr in (self.lambdas, self.omegas, self.occupations):
            arr.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return self.lambdas.size

    def gap(self) -> float:
        """Dispersion of the most occupied mode, omega_{j=0}."""
        return float(self.omegas[0])


def entanglement_eigenvectors(G: CorrelationMatrix, count: int,
                              return_block: bool = False):
    """The ``count`` largest-lambda eigenpairs of i J G with mode profiles.

    Eigenvectors come from a dense general eigensolve of J G (eigenvalues
    -i lambda). Within a degenerate pair the profile with the smaller
    density-weighted mean position comes first, which pins the otherwise
    arbitrary eigensolver ordering.
    """
    m = G.matrix() if isinstance(G, CorrelationMatrix) else np.asarray(G, float)
    n = m.shape[0] // 2
    if not (1 <= count <= n):
        raise ConfigError(f"count must be in [1, N_s = {n}]")
    try:
        vals, vecs = np.linalg.eig(_apply_j(m))
    except np.linalg.LinAlgError as exc:
        raise NumericsError("dense eigensolver did not converge") from exc
    lam_scale = float(np.max(np.abs(vals))) or 1.0
    if float(np.max(np.abs(vals.real))) > 1e-8 * lam_scale:
        raise PairingError("spectrum of J G is not purely imaginary")
    branch = np.where(vals.imag < 0)[0]          # i J G eigenvalue = +lambda
    order = branch[np.argsort(vals.imag[branch])]  # most negative first
    picked = order[:count]

    pairs = []
    for idx in picked:
        lam = float(-vals.imag[idx])
        xi = vecs[:, idx]
        dens = np.abs(xi[:n]) ** 2 + np.abs(xi[n:]) ** 2
        pairs.append((lam, ModeProfile(density=dens / dens.sum())))

    # deterministic order inside degenerate pairs: <z> ascending
    i = 0
    while i + 1 < len(pairs):
        la, lb = pairs[i][0], pairs[i + 1][0]
        if abs(la - lb) <= 1e-6 * max(la, 1e-300):
            if pairs[i][1].mean_position() > pairs[i + 1][1].mean_position():
                pairs[i], pairs[i + 1] = pairs[i + 1], pairs[i]
            i += 2
        else:
            i += 1

    if not return_block:
        return pairs
    lambdas = symplectic_spectrum(G)
    t = G.t if isinstance(G, CorrelationMatrix) else 0.0
    q = G.q_par if isinstance(G, CorrelationMatrix) else 0.0
    return EntanglementBlock(
        q_par=q, t=t, lambdas=lambdas,
        omegas=dispersion_from_lambda(lambdas),
        occupations=occupations_from_lambda(lambdas),
        profiles=tuple(p for _, p in pairs),
    )


def entanglement_block(G: CorrelationMatrix, n_profiles: int = 0) -> EntanglementBlock:
    """Full symplectic data of one block, optionally with leading profiles."""
    if n_profiles > 0:
        return entanglement_eigenvectors(G, n_profiles, return_block=True)
    lambdas = symplectic_spectrum(G)
    return EntanglementBlock(
        q_par=G.q_par, t=G.t, lambdas=lambdas,
        omegas=dispersion_from_lambda(lambdas),
        occupations=occupations_from_lambda(lambdas),
    )


def random_symplectic(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random symplectic matrix S = expm(J H) with H symmetric (test helper)."""
    from scipy.linalg import expm

    h = rng.normal(size=(2 * n, 2 * n))
    h = 0.5 * (h + h.T)
    return expm(_apply_j(h))
