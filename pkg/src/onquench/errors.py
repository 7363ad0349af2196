"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class NumericsError(RuntimeError):
    """Numerical failure (instability, eigensolver breakdown, ...)."""


class UnstableEvolutionError(NumericsError):
    """Mode amplitudes exceeded the overflow guard during integration."""

    def __init__(self, t_fail: float, message: str | None = None):
        self.t_fail = t_fail
        super().__init__(message or f"mode evolution became unstable at t = {t_fail:g}")


class PairingError(NumericsError):
    """Symplectic eigenvalues failed to pair up (numerical breakdown)."""
