"""Exception types shared across the pipeline.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures (CFL, signature) with 3, artifact-store
integrity failures with 4.
"""
from __future__ import annotations


class ConfigError(ValueError):
    """Invalid or inconsistent configuration input."""


class CflViolation(RuntimeError):
    """A time step exceeded the CFL stability bound."""

    def __init__(self, wave_speed: float, dt: float, dx: float, step: int):
        self.wave_speed = float(wave_speed)
        self.dt = float(dt)
        self.dx = float(dx)
        self.step = int(step)
        super().__init__(
            f"CFL violation at step {step}: "
            f"dt*max|u|/dx = {dt * wave_speed / dx:.6f} > 1 "
            f"(max wave speed {wave_speed:.6g}, dt {dt:.6g}, dx {dx:.6g})"
        )


class SignatureMismatch(RuntimeError):
    """Snapshots required to share a sign signature do not."""


class StoreIntegrityError(RuntimeError):
    """An artifact store file is missing or fails its manifest hash."""
