"""Godunov finite-volume solver for a parametrized inviscid Burgers equation.

The model problem is

    u_t + (u^2 / 2)_x = 0.02 exp(mu2 x)   on (0, 100) x (0, t_final],
    u(x, 0) = 0,
    u(0, t) = mu1,

with parameters mu = (mu1, mu2) in [3, 9] x [0.02, 0.075].  The solver is
first-order Godunov on a uniform grid: inflow ghost cell pinned at mu1,
zero-gradient outflow ghost, explicit Euler in time with a hard CFL guard.
No entropy fix is applied (the flux formula below is exact for the scalar
convex flux).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CflViolation

#: Admissible parameter box, ((mu1_lo, mu1_hi), (mu2_lo, mu2_hi)).
PARAM_BOX = ((3.0, 9.0), (0.02, 0.075))

#: Coefficient of the exponential source term.
SOURCE_COEFF = 0.02


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1-D finite-volume grid.

    Cell i occupies [x_lo + i dx, x_lo + (i+1) dx]; unknowns live at cell
    centers.  Interface j sits at x_lo + j dx, j = 0..n_cells.
    """

    n_cells: int = 250
    dx: float = 0.4
    x_lo: float = 0.0

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError(f"n_cells must be positive, got {self.n_cells}")
        if not self.dx > 0.0:
            raise ValueError(f"dx must be positive, got {self.dx}")

    @property
    def x_hi(self) -> float:
        return self.x_lo + self.n_cells * self.dx

    @property
    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        return self.x_lo + np.arange(self.n_cells + 1) * self.dx


@dataclass(frozen=True)
class ParamPoint:
    """A point mu = (mu1, mu2) in parameter space."""

    mu1: float
    mu2: float

    def require_in_box(self, box=PARAM_BOX) -> "ParamPoint":
        (a1, b1), (a2, b2) = box
        if not (a1 <= self.mu1 <= b1 and a2 <= self.mu2 <= b2):
            raise ValueError(
                f"parameter ({self.mu1}, {self.mu2}) outside "
                f"[{a1}, {b1}] x [{a2}, {b2}]"
            )
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2])


@dataclass(frozen=True)
class Snapshot:
    """One recorded state: cell averages at time t for parameter mu."""

    mu: ParamPoint
    t: float
    cells: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=float))


@dataclass(frozen=True)
class HfmConfig:
    """Full-order solver configuration."""

    mu: ParamPoint
    grid: Grid1D = Grid1D()
    dt: float = 0.0125
    t_final: float = 12.0
    snapshot_stride: int = 1
    source_coeff: float = SOURCE_COEFF

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final > 0.0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        # Round to the nearest integer step count; t_final is expected to be
        # an (approximate) multiple of dt.
        return max(1, int(round(self.t_final / self.dt)))


@dataclass(frozen=True)
class Trajectory:
    """Recorded snapshots of one solver run.

    states has one row per recorded step, in step order; steps holds the
    corresponding step indices (step 0 is the initial condition).
    """

    mu: ParamPoint
    grid: Grid1D
    dt: float
    steps: np.ndarray
    states: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.dt

    def snapshot(self, i: int) -> Snapshot:
        return Snapshot(self.mu, float(self.steps[i] * self.dt), self.states[i])

    def at_step(self, n: int) -> Snapshot:
        idx = np.searchsorted(self.steps, n)
        if idx >= len(self.steps) or self.steps[idx] != n:
            raise KeyError(f"step {n} not recorded")
        return self.snapshot(int(idx))


def godunov_flux(u_left, u_right):
    """Exact Godunov flux for f(u) = u^2/2.

    Computes max(f(max(u_left, 0)), f(min(u_right, 0))), which covers
    shocks, rarefactions, and the transonic case (flux 0) for the convex
    Burgers flux.  Accepts scalars or arrays.
    """
    fl = 0.5 * np.square(np.maximum(u_left, 0.0))
    fr = 0.5 * np.square(np.minimum(u_right, 0.0))
    return np.maximum(fl, fr)


def step(cells: np.ndarray, cfg: HfmConfig, step_index: int = 0,
         _source: np.ndarray | None = None) -> np.ndarray:
    """Advance cell averages by one explicit Godunov step.

    Ghost cells: inflow fixed at mu1, outflow copies the last cell.  Raises
    CflViolation when dt * max|u| / dx > 1 (ghosts included).
    """
    grid = cfg.grid
    u = np.empty(grid.n_cells + 2)
    u[0] = cfg.mu.mu1
    u[1:-1] = cells
    u[-1] = cells[-1]

    wave_speed = float(np.abs(u).max())
    if cfg.dt * wave_speed / grid.dx > 1.0:
        raise CflViolation(wave_speed, cfg.dt, grid.dx, step_index)

    flux = godunov_flux(u[:-1], u[1:])
    if _source is None:
        _source = cfg.source_coeff * np.exp(cfg.mu.mu2 * grid.centers)
    return cells - (cfg.dt / grid.dx) * (flux[1:] - flux[:-1]) + cfg.dt * _source


def solve(cfg: HfmConfig, n_steps: int | None = None) -> Trajectory:
    """Run the solver from the zero initial state.

    Records the state every snapshot_stride steps, always including step 0
    and the final step.  Returns the recorded trajectory.
    """
    grid = cfg.grid
    if n_steps is None:
        n_steps = cfg.n_steps
    source = cfg.source_coeff * np.exp(cfg.mu.mu2 * grid.centers)

    cells = np.zeros(grid.n_cells)
    recorded_steps = [0]
    recorded = [cells.copy()]
    for n in range(n_steps):
        cells = step(cells, cfg, step_index=n, _source=source)
        m = n + 1
        if m % cfg.snapshot_stride == 0 or m == n_steps:
            recorded_steps.append(m)
            recorded.append(cells.copy())

    return Trajectory(
        mu=cfg.mu,
        grid=grid,
        dt=cfg.dt,
        steps=np.asarray(recorded_steps, dtype=np.int64),
        states=np.asarray(recorded),
    )
