"""Piecewise monotone rearrangement of solution derivatives.

A snapshot's spatial derivative is treated as a signed density on the
cell-interface grid.  It splits into sign-definite pieces; each piece is
mapped to its quantile function (inverse CDF on a fixed level grid), and
convex combinations of quantile functions realize displacement
interpolation between snapshots.  Integrating the interpolated pieces
back up yields basis candidate functions on the cell grid.

Interface value j carries the jump mass dx * d_j centered at interface
position x_j, spread uniformly over [x_j - dx/2, x_j + dx/2]; the
resulting CDF is piecewise linear, so quantile inversion is exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SignatureMismatch
from .hfm import Grid1D, Snapshot

#: Default number of equispaced quantile levels.
QUANTILE_LEVELS = 401

#: Default relative tolerance for derivative thresholding and piece drops.
DERIVATIVE_TOL = 1e-8


@dataclass(frozen=True)
class Density:
    """Signed density sampled on a uniform grid of positions."""

    x: np.ndarray
    dx: float
    values: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.dx * self.values.sum())


@dataclass(frozen=True)
class Piece:
    """A maximal sign-definite run of a density.

    lo/hi are inclusive sample indices into the parent density; ordinals
    are 1-based in order of increasing centroid.
    """

    ordinal: int
    sign: int
    lo: int
    hi: int
    x: np.ndarray
    values: np.ndarray
    dx: float
    mass: float
    centroid: float


@dataclass(frozen=True)
class Quantile:
    """Quantile function of a sign-definite piece.

    Levels are the union of k equispaced levels and the piece's own CDF
    knot levels, so positions-vs-levels is the EXACT inverse of the
    piecewise-linear CDF (re-evaluating it on any refinement of the level
    set is again exact).  positions is nondecreasing; mass keeps the
    piece's sign.  The parent grid (grid_x, dx) rides along so
    interpolants can be rasterized back onto it.
    """

    levels: np.ndarray
    positions: np.ndarray
    mass: float
    sign: int
    grid_x: np.ndarray
    dx: float


@dataclass(frozen=True)
class BasisCandidate:
    """Running integral of one interpolated piece, sampled on cell centers."""

    ordinal: int
    sign: int
    mass: float
    values: np.ndarray


def differentiate(s: Snapshot, grid: Grid1D) -> Density:
    """Interface-grid derivative of a snapshot, inflow jump included.

    Output has n_cells + 1 values: (U_0 - mu1)/dx at the inflow interface,
    interior differences (U_i - U_{i-1})/dx, and 0 at the outflow interface
    (the outflow ghost copies the last cell).  dx times the sum telescopes
    to U_last - mu1.
    """
    u = s.cells
    d = np.empty(grid.n_cells + 1)
    # an identically-zero state (the initial condition) has a null
    # derivative: the inflow datum has not yet entered the domain
    d[0] = 0.0 if not np.any(u) else (u[0] - s.mu.mu1) / grid.dx
    d[1:-1] = np.diff(u) / grid.dx
    d[-1] = 0.0
    return Density(x=grid.interfaces, dx=grid.dx, values=d)


def decompose(density: Density, tol_rel: float = DERIVATIVE_TOL) -> list[Piece]:
    """Split a density into sign-definite pieces.

    Values with |v| <= tol_rel * max|v| are zeroed first; maximal runs of
    equal sign become pieces; pieces with |mass| < tol_rel * (total
    absolute mass) are dropped.  Pieces come back ordered by centroid,
    numbered 1..J.
    """
    vals = np.asarray(density.values, dtype=float).copy()
    peak = np.abs(vals).max() if len(vals) else 0.0
    if peak == 0.0:
        return []
    vals[np.abs(vals) <= tol_rel * peak] = 0.0
    total_abs = density.dx * np.abs(vals).sum()
    if total_abs == 0.0:
        return []

    sgn = np.sign(vals).astype(int)
    change = np.flatnonzero(np.diff(sgn)) + 1
    bounds = np.concatenate([[0], change, [len(sgn)]])

    pieces = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        s = sgn[lo]
        if s == 0:
            continue
        v = vals[lo:hi]
        mass = density.dx * v.sum()
        if abs(mass) < tol_rel * total_abs:
            continue
        x = density.x[lo:hi]
        centroid = float((x * v).sum() / v.sum())
        pieces.append(Piece(
            ordinal=0, sign=int(s), lo=int(lo), hi=int(hi - 1),
            x=x, values=v, dx=density.dx,
            mass=float(mass), centroid=centroid,
        ))

    pieces.sort(key=lambda p: p.centroid)
    return [Piece(ordinal=i + 1, sign=p.sign, lo=p.lo, hi=p.hi, x=p.x,
                  values=p.values, dx=p.dx, mass=p.mass, centroid=p.centroid)
            for i, p in enumerate(pieces)]


def signature(s: Snapshot, grid: Grid1D,
              tol_rel: float = DERIVATIVE_TOL) -> tuple[int, ...]:
    """Ordered piece signs of the snapshot's derivative; () for flat states."""
    return tuple(p.sign for p in decompose(differentiate(s, grid), tol_rel))


def to_quantile(piece: Piece, k: int = QUANTILE_LEVELS,
                grid_x: np.ndarray | None = None) -> Quantile:
    """Exact piecewise-linear quantile function of |piece| / |mass|.

    The CDF is piecewise linear with knots at the half-sample edges
    x_j -+ dx/2; inversion is evaluated at the union of k equispaced
    levels and the knot levels themselves, so the quantile function is an
    exact representation of the CDF inverse, not a sampling of it.
    """
    if k < 2:
        raise ValueError("need at least 2 quantile levels")
    v = np.abs(piece.values)
    knots = np.concatenate([[piece.x[0] - piece.dx / 2],
                            piece.x + piece.dx / 2])
    cum = np.concatenate([[0.0], np.cumsum(v)])
    cum /= cum[-1]
    levels = np.union1d(np.linspace(0.0, 1.0, k), cum)
    positions = np.interp(levels, cum, knots)
    return Quantile(
        levels=levels, positions=positions,
        mass=piece.mass, sign=piece.sign,
        grid_x=piece.x if grid_x is None else grid_x, dx=piece.dx,
    )


def common_levels(quantiles: list[Quantile]) -> np.ndarray:
    """Union of the level sets of several quantile functions."""
    out = quantiles[0].levels
    for q in quantiles[1:]:
        if q.levels is not out and not (
                len(q.levels) == len(out) and np.array_equal(q.levels, out)):
            out = np.union1d(out, q.levels)
    return out


def positions_at(q: Quantile, levels: np.ndarray) -> np.ndarray:
    """Evaluate a quantile function on a refinement of its level set.

    Exact whenever `levels` contains q's own levels, since the quantile
    function is piecewise linear with knots there.
    """
    if levels is q.levels or (len(levels) == len(q.levels)
                              and np.array_equal(levels, q.levels)):
        return q.positions
    return np.interp(levels, q.levels, q.positions)


def _check_weights(weights, n: int, tol: float = 1e-12) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"need {n} weights, got shape {w.shape}")
    if np.any(w < -tol):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
    return np.clip(w, 0.0, None)


def displacement_interp(quantiles: list[Quantile], weights) -> Density:
    """Displacement interpolation of same-sign pieces.

    The interpolated quantile function is the weight-convex combination of
    the input quantile functions; its mass is the same combination of the
    signed masses.  The result is rasterized conservatively back onto the
    first quantile's grid: bin masses are exact differences of the
    piecewise-linear interpolated CDF at bin edges.
    """
    if not quantiles:
        raise ValueError("no quantiles to interpolate")
    w = _check_weights(weights, len(quantiles))
    sign = quantiles[0].sign
    for q in quantiles:
        if q.sign != sign:
            raise SignatureMismatch("quantiles carry mixed signs")

    levels = common_levels(quantiles)
    x_alpha = np.zeros(len(levels))
    mass = 0.0
    for wj, q in zip(w, quantiles):
        x_alpha += wj * positions_at(q, levels)
        mass += wj * q.mass

    grid_x = quantiles[0].grid_x
    dx = quantiles[0].dx
    edges = np.concatenate([grid_x - dx / 2, [grid_x[-1] + dx / 2]])
    slack = 1e-9 * dx
    if x_alpha[0] < edges[0] - slack or x_alpha[-1] > edges[-1] + slack:
        raise ValueError("interpolated support exceeds the rasterization grid; "
                         "pass the full interface grid to to_quantile")
    cdf = abs(mass) * np.interp(edges, x_alpha, levels)
    values = sign * np.diff(cdf) / dx
    return Density(x=grid_x, dx=dx, values=values)


def interp_by_pieces(snapshots: list[Snapshot], weights, grid: Grid1D,
                     k: int = QUANTILE_LEVELS,
                     tol_rel: float = DERIVATIVE_TOL) -> list[BasisCandidate]:
    """Interpolate snapshots piece-by-piece; one candidate per ordinal.

    All snapshots must share their derivative signature; otherwise
    SignatureMismatch is raised.  Candidate j is the running integral
    (cumulative sum times dx) of the interpolated ordinal-j piece, sampled
    on cell centers.
    """
    decomps = [decompose(differentiate(s, grid), tol_rel) for s in snapshots]
    return interp_candidates(decomps, weights, grid, k)


def interp_candidates(decomps: list[list[Piece]], weights, grid: Grid1D,
                      k: int = QUANTILE_LEVELS) -> list[BasisCandidate]:
    """interp_by_pieces on precomputed decompositions."""
    if not decomps:
        raise ValueError("no snapshots")
    sig = tuple(p.sign for p in decomps[0])
    if not sig:
        raise SignatureMismatch("empty piece list (flat snapshot)")
    for d in decomps[1:]:
        if tuple(p.sign for p in d) != sig:
            raise SignatureMismatch(
                f"signature mismatch: {tuple(p.sign for p in d)} vs {sig}")
    w = _check_weights(weights, len(decomps))

    out = []
    for j in range(len(sig)):
        quantiles = [to_quantile(d[j], k, grid_x=grid.interfaces)
                     for d in decomps]
        dens = displacement_interp(quantiles, w)
        cdf = np.cumsum(dens.values)[: grid.n_cells] * grid.dx
        out.append(BasisCandidate(
            ordinal=j + 1, sign=sig[j], mass=dens.mass, values=cdf))
    return out
