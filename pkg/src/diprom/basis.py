"""Local reduced bases on parameter-time elements.

Each element's basis is built from displacement interpolants of the six
node snapshots, sampled on a Cartesian grid over the element, plus the
constant function (which carries the inflow boundary offset).  Candidates
are orthonormalized by modified Gram-Schmidt with one re-orthogonalization
pass under the grid inner product <a, b> = dx * sum a_i b_i.

Interpolating across nodes requires all six node signatures to agree.
Elements that straddle the early-time signature transition fail that
check; they still get a usable basis by grouping nodes with equal
signatures and interpolating within each group at renormalized weights,
which degenerates to the standard construction whenever the check passes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SignatureMismatch
from .hfm import Grid1D, ParamPoint, Snapshot
from .param_space import Element, Triangulation, barycentric
from .transport import (DERIVATIVE_TOL, QUANTILE_LEVELS, common_levels,
                        decompose, differentiate, positions_at, to_quantile)

#: Default Gram-Schmidt dependence drop tolerance.
GS_TOL = 1e-10

#: Default Cartesian sample counts per element axis (time, mu1, mu2).
SAMPLES_PER_AXIS = (3, 3, 3)


@dataclass(frozen=True)
class SignatureReport:
    """Outcome of the per-element signature condition check."""

    ok: bool
    signatures: tuple[tuple[int, ...], ...]

    @property
    def common(self) -> tuple[int, ...] | None:
        return self.signatures[0] if self.ok else None


@dataclass(frozen=True)
class LocalBasis:
    """Orthonormal basis of one element; columns of w are basis functions."""

    ell: int
    m: int
    w: np.ndarray
    dx: float
    signature: tuple[int, ...] | None
    fallback: bool
    n_candidates: int

    @property
    def n_functions(self) -> int:
        return self.w.shape[1]

    def project(self, u: np.ndarray) -> np.ndarray:
        """Coefficients of the best approximation of u in the basis."""
        return self.dx * (self.w.T @ u)

    def reconstruct(self, r: np.ndarray) -> np.ndarray:
        return self.w @ r


def check_signature_condition(node_snapshots: list[Snapshot], grid: Grid1D,
                              tol_rel: float = DERIVATIVE_TOL) -> SignatureReport:
    """All six node snapshots must share one derivative signature."""
    from .transport import signature as _signature
    sigs = tuple(_signature(s, grid, tol_rel) for s in node_snapshots)
    ok = len(set(sigs)) == 1 and sigs[0] != ()
    return SignatureReport(ok=ok, signatures=sigs)


def sample_element(tri: Triangulation, elem: Element,
                   p_t: int = 3, p1: int = 3, p2: int = 3,
                   tol: float = 1e-9) -> list[tuple[ParamPoint, float]]:
    """Cartesian samples over the element, restricted to the prism.

    The grid spans the triangle's bounding box times the slab's time
    interval with p1 x p2 x p_t points; only parameter points inside the
    triangle (within tolerance) are kept.  Order is deterministic:
    t-major, then mu1, then mu2.
    """
    if min(p_t, p1, p2) < 2:
        raise ValueError("need at least 2 samples per axis")
    v = np.array([[p.mu1, p.mu2] for p in elem.vertices])
    mu1s = np.linspace(v[:, 0].min(), v[:, 0].max(), p1)
    mu2s = np.linspace(v[:, 1].min(), v[:, 1].max(), p2)
    times = np.linspace(elem.t_lo, elem.t_hi, p_t)
    out = []
    for t in times:
        for m1 in mu1s:
            for m2 in mu2s:
                if tri.contains(elem.ell, (m1, m2), tol=tol):
                    out.append((ParamPoint(float(m1), float(m2)), float(t)))
    return out


def orthonormalize(candidates: list[np.ndarray], dx: float,
                   gs_tol: float = GS_TOL) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Candidates whose residual norm falls below gs_tol times their original
    norm are dropped as linearly dependent.  Column order follows input
    order, so the result is deterministic.
    """
    kept: list[np.ndarray] = []
    for v in candidates:
        v = np.asarray(v, dtype=float)
        norm0 = np.sqrt(dx * (v @ v))
        if norm0 == 0.0:
            continue
        w = v.copy()
        for _ in range(2):
            for b in kept:
                w -= (dx * (b @ w)) * b
        nrm = np.sqrt(dx * (w @ w))
        if nrm < gs_tol * norm0:
            continue
        kept.append(w / nrm)
    if not kept:
        raise ValueError("no independent candidates")
    return np.column_stack(kept)


def build_local_basis(tri: Triangulation, elem: Element,
                      node_snapshots: list[Snapshot], grid: Grid1D,
                      samples: list[tuple[ParamPoint, float]] | None = None,
                      k: int = QUANTILE_LEVELS,
                      tol_rel: float = DERIVATIVE_TOL,
                      gs_tol: float = GS_TOL,
                      extra_snapshots: list[Snapshot] | None = None) -> LocalBasis:
    """Assemble and orthonormalize one element's local basis.

    The constant function comes first; then any extra raw snapshots; then,
    per sample and piece ordinal, the running integral of the
    displacement-interpolated piece.  When the node signatures disagree,
    nodes are grouped by signature and each group is interpolated
    separately at renormalized weights (fallback basis); extra raw
    snapshots (e.g. anchor states from inside the slab) let such elements
    track states that interpolation alone cannot reach.
    """
    if len(node_snapshots) != 6:
        raise ValueError(f"need 6 node snapshots, got {len(node_snapshots)}")
    if samples is None:
        samples = sample_element(tri, elem, *SAMPLES_PER_AXIS)

    decomps = [decompose(differentiate(s, grid), tol_rel)
               for s in node_snapshots]
    sigs = [tuple(p.sign for p in d) for d in decomps]
    report_ok = len(set(sigs)) == 1 and sigs[0] != ()

    # Node groups by signature, in order of first appearance; flat nodes
    # (empty signature) cannot contribute interpolants.
    groups: dict[tuple[int, ...], list[int]] = {}
    for i, sig in enumerate(sigs):
        if sig == ():
            continue
        groups.setdefault(sig, []).append(i)
    if not groups:
        raise SignatureMismatch(
            f"element ({elem.ell}, {elem.m}): all node snapshots are flat")

    # Per group and piece ordinal: shared level set, each node's quantile
    # positions evaluated on it (exact), and the signed masses.
    group_data: dict[tuple[int, ...], list] = {}
    for sig, idxs in groups.items():
        per_ordinal = []
        for j in range(len(sig)):
            qs = [to_quantile(decomps[i][j], k, grid_x=grid.interfaces)
                  for i in idxs]
            lev = common_levels(qs)
            pos = np.vstack([positions_at(q, lev) for q in qs])
            masses = np.array([q.mass for q in qs])
            per_ordinal.append((lev, pos, masses))
        group_data[sig] = per_ordinal

    candidates: list[np.ndarray] = [np.ones(grid.n_cells)]
    for s in extra_snapshots or []:
        candidates.append(np.asarray(s.cells, dtype=float))
    edges = np.concatenate([grid.interfaces - grid.dx / 2,
                            [grid.interfaces[-1] + grid.dx / 2]])
    for mu, t in samples:
        w6 = barycentric(tri, elem, (mu.mu1, mu.mu2), t)
        for sig, idxs in groups.items():
            wg = w6[list(idxs)]
            total = wg.sum()
            if total <= 1e-12:
                continue
            wg = wg / total
            for j, (lev, pos, masses) in enumerate(group_data[sig]):
                x_alpha = wg @ pos
                mass = wg @ masses
                cdf = abs(mass) * np.interp(edges, x_alpha, lev)
                dens = sig[j] * np.diff(cdf) / grid.dx
                candidates.append(np.cumsum(dens)[: grid.n_cells] * grid.dx)

    w = orthonormalize(candidates, grid.dx, gs_tol)
    return LocalBasis(
        ell=elem.ell, m=elem.m, w=w, dx=grid.dx,
        signature=sigs[0] if report_ok else None,
        fallback=not report_ok,
        n_candidates=len(candidates),
    )


def transition_matrix(basis_from: LocalBasis, basis_to: LocalBasis) -> np.ndarray:
    """Coefficient map between bases: T = dx * W_to^T W_from."""
    if basis_from.w.shape[0] != basis_to.w.shape[0]:
        raise ValueError("bases live on different grids")
    return basis_to.dx * (basis_to.w.T @ basis_from.w)
