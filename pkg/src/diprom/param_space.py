"""Parameter-domain triangulation and parameter-time elements.

The offline stage triangulates the anchor set in normalized [0, 1]^2
coordinates (Bowyer-Watson) and crosses each triangle with uniform time
slabs of 20 solver steps.  A parameter-time element is one triangle times
one slab; its six nodes (three vertices at the slab's two step levels)
carry the anchor snapshots the local basis is built from.

Cocircular anchor sets (any rectangular grid) make the Delaunay diagonal
ambiguous; ties are broken deterministically by preferring the diagonal
whose lower-left endpoint has the smaller point index, so repeated runs
and point orderings give bit-identical triangulations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hfm import ParamPoint

_EPS = 1e-12


def _orient(a, b, c) -> float:
    """Twice the signed area of triangle (a, b, c); > 0 when CCW."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _incircle(a, b, c, d) -> float:
    """> 0 iff d lies strictly inside the circumcircle of CCW (a, b, c)."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad2 = adx * adx + ady * ady
    bd2 = bdx * bdx + bdy * bdy
    cd2 = cdx * cdx + cdy * cdy
    return (
        adx * (bdy * cd2 - cdy * bd2)
        - ady * (bdx * cd2 - cdx * bd2)
        + ad2 * (bdx * cdy - cdx * bdy)
    )


def _diagonal_key(i, j, pts):
    """Sort key of diagonal {i, j}: index of its lower-left endpoint.

    The lower-left endpoint is the one with lexicographically smaller
    (x, y); coordinate ties fall back to the smaller index.  The secondary
    entry makes the key a total order over diagonals.
    """
    pi, pj = pts[i], pts[j]
    if (pi[0], pi[1], i) <= (pj[0], pj[1], j):
        return (i, j)
    return (j, i)


class Triangulation:
    """Delaunay triangulation of parameter anchors.

    points are kept in input order; triangles are index triples, canonically
    oriented (positive area in normalized coordinates) and sorted
    lexicographically.
    """

    def __init__(self, points: np.ndarray, triangles: np.ndarray,
                 lo: np.ndarray, scale: np.ndarray):
        self.points = points
        self.triangles = triangles
        self._lo = lo
        self._scale = scale
        self.points_norm = (points - lo) / scale

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def normalize(self, mu) -> np.ndarray:
        return (np.asarray(mu, dtype=float) - self._lo) / self._scale

    def vertex_params(self, ell: int) -> list[ParamPoint]:
        return [ParamPoint(*self.points[v]) for v in self.triangles[ell]]

    def barycentric_in(self, ell: int, mu) -> np.ndarray:
        """Barycentric coordinates of mu in triangle ell (normalized coords)."""
        a, b, c = (self.points_norm[v] for v in self.triangles[ell])
        p = self.normalize(mu)
        area = _orient(a, b, c)
        la = _orient(p, b, c) / area
        lb = _orient(a, p, c) / area
        return np.array([la, lb, 1.0 - la - lb])

    def locate(self, mu, tol: float = _EPS) -> int:
        """Index of the first triangle containing mu (scan in index order)."""
        for ell in range(self.n_triangles):
            lam = self.barycentric_in(ell, mu)
            if np.all(lam >= -tol):
                return ell
        raise ValueError(f"parameter {tuple(np.asarray(mu, float))} is outside "
                         "the triangulated domain")

    def contains(self, ell: int, mu, tol: float = _EPS) -> bool:
        return bool(np.all(self.barycentric_in(ell, mu) >= -tol))


def delaunay(points) -> Triangulation:
    """Bowyer-Watson Delaunay triangulation with deterministic tie-breaks.

    points is an (n, 2) array-like of (mu1, mu2) anchors, n >= 3, not all
    collinear.  Coordinates are normalized per axis to [0, 1] before any
    predicate is evaluated, so the tie tolerance is scale-free.
    """
    pts_in = np.asarray(points, dtype=float)
    if pts_in.ndim != 2 or pts_in.shape[1] != 2 or len(pts_in) < 3:
        raise ValueError("need an (n, 2) array with n >= 3")
    if len(np.unique(pts_in, axis=0)) != len(pts_in):
        raise ValueError("duplicate points")

    lo = pts_in.min(axis=0)
    scale = pts_in.max(axis=0) - lo
    if np.any(scale <= 0.0):
        raise ValueError("points are collinear (degenerate axis)")
    pts = (pts_in - lo) / scale

    n = len(pts)
    # Super-triangle comfortably containing the unit square.
    all_pts = np.vstack([pts, [[-3.0, -3.0], [7.0, -3.0], [-3.0, 7.0]]])
    sa, sb, sc = n, n + 1, n + 2
    triangles = [(sa, sb, sc)]

    for p_idx in range(n):
        p = all_pts[p_idx]
        # Cavity: circumcircle contains p; cocircular ties count as inside
        # so no zero-area slivers survive around degenerate grids.
        cavity = [t for t in triangles
                  if _incircle(all_pts[t[0]], all_pts[t[1]], all_pts[t[2]], p) > -_EPS]
        if not cavity:
            raise RuntimeError("empty insertion cavity (degenerate input)")
        seen = {}
        for t in cavity:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(e), max(e))
                if key in seen:
                    seen[key] = None    # interior edge, seen twice
                else:
                    seen[key] = e
        cavity_set = set(cavity)
        triangles = [t for t in triangles if t not in cavity_set]
        for e in seen.values():
            if e is None:
                continue
            i, j = e
            if _orient(p, all_pts[i], all_pts[j]) > 0:
                triangles.append((p_idx, i, j))
            else:
                triangles.append((p_idx, j, i))

    triangles = [t for t in triangles if max(t) < n]
    triangles = [t for t in triangles
                 if abs(_orient(pts[t[0]], pts[t[1]], pts[t[2]])) > _EPS]
    if not triangles:
        raise ValueError("points are collinear")
    triangles = _canonical_ties(triangles, pts)

    tri_arr = []
    for t in triangles:
        t = tuple(sorted(t))
        if _orient(pts[t[0]], pts[t[1]], pts[t[2]]) < 0:
            t = (t[0], t[2], t[1])
        tri_arr.append(t)
    tri_arr.sort()
    tri = Triangulation(pts_in, np.asarray(tri_arr, dtype=np.int64), lo, scale)
    _verify_delaunay(tri)
    return tri


def _canonical_ties(triangles, pts):
    """Flip cocircular quadrilaterals onto their preferred diagonal.

    Each flip strictly decreases the multiset of diagonal keys, so the
    sweep terminates; the cap is a safety net only.
    """
    tris = [tuple(t) for t in triangles]
    for _ in range(64):
        edge_map = {}
        for idx, t in enumerate(tris):
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                edge_map.setdefault((min(e), max(e)), []).append(idx)
        flipped = False
        for edge, owners in edge_map.items():
            if len(owners) != 2:
                continue
            i1, i2 = owners
            t1, t2 = tris[i1], tris[i2]
            a, b = edge
            c = next(v for v in t1 if v not in edge)
            d = next(v for v in t2 if v not in edge)
            det = _incircle(pts[t1[0]], pts[t1[1]], pts[t1[2]], pts[d])
            if _orient(pts[t1[0]], pts[t1[1]], pts[t1[2]]) < 0:
                det = -det
            if abs(det) > _EPS:
                continue
            if _diagonal_key(c, d, pts) >= _diagonal_key(a, b, pts):
                continue
            # Flip only across a strictly convex quadrilateral.
            if _orient(pts[c], pts[d], pts[a]) * _orient(pts[c], pts[d], pts[b]) >= 0:
                continue
            tris[i1] = (c, d, a)
            tris[i2] = (d, c, b)
            flipped = True
            break
        if not flipped:
            return tris
    return tris


def _verify_delaunay(tri: Triangulation, tol: float = _EPS):
    """Brute-force empty-circumcircle audit (ties allowed)."""
    pts = tri.points_norm
    for t in tri.triangles:
        a, b, c = pts[t[0]], pts[t[1]], pts[t[2]]
        for q in range(len(pts)):
            if q in t:
                continue
            if _incircle(a, b, c, pts[q]) > tol:
                raise RuntimeError(
                    f"triangle {tuple(t)} circumcircle strictly contains point {q}")


@dataclass(frozen=True)
class TimePartition:
    """Uniform slabs of steps_per_slab solver steps; slab 0 holds only step 0.

    Slab m > 0 owns steps n in [slab_start(m), slab_start(m+1)), i.e.
    [1 + s (m-1), 1 + s m) for s = steps_per_slab.
    """

    dt: float = 0.0125
    steps_per_slab: int = 20

    def __post_init__(self):
        if self.steps_per_slab < 1:
            raise ValueError("steps_per_slab must be >= 1")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")

    def time_slab(self, n: int) -> int:
        """Slab index owning step n."""
        if n < 0:
            raise ValueError(f"negative step index {n}")
        if n == 0:
            return 0
        return 1 + (n - 1) // self.steps_per_slab

    def slab_start(self, m: int) -> int:
        """First step index of slab m."""
        if m < 0:
            raise ValueError(f"negative slab index {m}")
        if m == 0:
            return 0
        return 1 + self.steps_per_slab * (m - 1)

    def n_slabs(self, n_final: int) -> int:
        """Number of stepping slabs (1..m_max) needed to cover steps <= n_final."""
        return self.time_slab(n_final)


@dataclass(frozen=True)
class Element:
    """One parameter-time element: triangle ell x time slab m."""

    ell: int
    m: int
    vertex_ids: tuple[int, int, int]
    vertices: tuple[ParamPoint, ParamPoint, ParamPoint]
    step_lo: int
    step_hi: int
    dt: float

    @property
    def t_lo(self) -> float:
        return self.step_lo * self.dt

    @property
    def t_hi(self) -> float:
        return self.step_hi * self.dt

    @property
    def nodes(self) -> list[tuple[ParamPoint, int]]:
        """The six prism nodes as (vertex, step) pairs, lower level first."""
        return [(v, s) for s in (self.step_lo, self.step_hi) for v in self.vertices]


def element(tri: Triangulation, part: TimePartition, ell: int, m: int) -> Element:
    if m < 1:
        raise ValueError("stepping elements start at slab m = 1")
    ids = tuple(int(v) for v in tri.triangles[ell])
    return Element(
        ell=ell,
        m=m,
        vertex_ids=ids,
        vertices=tuple(ParamPoint(*tri.points[v]) for v in ids),
        step_lo=part.slab_start(m),
        step_hi=part.slab_start(m + 1),
        dt=part.dt,
    )


def barycentric(tri: Triangulation, elem: Element, mu, t: float,
                tol: float = _EPS) -> np.ndarray:
    """Interpolation weights of (mu, t) over the element's six nodes.

    Triangle barycentric coordinates (normalized parameter coordinates)
    tensorized with linear weights in t; order matches Element.nodes.
    Tiny negative coordinates within tol are clamped and the weights are
    renormalized to sum to one.
    """
    lam = tri.barycentric_in(elem.ell, mu)
    if np.any(lam < -tol):
        raise ValueError(f"parameter {tuple(np.asarray(mu, float))} outside "
                         f"triangle {elem.ell}")
    span = elem.t_hi - elem.t_lo
    theta = (t - elem.t_lo) / span
    if theta < -tol or theta > 1.0 + tol:
        raise ValueError(f"time {t} outside slab [{elem.t_lo}, {elem.t_hi}]")
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    theta = min(max(theta, 0.0), 1.0)
    w = np.concatenate([(1.0 - theta) * lam, theta * lam])
    return w / w.sum()
