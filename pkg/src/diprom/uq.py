"""Monte-Carlo uncertainty quantification over the reduced model.

Provides the statistics layer: counter-based uniform parameter sampling
(thread- and order-independent), pointwise relative error between full
and reduced trajectories, per-triangle field statistics, shock
location/height quantities of interest, 2-D kernel density estimates,
bivariate polynomial surrogates, and sliding-window correlations.  All
routines are deterministic for fixed inputs; only relative-error
validation paths ever touch the full-order solver, and that happens in
the drivers, never here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SignatureMismatch
from .hfm import Grid1D, PARAM_BOX, ParamPoint, Snapshot, Trajectory
from .transport import DERIVATIVE_TOL, decompose, differentiate

#: Decomposition tolerances tried in order when extracting shock QoIs from
#: reconstructed (mildly oscillatory) states.
SHOCK_TOL_LADDER = (1e-8, 1e-5, 1e-3, 3e-3, 1e-2)

#: Cells with a smaller full-order magnitude are skipped in relative errors.
RELATIVE_ERROR_FLOOR = 1e-13

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class QoiSample:
    """Shock quantities of one parameter sample at the QoI time."""

    mu: ParamPoint
    shock_location: float
    shock_height: float
    e_rel: float | None = None

    def __post_init__(self):
        if not self.shock_height >= 0.0:
            raise ValueError(
                f"shock height must be nonnegative, got {self.shock_height}")


@dataclass(frozen=True)
class Kde2D:
    """Product-Gaussian kernel density estimate on a regular grid."""

    x: np.ndarray              # (nx,) grid over the first quantity
    y: np.ndarray              # (ny,) grid over the second quantity
    density: np.ndarray        # (ny, nx), nonnegative, integrates to 1
    bandwidth: tuple[float, float]

    def integral(self) -> float:
        return float(_trapezoid(_trapezoid(self.density, self.x, axis=1),
                                self.y))


@dataclass(frozen=True)
class Poly2Surrogate:
    """Least-squares bivariate polynomial on box-normalized parameters."""

    degree: int
    powers: tuple                  # ((a, b), ...) exponent pairs
    coefficients: np.ndarray       # one per power pair
    r2: float
    box: tuple                     # normalization box ((a1,b1),(a2,b2))

    @property
    def n_coefficients(self) -> int:
        return len(self.coefficients)

    def __call__(self, mu1, mu2) -> np.ndarray | float:
        s1, s2 = _normalize(np.asarray(mu1, float), np.asarray(mu2, float),
                            self.box)
        out = np.zeros(np.broadcast(s1, s2).shape)
        for (a, b), c in zip(self.powers, self.coefficients):
            out += c * s1 ** a * s2 ** b
        return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_uniform(n: int, seed: int, box=PARAM_BOX) -> list[ParamPoint]:
    """n i.i.d. uniform parameter points from a counter-based generator.

    Sample i is drawn from a fresh Philox stream keyed by (seed, i), so
    the i-th point is the same no matter how many samples are drawn, in
    what order, or across how many workers.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    (a1, b1), (a2, b2) = box
    out = []
    for i in range(n):
        gen = np.random.Generator(
            np.random.Philox(key=np.array([seed, i], dtype=np.uint64)))
        u1, u2 = gen.random(2)
        out.append(ParamPoint(a1 + u1 * (b1 - a1), a2 + u2 * (b2 - a2)))
    return out


# ---------------------------------------------------------------------------
# error metric
# ---------------------------------------------------------------------------

def relative_error(hfm_traj: Trajectory, rom_traj: Trajectory,
                   floor: float = RELATIVE_ERROR_FLOOR) -> float:
    """Max over recorded steps > 0 and cells of |u_ref - u|/|u_ref|.

    Cells where the reference magnitude is below `floor` are skipped (the
    initial state is identically zero, so step 0 is excluded by
    construction).  Both trajectories must live on the same grid and time
    step and share recorded steps beyond step 0.
    """
    if hfm_traj.grid != rom_traj.grid or hfm_traj.dt != rom_traj.dt:
        raise ValueError("trajectory mismatch: different grid or time step")
    common, ia, ib = np.intersect1d(hfm_traj.steps, rom_traj.steps,
                                    return_indices=True)
    keep = common > 0
    if not np.any(keep):
        raise ValueError("trajectory mismatch: no common recorded steps > 0")
    ref = hfm_traj.states[ia[keep]]
    test = rom_traj.states[ib[keep]]
    ok = np.abs(ref) >= floor
    if not np.any(ok):
        return 0.0
    return float((np.abs(ref - test)[ok] / np.abs(ref)[ok]).max())


# ---------------------------------------------------------------------------
# field statistics
# ---------------------------------------------------------------------------

def field_statistics(states) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise sample mean and unbiased variance of ≥2 states.

    Accepts a list of Snapshots or a 2-d array with one state per row.
    """
    rows = [s.cells if isinstance(s, Snapshot) else np.asarray(s, float)
            for s in states]
    if len(rows) < 2:
        raise ValueError("need at least 2 states for statistics")
    a = np.vstack(rows)
    return a.mean(axis=0), a.var(axis=0, ddof=1)


# ---------------------------------------------------------------------------
# shock quantities of interest
# ---------------------------------------------------------------------------

def shock_qois(s: Snapshot, grid: Grid1D,
               tol_rel: float = DERIVATIVE_TOL) -> tuple[float, float]:
    """Shock location and height of a [+,-,+]-signature state.

    The state's derivative must decompose into exactly three pieces with
    signs [+,-,+]; the middle (negative) piece is the shock.  Location is
    its mass centroid, height the magnitude of the drop across it.
    """
    pieces = decompose(differentiate(s, grid), tol_rel)
    if tuple(p.sign for p in pieces) != (1, -1, 1):
        raise SignatureMismatch(
            "no unique shock piece: signature "
            f"{tuple(p.sign for p in pieces)} is not (+, -, +)")
    shock = pieces[1]
    return shock.centroid, abs(shock.mass)


def shock_qois_robust(s: Snapshot, grid: Grid1D,
                      ladder=SHOCK_TOL_LADDER) -> tuple[float, float]:
    """shock_qois under a deterministic tolerance ladder.

    Reconstructed states carry small projection wiggles that can split
    pieces at tight tolerances; coarser tolerances in the fixed ladder
    absorb them.  The first tolerance that yields the (+, -, +) signature
    wins; failing all, the last error propagates.
    """
    last: SignatureMismatch | None = None
    for tol in ladder:
        try:
            return shock_qois(s, grid, tol)
        except SignatureMismatch as exc:
            last = exc
    raise last if last is not None else SignatureMismatch("empty ladder")


# ---------------------------------------------------------------------------
# kernel density estimate
# ---------------------------------------------------------------------------

def kde2d(x_samples, y_samples, nx: int = 64, ny: int = 64,
          pad_bandwidths: float = 3.0) -> Kde2D:
    """Product-Gaussian KDE with Scott's rule bandwidths.

    Bandwidth per dimension is sigma_d * n^(-1/6); the evaluation grid
    spans the data range padded by pad_bandwidths bandwidths and the
    density is renormalized so its grid trapezoid integral is exactly 1.
    """
    xs = np.asarray(x_samples, dtype=float)
    ys = np.asarray(y_samples, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
        raise ValueError("need two equal-length 1-d sample vectors, n >= 2")
    n = len(xs)
    sx = xs.std(ddof=1)
    sy = ys.std(ddof=1)
    if sx == 0.0 or sy == 0.0:
        raise ValueError("degenerate (zero-variance) dimension")
    hx = sx * n ** (-1.0 / 6.0)
    hy = sy * n ** (-1.0 / 6.0)
    gx = np.linspace(xs.min() - pad_bandwidths * hx,
                     xs.max() + pad_bandwidths * hx, nx)
    gy = np.linspace(ys.min() - pad_bandwidths * hy,
                     ys.max() + pad_bandwidths * hy, ny)
    kx = np.exp(-0.5 * ((gx[:, None] - xs[None, :]) / hx) ** 2)
    ky = np.exp(-0.5 * ((gy[:, None] - ys[None, :]) / hy) ** 2)
    density = (ky @ kx.T) / (n * 2.0 * np.pi * hx * hy)
    integral = float(_trapezoid(_trapezoid(density, gx, axis=1), gy))
    if integral <= 0.0:
        raise ValueError("KDE mass vanished on the evaluation grid")
    return Kde2D(x=gx, y=gy, density=density / integral,
                 bandwidth=(float(hx), float(hy)))


# ---------------------------------------------------------------------------
# polynomial surrogate
# ---------------------------------------------------------------------------

def _normalize(mu1, mu2, box):
    (a1, b1), (a2, b2) = box
    return (2.0 * (mu1 - a1) / (b1 - a1) - 1.0,
            2.0 * (mu2 - a2) / (b2 - a2) - 1.0)


def monomial_powers(degree: int) -> tuple:
    """All (a, b) with a + b <= degree, graded, mu1-major within a grade."""
    return tuple((a, total - a) for total in range(degree + 1)
                 for a in range(total, -1, -1))


def polyfit2d(mus, values, degree: int = 5,
              box=PARAM_BOX) -> Poly2Surrogate:
    """Least-squares bivariate polynomial fit on box-normalized inputs.

    Solved through an orthogonal factorization (never the normal
    equations), so conditioning is governed by the design matrix itself.
    A rank-deficient design (collinear samples) is an error.
    """
    mu_arr = np.array([[p.mu1, p.mu2] if isinstance(p, ParamPoint)
                       else [p[0], p[1]] for p in mus], dtype=float)
    y = np.asarray(values, dtype=float)
    powers = monomial_powers(degree)
    if len(y) != len(mu_arr):
        raise ValueError("sample and value counts differ")
    if len(y) < len(powers):
        raise ValueError(
            f"need at least {len(powers)} samples for degree {degree}, "
            f"got {len(y)}")
    s1, s2 = _normalize(mu_arr[:, 0], mu_arr[:, 1], box)
    design = np.column_stack([s1 ** a * s2 ** b for a, b in powers])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < len(powers):
        raise ValueError(
            f"rank-deficient design (rank {rank} < {len(powers)}): "
            "samples are collinear or degenerate")
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot > 0.0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    return Poly2Surrogate(degree=degree, powers=powers, coefficients=coef,
                          r2=r2, box=box)


# ---------------------------------------------------------------------------
# correlation windows
# ---------------------------------------------------------------------------

def sliding_correlation(primary, secondary, window: int | None = None,
                        min_window: int = 20) -> list[dict]:
    """Pearson correlation of two quantities in windows sorted by the first.

    Windows overlap by half their width.  Windows where either quantity
    is constant are skipped (correlation undefined).
    """
    a = np.asarray(primary, dtype=float)
    b = np.asarray(secondary, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-d vectors")
    n = len(a)
    if window is None:
        window = max(min_window, n // 5)
    if n < window:
        return []
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    out = []
    stride = max(1, window // 2)
    starts = list(range(0, n - window + 1, stride))
    if starts and starts[-1] != n - window:
        starts.append(n - window)
    for lo in starts:
        wa = a[lo:lo + window]
        wb = b[lo:lo + window]
        if wa.std() == 0.0 or wb.std() == 0.0:
            continue
        corr = float(np.corrcoef(wa, wb)[0, 1])
        out.append({
            "lo": float(wa[0]), "hi": float(wa[-1]),
            "center": float(wa.mean()), "n": int(window),
            "correlation": corr,
        })
    return out
