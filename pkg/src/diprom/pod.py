"""Second-stage dimensionality reduction of the local bases.

Reduced coefficient trajectories collected from sweeps over many
parameters are compressed per element by POD: singular values come from
the method of snapshots (eigendecomposition of the smaller Gram matrix by
cyclic Jacobi), truncation keeps the modes with sigma_n / sigma_1 above a
threshold, and the kept modes compose with the element's basis into a
smaller orthonormal basis.  No high-fidelity solves are involved.
"""
from __future__ import annotations

import numpy as np

from .basis import LocalBasis
from .hfm import ParamPoint

#: Default truncation threshold on sigma_n / sigma_1.
POD_THRESHOLD = 1e-8

#: Default number of sweep parameter samples.
SWEEP_SAMPLES = 200


def jacobi_eigh(a: np.ndarray, tol_factor: float = 1e-14,
                max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric PSD matrix by cyclic Jacobi.

    Sweeps Givens rotations over all upper off-diagonal entries until
    their Frobenius norm falls below tol_factor times the trace.  Returns
    eigenvalues in descending order with their eigenvector columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    if n > 1:
        threshold = tol_factor * max(abs(np.trace(a)), np.finfo(float).tiny)
        for _ in range(max_sweeps):
            off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)
            if off <= threshold:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if abs(apq) <= threshold / (n * n):
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = np.sign(theta) if theta != 0 else 1.0
                    t = t / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    rp, rq = a[p, :].copy(), a[q, :].copy()
                    a[p, :] = c * rp - s * rq
                    a[q, :] = s * rp + c * rq
                    cp, cq = a[:, p].copy(), a[:, q].copy()
                    a[:, p] = c * cp - s * cq
                    a[:, q] = s * cp + c * cq
                    vp, vq = v[:, p].copy(), v[:, q].copy()
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq
    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    return lam[order], v[:, order]


def svd_spectrum(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values and left vectors by the method of snapshots.

    The Gram matrix is formed on the smaller side of a (rows or columns)
    and diagonalized by cyclic Jacobi; left vectors get a deterministic
    sign (largest-magnitude entry positive).  Returns (sigma descending,
    left vectors as columns), keeping only sigma > 0 vectors.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("need a nonempty 2-d matrix")
    rows, cols = a.shape
    if rows <= cols:
        lam, vecs = jacobi_eigh(a @ a.T)
        sigma = np.sqrt(np.clip(lam, 0.0, None))
        left = vecs
    else:
        lam, vecs = jacobi_eigh(a.T @ a)
        sigma = np.sqrt(np.clip(lam, 0.0, None))
        keep = sigma > 0
        left = np.zeros((rows, len(sigma)))
        if np.any(keep):
            left[:, keep] = (a @ vecs[:, keep]) / sigma[keep]
    # deterministic sign: largest-magnitude entry of each vector positive
    for j in range(left.shape[1]):
        i = int(np.argmax(np.abs(left[:, j])))
        if left[i, j] < 0:
            left[:, j] = -left[:, j]
    return sigma, left


def pod_truncate(sigma: np.ndarray, left: np.ndarray,
                 threshold: float = POD_THRESHOLD) -> tuple[int, np.ndarray]:
    """Keep the modes with sigma_n / sigma_1 > threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    sigma = np.asarray(sigma, dtype=float)
    if len(sigma) == 0 or sigma[0] <= 0.0:
        raise ValueError("all-zero snapshot matrix has no POD modes")
    k = int(np.sum(sigma / sigma[0] > threshold))
    return k, left[:, :k]


def reduce_basis(basis: LocalBasis, snapshot_matrix: np.ndarray,
                 threshold: float = POD_THRESHOLD) -> LocalBasis:
    """Compose a POD truncation of coefficient snapshots with the basis."""
    if snapshot_matrix.shape[0] != basis.n_functions:
        raise ValueError("snapshot rows must match basis size")
    sigma, left = svd_spectrum(snapshot_matrix)
    k, modes = pod_truncate(sigma, left, threshold)
    return LocalBasis(
        ell=basis.ell, m=basis.m, w=basis.w @ modes, dx=basis.dx,
        signature=basis.signature, fallback=basis.fallback,
        n_candidates=basis.n_candidates,
    )


def collect_sweep(db, params: list[ParamPoint],
                  t_final: float = 12.0) -> dict[tuple[int, int], np.ndarray]:
    """Coefficient snapshot matrices per element from ROM sweeps.

    Runs rom_solve for each parameter and appends every post-step
    coefficient vector to its element's matrix.  Samples are processed
    grouped by triangle (operator reuse) but columns are assembled in
    sample order, so the result is independent of processing order and
    thread count.  No high-fidelity solves happen on this path.
    """
    from .rom import rom_solve

    locations = [db.triangulation.locate((p.mu1, p.mu2)) for p in params]
    per_sample: dict[int, dict[tuple[int, int], list[np.ndarray]]] = {}
    order = sorted(range(len(params)), key=lambda i: (locations[i], i))
    for i in order:
        boxes: dict[tuple[int, int], list[np.ndarray]] = {}
        ell = locations[i]

        def collector(m, r, boxes=boxes, ell=ell):
            boxes.setdefault((ell, m), []).append(r.copy())

        rom_solve(db, params[i], t_final=t_final, record_stride=10 ** 9,
                  coeff_collector=collector)
        per_sample[i] = boxes

    out: dict[tuple[int, int], list[np.ndarray]] = {}
    for i in range(len(params)):
        for key, cols in per_sample[i].items():
            out.setdefault(key, []).extend(cols)
    return {key: np.column_stack(cols) for key, cols in out.items()}
