"""Pipeline drivers behind the CLI subcommands.

run_offline builds the artifact store (anchor solves, triangulation,
per-element signature checks, local bases, projected operators, index,
manifest).  run_pod performs the second-stage reduction in place.
run_online solves one parameter point against a store, optionally
cross-checking the full-order model.  run_uq is the Monte-Carlo driver;
run_report renders store-level summaries.  Every driver is deterministic
for a fixed configuration: artifact bytes, manifests, and summaries
contain no timestamps, absolute paths, or run-dependent state.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import uq
from .basis import (LocalBasis, build_local_basis, check_signature_condition,
                    sample_element, transition_matrix)
from .config import PipelineConfig
from .errors import SignatureMismatch
from .hfm import HfmConfig, ParamPoint, Trajectory, solve
from .param_space import element, delaunay
from .pod import collect_sweep, pod_truncate, svd_spectrum
from .rom import (assemble_operators, build_source_matrix, rom_solve)
from .store import (OfflineStore, anchor_rel, basis_rel, ops_rel,
                    spectrum_rel, trajectory_csv, write_basis, write_json,
                    write_manifest, write_operators, write_trajectory,
                    MANIFEST_NAME)
from .svg import Figure


def _say(progress, msg: str) -> None:
    if progress is not None:
        progress(msg)


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# offline build
# ---------------------------------------------------------------------------

def hfm_horizon_steps(cfg: PipelineConfig) -> int:
    """Steps the anchors must be solved for: through the last slab's
    closing node level (one step past the stepping horizon)."""
    return cfg.partition().slab_start(cfg.n_slabs + 1)


def run_offline(cfg: PipelineConfig, root, progress=None) -> dict:
    """Build a complete artifact store under root; returns a build report.

    Elements whose node snapshots fail the common-signature condition are
    reported and still get a grouped-interpolation basis enriched with
    anchor states from inside the slab.  If basis construction fails
    outright, the element is excluded and the triangle's covered horizon
    is truncated just before it.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    part = cfg.partition()
    anchors = cfg.anchor_points()
    artifacts: list[str] = []

    n_steps = hfm_horizon_steps(cfg)
    trajs: list[Trajectory] = []
    _say(progress, f"solving {len(anchors)} anchor trajectories "
                   f"({n_steps} steps each)")
    for i, mu in enumerate(anchors):
        traj = solve(HfmConfig(mu=mu, grid=grid, dt=cfg.dt,
                               t_final=n_steps * cfg.dt,
                               source_coeff=cfg.source_coeff),
                     n_steps=n_steps)
        write_trajectory(root / anchor_rel(i), traj)
        artifacts.append(anchor_rel(i))
        trajs.append(traj)

    tri = delaunay([[p.mu1, p.mu2] for p in anchors])
    write_json(root / "triangulation.json", {
        "points": [[float(p.mu1), float(p.mu2)] for p in anchors],
        "triangles": [[int(v) for v in t] for t in tri.triangles],
    })
    artifacts.append("triangulation.json")
    _say(progress, f"triangulated {len(anchors)} anchors into "
                   f"{tri.n_triangles} triangles")

    elements: dict[str, dict] = {}
    horizon: dict[str, int] = {}
    fallback_elements: list[list[int]] = []
    excluded_elements: list[dict] = []
    for ell in range(tri.n_triangles):
        prev_basis: LocalBasis | None = None
        horizon[str(ell)] = 0
        for m in range(1, cfg.n_slabs + 1):
            elem = element(tri, part, ell, m)
            snaps = [trajs[v].at_step(s)
                     for s in (elem.step_lo, elem.step_hi)
                     for v in elem.vertex_ids]
            report = check_signature_condition(snaps, grid,
                                               cfg.derivative_tol)
            extras = []
            if not report.ok:
                for vid in elem.vertex_ids:
                    for s in range(elem.step_lo + cfg.extra_stride,
                                   elem.step_hi, cfg.extra_stride):
                        extras.append(trajs[vid].at_step(s))
            try:
                basis = build_local_basis(
                    tri, elem, snaps, grid,
                    samples=sample_element(tri, elem, cfg.p_t, cfg.p1,
                                           cfg.p2),
                    k=cfg.quantile_levels, tol_rel=cfg.derivative_tol,
                    gs_tol=cfg.gs_tol,
                    extra_snapshots=extras or None)
            except (SignatureMismatch, ValueError) as exc:
                excluded_elements.append(
                    {"ell": ell, "m": m, "reason": str(exc)})
                _say(progress, f"element ({ell}, {m}) excluded: {exc}; "
                               f"triangle {ell} horizon truncated at slab "
                               f"{m - 1}")
                break
            boundary = 0.5 * grid.dx * basis.w[0, :].copy()
            source = build_source_matrix(basis.w, grid, cfg.source_terms,
                                         cfg.source_coeff)
            transition = None if prev_basis is None \
                else transition_matrix(prev_basis, basis)
            write_basis(root / basis_rel(ell, m), basis)
            write_operators(root / ops_rel(ell, m), ell, m, boundary,
                            source, transition, None)
            artifacts += [basis_rel(ell, m), ops_rel(ell, m)]
            elements[f"{ell},{m}"] = {
                "n_functions": basis.n_functions,
                "fallback": basis.fallback,
                "reduced": False,
                "n_candidates": basis.n_candidates,
                "signature_ok": report.ok,
            }
            if basis.fallback:
                fallback_elements.append([ell, m])
            horizon[str(ell)] = m
            prev_basis = basis
        _say(progress, f"triangle {ell}: built slabs 1..{horizon[str(ell)]}")

    index = {
        "anchors": [[float(p.mu1), float(p.mu2)] for p in anchors],
        "horizon_slabs": horizon,
        "elements": elements,
        "fallback_elements": sorted(fallback_elements),
        "excluded_elements": excluded_elements,
        "pod": None,
    }
    write_json(root / "index.json", index)
    artifacts.append("index.json")
    (root / "config.ini").write_text(cfg.to_ini())
    artifacts.append("config.ini")
    write_manifest(root, artifacts)
    _say(progress, f"store complete: {len(artifacts)} artifacts, "
                   f"{len(fallback_elements)} fallback elements, "
                   f"{len(excluded_elements)} excluded")
    return {
        "n_anchors": len(anchors),
        "n_triangles": tri.n_triangles,
        "n_elements": len(elements),
        "horizon_slabs": horizon,
        "fallback_elements": sorted(fallback_elements),
        "excluded_elements": excluded_elements,
    }


# ---------------------------------------------------------------------------
# POD reduction
# ---------------------------------------------------------------------------

def run_pod(root, samples: int | None = None, seed: int | None = None,
            threshold: float | None = None, t_final: float | None = None,
            progress=None) -> dict:
    """Second-stage reduction of a store, in place.

    Collects reduced-coefficient snapshots from ROM sweeps (no full-order
    solves), computes per-element POD, rewrites basis/operator files with
    the truncated bases (reduced flag set, flux tensor now stored), and
    emits one spectrum CSV per element.  A horizon shorter than the
    store's is allowed: the first untouched slab's transition matrix is
    rebuilt so unreduced later slabs keep chaining correctly.
    """
    root = Path(root)
    store = OfflineStore(root)
    cfg = store.config
    grid = store.grid
    n = cfg.sweep_samples if samples is None else samples
    sd = cfg.sweep_seed if seed is None else seed
    thr = cfg.pod_threshold if threshold is None else threshold
    t_end = cfg.t_final if t_final is None else t_final

    _say(progress, f"sweeping {n} parameter samples to t = {t_end}")
    params = uq.sample_uniform(n, sd, box=store.param_box)
    mats = collect_sweep(store, params, t_final=t_end)

    old_manifest = json.loads((root / MANIFEST_NAME).read_text())
    artifacts = set(old_manifest["artifacts"])
    per_element_k: dict[str, int] = {}
    index = store.index
    for ell in range(store.n_triangles):
        covered = store.covered_slabs(ell)
        prev_reduced: LocalBasis | None = None
        m_last = 0
        for m in range(1, covered + 1):
            key = (ell, m)
            if key not in mats:
                break
            basis = store.basis(*key)
            sigma, left = svd_spectrum(mats[key])
            k, modes = pod_truncate(sigma, left, thr)
            reduced = LocalBasis(
                ell=ell, m=m, w=basis.w @ modes, dx=basis.dx,
                signature=basis.signature, fallback=basis.fallback,
                n_candidates=basis.n_candidates)
            ops = assemble_operators(reduced, grid, prev_basis=prev_reduced,
                                     q_terms=cfg.source_terms,
                                     source_coeff=cfg.source_coeff)
            write_basis(root / basis_rel(ell, m), reduced, reduced=True)
            write_operators(root / ops_rel(ell, m), ell, m, ops.boundary,
                            ops.source, ops.transition, ops.flux)
            lines = ["n,sigma,ratio"]
            for j, s in enumerate(sigma):
                ratio = s / sigma[0] if sigma[0] > 0 else 0.0
                lines.append(f"{j + 1},{_fmt(s)},{_fmt(ratio)}")
            (root / spectrum_rel(ell, m)).parent.mkdir(parents=True,
                                                       exist_ok=True)
            (root / spectrum_rel(ell, m)).write_text("\n".join(lines) + "\n")
            artifacts.add(spectrum_rel(ell, m))
            rec = index["elements"][f"{ell},{m}"]
            rec["n_functions"] = k
            rec["reduced"] = True
            per_element_k[f"{ell},{m}"] = k
            prev_reduced = reduced
            m_last = m
        if 0 < m_last < covered:
            # bridge into the first slab the sweep did not reach
            nxt = store.basis(ell, m_last + 1)
            bridge = transition_matrix(prev_reduced, nxt)
            boundary = 0.5 * grid.dx * nxt.w[0, :].copy()
            source = build_source_matrix(nxt.w, grid, cfg.source_terms,
                                         cfg.source_coeff)
            write_operators(root / ops_rel(ell, m_last + 1), ell, m_last + 1,
                            boundary, source, bridge, None)
        _say(progress, f"triangle {ell}: reduced slabs 1..{m_last}")

    index["pod"] = {"samples": n, "seed": sd, "threshold": thr,
                    "t_final": t_end, "k": per_element_k}
    write_json(root / "index.json", index)
    write_manifest(root, sorted(artifacts))
    return {"reduced_elements": len(per_element_k),
            "k": per_element_k,
            "max_k": max(per_element_k.values()) if per_element_k else 0}


# ---------------------------------------------------------------------------
# single-point online solve
# ---------------------------------------------------------------------------

def run_online(root, mu: ParamPoint, out_dir, t_final: float | None = None,
               hfm_check: bool = False, plot_times: int = 6,
               progress=None) -> dict:
    """Reduced solve of one parameter point; optional full-order check.

    Writes the reduced trajectory (binary and CSV), a report JSON, and --
    when the cross-check runs -- a per-step error CSV and an overlay plot
    of both solutions at equispaced times.
    """
    store = OfflineStore(root)
    cfg = store.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_end = cfg.t_final if t_final is None else t_final

    mu.require_in_box(store.param_box)
    res = rom_solve(store, mu, t_final=t_end, record_stride=1)
    traj = res.trajectory
    write_trajectory(out / "rom.traj", traj)
    (out / "rom.csv").write_text(trajectory_csv(traj))
    report = {
        "mu": [mu.mu1, mu.mu2],
        "t_final": t_end,
        "triangle": res.ell,
        "slabs": list(res.slabs),
        "basis_sizes": list(res.basis_sizes),
    }

    if hfm_check:
        _say(progress, "running the full-order cross-check")
        hfm_traj = solve(HfmConfig(mu=mu, grid=store.grid, dt=store.dt,
                                   t_final=t_end,
                                   source_coeff=cfg.source_coeff))
        e_rel = uq.relative_error(hfm_traj, traj)
        report["e_rel_max_pointwise"] = e_rel

        lines = ["step,t,max_abs_error,max_rel_error"]
        for i, step in enumerate(hfm_traj.steps):
            if step == 0:
                continue
            ref = hfm_traj.states[i]
            tst = traj.at_step(int(step)).cells
            abs_err = float(np.abs(ref - tst).max())
            ok = np.abs(ref) >= uq.RELATIVE_ERROR_FLOOR
            rel_err = float((np.abs(ref - tst)[ok] / np.abs(ref)[ok]).max()) \
                if np.any(ok) else 0.0
            lines.append(f"{int(step)},{_fmt(step * store.dt)},"
                         f"{_fmt(abs_err)},{_fmt(rel_err)}")
        (out / "errors.csv").write_text("\n".join(lines) + "\n")

        fig = Figure(title=f"mu = ({mu.mu1:.4f}, {mu.mu2:.4f})",
                     xlabel="x", ylabel="u")
        n_steps = int(round(t_end / store.dt))
        marks = [max(1, round(j * n_steps / plot_times))
                 for j in range(1, plot_times + 1)]
        x = store.grid.centers
        for j, step in enumerate(marks):
            fig.add(x, traj.at_step(step).cells,
                    label=f"reduced t={step * store.dt:g}")
            fig.add(x, hfm_traj.at_step(step).cells, dash="4,3",
                    color="#404040",
                    label="full order" if j == 0 else "")
        fig.save(out / "overlay.svg")

    write_json(out / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# Monte-Carlo UQ driver
# ---------------------------------------------------------------------------

def run_uq(root, out_dir, samples: int | None = None,
           seed: int | None = None, with_hfm_check: bool = False,
           progress=None) -> dict:
    """Monte-Carlo sweep over the reduced model.

    Per sample: reduced solve to the horizon, shock QoIs at the QoI time
    (under the deterministic tolerance ladder), and optionally the
    pointwise relative error against a full-order solve.  Aggregates are
    written in sample-index order, so results do not depend on the
    processing schedule.
    """
    store = OfflineStore(root)
    cfg = store.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = cfg.uq_samples if samples is None else samples
    sd = cfg.uq_seed if seed is None else seed

    params = uq.sample_uniform(n, sd, box=store.param_box)
    locations = [store.triangulation.locate((p.mu1, p.mu2)) for p in params]
    qoi_step = int(round(cfg.qoi_time / store.dt))

    qoi_states = np.empty((n, store.grid.n_cells))
    shock_loc = np.full(n, np.nan)
    shock_h = np.full(n, np.nan)
    e_rel = np.full(n, np.nan)
    order = sorted(range(n), key=lambda i: (locations[i], i))
    for count, i in enumerate(order):
        res = rom_solve(store, params[i], t_final=cfg.t_final,
                        record_stride=1)
        snap = res.trajectory.at_step(qoi_step)
        qoi_states[i] = snap.cells
        try:
            shock_loc[i], shock_h[i] = uq.shock_qois_robust(snap, store.grid)
        except SignatureMismatch:
            pass
        if with_hfm_check:
            hfm_traj = solve(HfmConfig(mu=params[i], grid=store.grid,
                                       dt=store.dt, t_final=cfg.t_final,
                                       source_coeff=cfg.source_coeff))
            e_rel[i] = uq.relative_error(hfm_traj, res.trajectory)
        if progress is not None and (count + 1) % 50 == 0:
            _say(progress, f"  {count + 1}/{n} samples")

    ok = ~np.isnan(shock_loc)
    n_ok = int(ok.sum())

    # sample table
    header = "index,mu1,mu2,triangle,shock_location,shock_height"
    if with_hfm_check:
        header += ",e_rel"
    rows = [header]
    for i, p in enumerate(params):
        row = f"{i},{_fmt(p.mu1)},{_fmt(p.mu2)},{locations[i]}"
        row += f",{_fmt(shock_loc[i]) if ok[i] else ''}"
        row += f",{_fmt(shock_h[i]) if ok[i] else ''}"
        if with_hfm_check:
            row += f",{_fmt(e_rel[i])}"
        rows.append(row)
    (out / "samples.csv").write_text("\n".join(rows) + "\n")

    summary: dict = {
        "n_samples": n,
        "seed": sd,
        "qoi_time": cfg.qoi_time,
        "qoi_failures": int(n - n_ok),
    }
    if n_ok >= 2:
        summary["shock_location"] = {
            "mean": float(shock_loc[ok].mean()),
            "var": float(shock_loc[ok].var(ddof=1)),
        }
        summary["shock_height"] = {
            "mean": float(shock_h[ok].mean()),
            "var": float(shock_h[ok].var(ddof=1)),
        }
        summary["correlation_windows"] = uq.sliding_correlation(
            shock_loc[ok], shock_h[ok])
    if with_hfm_check:
        checked = e_rel[~np.isnan(e_rel)]
        summary["e_rel"] = {
            "mean": float(checked.mean()),
            "var": float(checked.var(ddof=1)) if len(checked) > 1 else 0.0,
            "max": float(checked.max()),
        }

    # surrogates
    ok_params = [params[i] for i in range(n) if ok[i]]
    for name, vals in (("location", shock_loc[ok]),
                       ("height", shock_h[ok])):
        if n_ok >= 21:
            fit = uq.polyfit2d(ok_params, vals, degree=5,
                               box=store.param_box)
            summary[f"r2_{name}"] = fit.r2
            summary[f"coefficients_{name}"] = [float(c)
                                               for c in fit.coefficients]

    # KDE of the joint (location, height) density
    if n_ok >= 2 and shock_loc[ok].std() > 0 and shock_h[ok].std() > 0:
        kde = uq.kde2d(shock_loc[ok], shock_h[ok])
        summary["kde_bandwidth"] = [kde.bandwidth[0], kde.bandwidth[1]]
        lines = ["location,height,density"]
        for j, yv in enumerate(kde.y):
            for i2, xv in enumerate(kde.x):
                lines.append(f"{_fmt(xv)},{_fmt(yv)},"
                             f"{_fmt(kde.density[j, i2])}")
        (out / "kde.csv").write_text("\n".join(lines) + "\n")

    # per-triangle field statistics at the QoI time
    mean_fig = Figure(title="mean field at the QoI time", xlabel="x",
                      ylabel="mean u")
    var_fig = Figure(title="field variance at the QoI time", xlabel="x",
                     ylabel="var u")
    x = store.grid.centers
    for ell in range(store.n_triangles):
        members = [i for i in range(n) if locations[i] == ell]
        if len(members) < 2:
            continue
        mean, var = uq.field_statistics(qoi_states[members])
        lines = ["x,mean,var"]
        for i2 in range(len(x)):
            lines.append(f"{_fmt(x[i2])},{_fmt(mean[i2])},{_fmt(var[i2])}")
        (out / f"field_{ell}.csv").write_text("\n".join(lines) + "\n")
        mean_fig.add(x, mean, label=f"triangle {ell}")
        var_fig.add(x, var, label=f"triangle {ell}")
    mean_fig.save(out / "field_mean.svg")
    var_fig.save(out / "field_var.svg")

    scatter = Figure(title="shock quantities at the QoI time",
                     xlabel="shock location", ylabel="shock height")
    for ell in range(store.n_triangles):
        members = [i for i in range(n) if locations[i] == ell and ok[i]]
        if not members:
            continue
        scatter.add([shock_loc[i] for i in members],
                    [shock_h[i] for i in members],
                    label=f"triangle {ell}", marker=True)
    scatter.save(out / "scatter_qoi.svg")

    write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# store report
# ---------------------------------------------------------------------------

def run_report(root, out_dir, progress=None) -> dict:
    """Render store-level summaries: triangulation plot, basis-size table
    and growth plot, and a JSON overview."""
    store = OfflineStore(root)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tri = store.triangulation

    fig = Figure(title="parameter triangulation", xlabel="mu1",
                 ylabel="mu2")
    for ell, t in enumerate(tri.triangles):
        pts = [tri.points[t[0]], tri.points[t[1]], tri.points[t[2]],
               tri.points[t[0]]]
        fig.add([p[0] for p in pts], [p[1] for p in pts], color="#1f77b4")
    fig.add(tri.points[:, 0], tri.points[:, 1], marker=True,
            color="#d62728", label="anchors")
    fig.save(out / "triangulation.svg")

    lines = ["triangle,slab,n_functions,fallback,reduced"]
    growth = Figure(title="basis size per slab", xlabel="slab",
                    ylabel="basis size")
    for ell in range(store.n_triangles):
        ms = range(1, store.covered_slabs(ell) + 1)
        sizes = []
        for m in ms:
            rec = store.element_record(ell, m)
            sizes.append(rec["n_functions"])
            lines.append(f"{ell},{m},{rec['n_functions']},"
                         f"{int(rec['fallback'])},{int(rec['reduced'])}")
        if sizes:
            growth.add(list(ms), sizes, label=f"triangle {ell}")
    (out / "basis_sizes.csv").write_text("\n".join(lines) + "\n")
    growth.save(out / "basis_sizes.svg")

    overview = {
        "n_triangles": store.n_triangles,
        "horizon_slabs": store.index["horizon_slabs"],
        "fallback_elements": store.index["fallback_elements"],
        "excluded_elements": store.index["excluded_elements"],
        "pod": store.index["pod"],
    }
    write_json(out / "overview.json", overview)
    return overview
