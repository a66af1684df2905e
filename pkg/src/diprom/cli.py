"""Command-line interface.

Subcommands
    hfm run      solve the full-order model at one parameter point
    offline      build an artifact store from a configuration
    rom run      reduced solve against a store (optional full-order check)
    pod reduce   second-stage reduction of a store, in place
    uq run       Monte-Carlo sweep over the reduced model
    report       render store-level summaries

Exit codes: 0 success; 2 configuration or usage error; 3 numerical
failure (CFL violation, shock-signature mismatch); 4 store integrity
failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import PipelineConfig
from .errors import (CflViolation, ConfigError, SignatureMismatch,
                     StoreIntegrityError)
from .hfm import HfmConfig, ParamPoint, solve
from .pipeline import run_offline, run_online, run_pod, run_report, run_uq
from .store import trajectory_csv, write_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INTEGRITY = 4


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return PipelineConfig.from_ini(path)


def _cmd_hfm_run(args) -> int:
    cfg = _load_config(args.config)
    mu = ParamPoint(args.mu1, args.mu2)
    mu.require_in_box(cfg.param_box)
    t_final = cfg.t_final if args.t_final is None else args.t_final
    traj = solve(HfmConfig(mu=mu, grid=cfg.grid(), dt=cfg.dt,
                           t_final=t_final, snapshot_stride=args.stride,
                           source_coeff=cfg.source_coeff))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory(out, traj)
    if args.csv is not None:
        csv_path = Path(args.csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(trajectory_csv(traj))
    print(f"wrote {len(traj.steps)} snapshots to {out}")
    return EXIT_OK


def _cmd_offline(args) -> int:
    cfg = _load_config(args.config)
    report = run_offline(cfg, args.store, progress=_progress)
    if args.with_pod:
        run_pod(args.store, progress=_progress)
    print(f"store at {args.store}: {report['n_elements']} elements over "
          f"{report['n_triangles']} triangles")
    return EXIT_OK


def _cmd_rom_run(args) -> int:
    mu = ParamPoint(args.mu1, args.mu2)
    report = run_online(args.store, mu, args.out_dir,
                        t_final=args.t_final, hfm_check=args.hfm_check,
                        progress=_progress)
    msg = (f"triangle {report['triangle']}, basis sizes "
           f"{report['basis_sizes'][0]}..{report['basis_sizes'][-1]}")
    if "e_rel_max_pointwise" in report:
        msg += f", max pointwise relative error "
        msg += repr(report["e_rel_max_pointwise"])
    print(msg)
    return EXIT_OK


def _cmd_pod_reduce(args) -> int:
    report = run_pod(args.store, samples=args.samples, seed=args.seed,
                     threshold=args.threshold, t_final=args.t_final,
                     progress=_progress)
    print(f"reduced {report['reduced_elements']} elements, "
          f"max basis size {report['max_k']}")
    return EXIT_OK


def _cmd_uq_run(args) -> int:
    summary = run_uq(args.store, args.out_dir, samples=args.samples,
                     seed=args.seed, with_hfm_check=args.with_hfm_check,
                     progress=_progress)
    msg = (f"{summary['n_samples']} samples, "
           f"{summary['qoi_failures']} shock-detection failures")
    if "shock_location" in summary:
        msg += f", mean shock location "
        msg += repr(summary["shock_location"]["mean"])
    print(msg)
    return EXIT_OK


def _cmd_report(args) -> int:
    overview = run_report(args.store, args.out_dir, progress=_progress)
    print(f"report for {overview['n_triangles']} triangles written to "
          f"{args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diprom",
        description="Displacement-interpolation reduced-order modelling "
                    "of parametrized conservation laws.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_hfm = sub.add_parser("hfm", help="full-order model commands")
    hfm_sub = p_hfm.add_subparsers(dest="subcommand", required=True)
    p = hfm_sub.add_parser("run", help="solve one parameter point")
    p.add_argument("--config", help="configuration INI (defaults built in)")
    p.add_argument("--mu1", type=float, required=True,
                   help="inflow boundary value")
    p.add_argument("--mu2", type=float, required=True,
                   help="source exponential rate")
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--stride", type=int, default=1,
                   help="snapshot recording stride")
    p.add_argument("--out", required=True, help="output trajectory file")
    p.add_argument("--csv", default=None, help="also write a CSV table")
    p.set_defaults(func=_cmd_hfm_run)

    p = sub.add_parser("offline", help="build an artifact store")
    p.add_argument("--config", help="configuration INI (defaults built in)")
    p.add_argument("--store", required=True, help="store directory")
    p.add_argument("--with-pod", action="store_true",
                   help="run the second-stage reduction afterwards")
    p.set_defaults(func=_cmd_offline)

    p_rom = sub.add_parser("rom", help="reduced-order model commands")
    rom_sub = p_rom.add_subparsers(dest="subcommand", required=True)
    p = rom_sub.add_parser("run", help="reduced solve at one point")
    p.add_argument("--store", required=True)
    p.add_argument("--mu1", type=float, required=True)
    p.add_argument("--mu2", type=float, required=True)
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--hfm-check", action="store_true",
                   help="also solve the full-order model and compare")
    p.set_defaults(func=_cmd_rom_run)

    p_pod = sub.add_parser("pod", help="second-stage reduction commands")
    pod_sub = p_pod.add_subparsers(dest="subcommand", required=True)
    p = pod_sub.add_parser("reduce", help="reduce a store in place")
    p.add_argument("--store", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--t-final", type=float, default=None)
    p.set_defaults(func=_cmd_pod_reduce)

    p_uq = sub.add_parser("uq", help="uncertainty-quantification commands")
    uq_sub = p_uq.add_subparsers(dest="subcommand", required=True)
    p = uq_sub.add_parser("run", help="Monte-Carlo sweep")
    p.add_argument("--store", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--with-hfm-check", action="store_true",
                   help="compare each sample against a full-order solve")
    p.set_defaults(func=_cmd_uq_run)

    p = sub.add_parser("report", help="render store-level summaries")
    p.add_argument("--store", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CflViolation, SignatureMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StoreIntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())
