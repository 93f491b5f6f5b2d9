"""Command-line front end.

Subcommands cover the individual pipeline pieces (``forward``,
``adjoint-pod``, ``denoise``, ``invert``), the analytic cross-checks
(``verify-theory``), the named experiment presets (``run-example``), and a
parallel configuration sweep (``sweep``).  Every command exits 0 exactly
when the checks it asserts all pass.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from . import inversion, serialize
from .experiment import (DEFAULT_T, DESK_M, DESK_NX, EXAMPLE_LABELS, FULL_M,
                         FULL_NX, ExperimentConfig, StageError, load_config,
                         parse_coefficient, run_example, run_experiment)
from .fem import CoefficientSet, TimeGrid, assemble_operators, solve_forward
from .grid import build_grid
from .reduced import build_adjoint_pod
from .shapes import list_shapes, make_shape
from .spectral import ProblemKind
from .verify import build_theory_matrices, verify_pod_bound, verify_span_equality

_PASS = "PASS"
_FAIL = "FAIL"


def _report(name: str, ok: bool, detail: str = "") -> bool:
    line = f"{_PASS if ok else _FAIL}  {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    return ok


def _add_grid_time_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nx", type=int, default=None, help="grid points along x")
    p.add_argument("--ny", type=int, default=None, help="grid points along y")
    p.add_argument("--T", type=float, default=None, help="final time")
    p.add_argument("--M", type=int, default=None, help="number of time steps")
    p.add_argument("--q", default="1.0", help="diffusion coefficient spec")
    p.add_argument("--c", default="0.0", help="reaction coefficient spec")
    p.add_argument("--full-scale", action="store_true",
                   help=f"use the {FULL_NX}x{FULL_NX}, M={FULL_M} study scale "
                        f"instead of the {DESK_NX}x{DESK_NX}, M={DESK_M} default")


def _grid_time_from(args) -> tuple:
    nx = args.nx if args.nx is not None else (FULL_NX if args.full_scale else DESK_NX)
    ny = args.ny if args.ny is not None else (FULL_NX if args.full_scale else DESK_NX)
    m = args.M if args.M is not None else (FULL_M if args.full_scale else DESK_M)
    kind = ProblemKind.parse(args.kind)
    t_final = args.T if args.T is not None else DEFAULT_T[kind]
    grid = build_grid(nx, ny)
    coeffs = CoefficientSet(q=parse_coefficient(args.q), c=parse_coefficient(args.c))
    ops = assemble_operators(grid, coeffs)
    return kind, grid, ops, TimeGrid(T=t_final, M=m)


def _field_from(spec: str, grid):
    """A field argument is a shape name or a path to a field CSV."""
    if os.path.exists(spec):
        file_grid, values = serialize.read_field_csv(spec)
        if file_grid.nx != grid.nx or file_grid.ny != grid.ny:
            raise ValueError(
                f"field file {spec!r} is {file_grid.nx}x{file_grid.ny} "
                f"but the requested grid is {grid.nx}x{grid.ny}")
        return values
    return make_shape(spec, grid)


# --------------------------------------------------------------------------
# forward
# --------------------------------------------------------------------------

def _cmd_forward(args) -> int:
    kind, grid, ops, tg = _grid_time_from(args)
    data = _field_from(args.input, grid)
    zero = np.zeros(grid.n_nodes)
    if kind is ProblemKind.INVERSE_SOURCE:
        traj = solve_forward(ops, tg, f=data, g=zero)
    else:
        traj = solve_forward(ops, tg, f=zero, g=data)
    os.makedirs(args.out, exist_ok=True)
    serialize.write_field_csv(os.path.join(args.out, "input.csv"), grid, data)
    serialize.write_field_csv(os.path.join(args.out, "final_state.csv"),
                              grid, traj.final)
    serialize.write_json(os.path.join(args.out, "forward.json"), {
        "kind": kind.value, "nx": grid.nx, "ny": grid.ny,
        "T": tg.T, "M": tg.M,
        "input_l2_norm": ops.norm(data),
        "final_l2_norm": ops.norm(traj.final),
    })
    ok = _report("forward solve produced a finite final state",
                 bool(np.all(np.isfinite(traj.final))),
                 f"final L2 norm {ops.norm(traj.final):.6g}")
    return 0 if ok else 1


# --------------------------------------------------------------------------
# adjoint-pod
# --------------------------------------------------------------------------

def _cmd_adjoint_pod(args) -> int:
    kind, grid, ops, tg = _grid_time_from(args)
    data = _field_from(args.data, grid)
    data = data.copy()
    data[grid.boundary] = 0.0
    selector = ({"energy_tol": args.energy} if args.energy is not None
                else {"n_modes": args.n_pod})
    basis = build_adjoint_pod(kind, data, ops, tg,
                              max_snapshots=args.max_snapshots, **selector)
    os.makedirs(args.out, exist_ok=True)
    serialize.write_pod_basis(os.path.join(args.out, "basis"), basis)
    serialize.write_json(os.path.join(args.out, "adjoint_pod.json"), {
        "kind": kind.value, "n_pod": basis.n_pod,
        "retained_rank": basis.retained_rank, "rho": basis.rho,
    })
    gram = basis.psi.T @ (ops.mass @ basis.psi)
    drift = float(np.max(np.abs(gram - np.eye(basis.n_pod))))
    ok = _report("basis is orthonormal in the mass inner product",
                 drift <= 1e-10, f"max Gram drift {drift:.3e}")
    ok &= _report("tail energy ratio is finite and in [0, 1]",
                  0.0 <= basis.rho <= 1.0, f"rho {basis.rho:.3e}")
    return 0 if ok else 1


# --------------------------------------------------------------------------
# denoise
# --------------------------------------------------------------------------

def _cmd_denoise(args) -> int:
    grid = build_grid(args.nx if args.nx is not None else DESK_NX,
                      args.ny if args.ny is not None else DESK_NX)
    detectors, readings = serialize.read_measurements_csv(args.measurements)
    ms = inversion.MeasurementSet(
        detectors=detectors, readings=readings,
        sigma=args.sigma if args.sigma is not None else 0.0,
        p=0.0, seed=None, quasi_uniformity=None)
    if args.alpha == "auto":
        if args.sigma is None:
            raise ValueError("--alpha auto needs --sigma (the noise scale)")
        coeffs = CoefficientSet(q=parse_coefficient(args.q),
                                c=parse_coefficient(args.c))
        ops = assemble_operators(grid, coeffs)
        pilot = inversion.denoise(ms, grid, 1e-6)
        smoothness = inversion.h2_norm_estimate(grid, ops, pilot)
        alpha = inversion.select_alpha(args.sigma, ms.n, smoothness)
    else:
        alpha = float(args.alpha)
    fitted = inversion.denoise(ms, grid, alpha)
    os.makedirs(args.out, exist_ok=True)
    serialize.write_field_csv(os.path.join(args.out, "denoised.csv"), grid, fitted)
    serialize.write_json(os.path.join(args.out, "denoise.json"), {
        "alpha": alpha, "n_detectors": ms.n,
        "fitted_min": float(fitted.min()), "fitted_max": float(fitted.max()),
    })
    ok = _report("denoised field is finite", bool(np.all(np.isfinite(fitted))),
                 f"alpha {alpha:.6g}")
    return 0 if ok else 1


# --------------------------------------------------------------------------
# invert
# --------------------------------------------------------------------------

def _cmd_invert(args) -> int:
    overrides = list(args.set or [])
    if args.full_scale:
        overrides = [f"grid.nx={FULL_NX}", f"grid.ny={FULL_NX}",
                     f"time.m={FULL_M}"] + overrides
    cfg = load_config(args.config, tuple(overrides))
    out = args.out if args.out is not None else cfg.out_dir
    try:
        metrics = run_experiment(cfg, out)
    except StageError as exc:
        print(f"{_FAIL}  pipeline aborted in stage '{exc.stage}': {exc.original}")
        return 1
    err = metrics["recovery"]["rel_l2_error"]
    ok = _report("pipeline completed with a finite recovery error",
                 bool(np.isfinite(err)), f"relative L2 error {err:.6g}")
    print(f"artifacts in {out}")
    return 0 if ok else 1


# --------------------------------------------------------------------------
# verify-theory
# --------------------------------------------------------------------------

def _theory_coeffs(profile: str, mus: np.ndarray) -> np.ndarray:
    if profile == "flat":
        return np.ones(mus.size)
    if profile == "eigenvalue":
        return mus.astype(float)
    raise ValueError(f"unknown coefficient profile {profile!r}")


def _cmd_verify_theory(args) -> int:
    from .spectral import SpectralCoefficients, distinct_mu_subset, mode_table

    kinds = ([ProblemKind.INVERSE_SOURCE, ProblemKind.BACKWARD]
             if args.kind == "both" else [ProblemKind.parse(args.kind)])
    levels = [int(tok) for tok in args.levels.split(",")]
    grid = build_grid(args.nx if args.nx is not None else DESK_NX,
                      args.ny if args.ny is not None else DESK_NX)
    all_ok = True
    records = []
    for kind in kinds:
        t_final = args.T if args.T is not None else DEFAULT_T[kind]
        for level in levels:
            # Coefficients indexed against the distinct-eigenvalue table.
            table = mode_table(2 * level + 8)
            probe = SpectralCoefficients(table, np.ones(len(table)))
            modes = distinct_mu_subset(probe, level, warn=False).modes
            mus = np.array([float(j * j + k * k) for j, k in modes])
            coeffs = SpectralCoefficients(modes, _theory_coeffs(args.profile, mus))
            tm = build_theory_matrices(kind, level, level, t_final, coeffs, grid)
            span = verify_span_equality(tm)
            bound = verify_pod_bound(kind, level, level, t_final, coeffs, grid)
            label = f"kind={kind.value} L=M={level}"
            all_ok &= _report(
                f"span equality holds ({label})",
                span["pass"] and span["residual_data_to_forward"] <= 1e-8,
                f"ranks {span['rank_forward']}/{span['rank_data_driven']}/"
                f"{span['rank_joint']}, residual "
                f"{span['residual_data_to_forward']:.3e}")
            all_ok &= _report(
                f"full-rank basis captures forward snapshots ({label})",
                bound["pass"], f"projection error {bound['full_rank_lhs']:.3e}")
            records.append({"kind": kind.value, "level": level, "T": t_final,
                            "span": span, "bound": {
                                "full_rank_lhs": bound["full_rank_lhs"],
                                "bound_factor": bound["bound_factor"],
                                "table": bound["table"]}})
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        serialize.write_json(os.path.join(args.out, "verify_theory.json"),
                             {"records": records, "passed": bool(all_ok)})
    return 0 if all_ok else 1


# --------------------------------------------------------------------------
# run-example
# --------------------------------------------------------------------------

def _cmd_run_example(args) -> int:
    base = ExperimentConfig()
    if args.full_scale:
        base = ExperimentConfig(nx=FULL_NX, ny=FULL_NX, M=FULL_M)
    if args.seed is not None:
        from dataclasses import replace
        base = replace(base, seed=args.seed)
    out = args.out if args.out is not None else f"example_{args.label}"
    summary = run_example(args.label, out, base)
    for check in summary["checks"]:
        _report(f"example {args.label}: {check['name']}", check["passed"],
                str(check["detail"]))
    print(f"artifacts in {out}")
    return 0 if summary["passed"] else 1


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def _sweep_one(job) -> tuple:
    path, overrides, out_dir = job
    try:
        cfg = load_config(path, overrides)
        metrics = run_experiment(cfg, out_dir)
        return (path, True, metrics["recovery"]["rel_l2_error"], "")
    except Exception as exc:          # noqa: BLE001 - reported to the caller
        return (path, False, float("nan"), f"{type(exc).__name__}: {exc}")


def _cmd_sweep(args) -> int:
    overrides = tuple(args.set or [])
    jobs = []
    for path in args.configs:
        stem = os.path.splitext(os.path.basename(path))[0]
        jobs.append((path, overrides, os.path.join(args.out, stem)))
    results = []
    if args.jobs == 1 or len(jobs) == 1:
        results = [_sweep_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    all_ok = True
    rows = []
    for path, ok, err, message in results:
        all_ok &= _report(f"sweep config {path}", ok,
                          f"error {err:.6g}" if ok else message)
        rows.append({"config": path, "ok": ok, "rel_l2_error": err,
                     "message": message})
    os.makedirs(args.out, exist_ok=True)
    serialize.write_json(os.path.join(args.out, "sweep.json"),
                         {"runs": rows, "passed": bool(all_ok)})
    return 0 if all_ok else 1


# --------------------------------------------------------------------------
# parser wiring
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adjpod",
        description="Data-driven POD reduction for parabolic inverse problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="full-order forward solve")
    p.add_argument("--kind", default="source", choices=["source", "backward"])
    p.add_argument("--input", required=True,
                   help=f"shape name ({', '.join(list_shapes())}) or field CSV")
    p.add_argument("--out", default="forward_out")
    _add_grid_time_flags(p)
    p.set_defaults(handler=_cmd_forward)

    p = sub.add_parser("adjoint-pod", help="build a data-driven POD basis")
    p.add_argument("--kind", default="source", choices=["source", "backward"])
    p.add_argument("--data", required=True, help="measured field CSV or shape name")
    p.add_argument("--n-pod", type=int, default=9)
    p.add_argument("--energy", type=float, default=None,
                   help="tail-energy tolerance (overrides --n-pod)")
    p.add_argument("--max-snapshots", type=int, default=201)
    p.add_argument("--out", default="adjoint_pod_out")
    _add_grid_time_flags(p)
    p.set_defaults(handler=_cmd_adjoint_pod)

    p = sub.add_parser("denoise", help="fit a smooth field to noisy detectors")
    p.add_argument("--measurements", required=True, help="detector CSV")
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--q", default="1.0")
    p.add_argument("--c", default="0.0")
    p.add_argument("--alpha", default="auto",
                   help="smoothing weight, or 'auto' (needs --sigma)")
    p.add_argument("--sigma", type=float, default=None,
                   help="noise scale used by the automatic alpha rule")
    p.add_argument("--out", default="denoise_out")
    p.set_defaults(handler=_cmd_denoise)

    p = sub.add_parser("invert", help="full measurement-to-recovery pipeline")
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--out", default=None)
    p.add_argument("--full-scale", action="store_true")
    p.set_defaults(handler=_cmd_invert)

    p = sub.add_parser("verify-theory", help="analytic span/bound cross-checks")
    p.add_argument("--kind", default="both", choices=["source", "backward", "both"])
    p.add_argument("--levels", default="2,4,6",
                   help="comma-separated mode counts (L=M)")
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--profile", default="eigenvalue",
                   choices=["flat", "eigenvalue"],
                   help="modal coefficient profile for the analytic test "
                        "problem (amplitudes 1 or mu_k; the latter keeps the "
                        "snapshot spectrum inside the POD retention window)")
    p.add_argument("--out", default=None, help="directory for the JSON report")
    p.set_defaults(handler=_cmd_verify_theory)

    p = sub.add_parser("run-example", help="named experiment preset")
    p.add_argument("label", choices=list(EXAMPLE_LABELS))
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--full-scale", action="store_true")
    p.set_defaults(handler=_cmd_run_example)

    p = sub.add_parser("sweep", help="run several configs in parallel")
    p.add_argument("configs", nargs="+", help="INI config files")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override applied to every config (repeatable)")
    p.add_argument("--out", default="sweep_out")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(handler=_cmd_sweep)

    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except StageError as exc:
        print(f"{_FAIL}  {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"{_FAIL}  {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
