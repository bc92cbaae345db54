"""Command-line interface.

Subcommands: gen, approx, exact, prune, pipeline, verify, sweep. Exit
codes: 0 success, 2 configuration error, 3 numerical failure, 4 safety
violation in verify mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import errors
from .approx import solution_from_design, solve_approx
from .designs import info_matrix, summarize
from .exact import compute_w_plus
from .generators import InstanceSpec
from .io import (
    read_candidates,
    read_design,
    write_approx_solution,
    write_candidates,
    write_design,
    write_json,
)
from .pipeline import PipelineConfig, run_pipeline, sweep, verify_safety
from .pruning import prune

CONFIG_ERRORS = (
    ValueError,
    KeyError,
    FileNotFoundError,
    json.JSONDecodeError,
    errors.BudgetExceeded,
    errors.TooFewTrials,
)
NUMERICAL_ERRORS = (
    errors.RankDeficient,
    errors.IterationCap,
    errors.ConvergenceFailure,
    errors.NotPositiveDefinite,
    errors.SingularStart,
    errors.InfeasiblePair,
    errors.IndexOutOfRange,
    errors.DimensionMismatch,
)


def _add_instance_args(parser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--candidates", help="candidate CSV path")
    group.add_argument("--instance", help="instance spec JSON path (as written by gen)")


def _add_run_args(parser):
    parser.add_argument("--n", type=int, help="exact design size")
    parser.add_argument("--tol", type=float, default=None, help="approximate-solver tolerance")
    parser.add_argument("--delta-support", type=float, default=None, help="maximum-variance set slack")
    parser.add_argument("--scan-mode", choices=["full", "maxvar"], default=None)
    parser.add_argument("--oracle-budget", type=int, default=None)
    parser.add_argument("--restarts", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    parser.add_argument("--config", help="JSON config file; flags override its fields")


def _build_parser():
    parser = argparse.ArgumentParser(prog="doptprune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a benchmark candidate set")
    gen.add_argument("--kind", choices=["gaussian", "mixture", "fig1_disk"], required=True)
    gen.add_argument("--N", type=int, help="candidate count (gaussian)")
    gen.add_argument("--m", type=int, help="regressor dimension (gaussian)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--decimals", type=int, help="grid resolution (mixture)")
    gen.add_argument("--J", type=int, help="lattice point count (disk)")
    gen.add_argument("--no-csv", action="store_true", help="write only the instance spec JSON")
    gen.add_argument("--out", required=True)

    for name, helptext in [
        ("approx", "compute a certified optimal approximate design"),
        ("exact", "compute a reference exact design on the approximate support"),
        ("prune", "run both removal conditions and write the survivors"),
        ("pipeline", "run all phases end to end"),
        ("verify", "oracle check: optimal supports must survive pruning"),
        ("sweep", "repeat the pipeline over sizes and/or seeds"),
    ]:
        cmd = sub.add_parser(name, help=helptext)
        _add_instance_args(cmd)
        _add_run_args(cmd)
        cmd.add_argument("--out", help="output directory")
        if name == "prune":
            cmd.add_argument("--approx-design", help="reuse an approximate design CSV")
            cmd.add_argument("--w-plus", help="reuse a reference exact design CSV")
        if name == "sweep":
            cmd.add_argument("--n-list", help="comma-separated design sizes")
            cmd.add_argument("--seed-list", help="comma-separated seeds")
    return parser


def _config_from_args(args, need_n=True) -> PipelineConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    if args.candidates:
        data["candidates"] = args.candidates
        data.pop("instance", None)
    if args.instance:
        data["instance"] = json.loads(Path(args.instance).read_text())
        data.pop("candidates", None)
    if args.n is not None:
        data["n"] = args.n
    for key, value in [
        ("tol", args.tol),
        ("delta_support", args.delta_support),
        ("scan_mode", args.scan_mode),
        ("oracle_budget", args.oracle_budget),
        ("restarts", args.restarts),
        ("seed", args.seed),
    ]:
        if value is not None:
            data[key] = value
    if getattr(args, "out", None):
        data["out"] = args.out
    if "n" not in data:
        if not need_n:
            data["n"] = 2  # placeholder; commands without a size ignore it
        else:
            raise ValueError("--n is required (or set n in the config file)")
    cfg = PipelineConfig.from_dict(data)
    cfg.render_figures = not args.no_figures
    return cfg


def _cmd_gen(args) -> int:
    if args.kind == "gaussian":
        if args.N is None or args.m is None:
            raise ValueError("gaussian instances need --N and --m")
        spec = InstanceSpec("gaussian", {"N": args.N, "m": args.m, "seed": args.seed})
    elif args.kind == "mixture":
        if args.decimals is None:
            raise ValueError("mixture instances need --decimals")
        spec = InstanceSpec("mixture", {"decimals": args.decimals})
    else:
        if args.J is None:
            raise ValueError("disk instances need --J")
        spec = InstanceSpec("fig1_disk", {"J": args.J})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "instance.json", spec.to_dict())
    if not args.no_csv:
        cands = spec.build()
        write_candidates(out / "candidates.csv", cands)
        print(f"wrote {out / 'candidates.csv'} (N={cands.N}, m={cands.m})")
    else:
        print(f"wrote {out / 'instance.json'}")
    return 0


def _cmd_approx(args) -> int:
    cfg = _config_from_args(args, need_n=False)
    cands = _load(cfg)
    approx = solve_approx(cands, tol=cfg.approx_tol, delta_support=cfg.delta_support)
    print(
        f"approximate design: support={approx.design.support_size} "
        f"eff_lower_bound={approx.eff_lower_bound:.12f} iterations={approx.iterations}"
    )
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_approx_solution(out, approx, cands)
    return 0


def _cmd_exact(args) -> int:
    cfg = _config_from_args(args)
    cands = _load(cfg)
    approx = solve_approx(cands, tol=cfg.approx_tol, delta_support=cfg.delta_support)
    w_plus = compute_w_plus(
        cands, approx, cfg.n, oracle_budget=cfg.oracle_budget, restarts=cfg.restarts, seed=cfg.seed
    )
    summary = summarize(info_matrix(cands, w_plus))
    eff = summary.phi / summarize(approx.mstar).phi
    print(f"w_plus: support={w_plus.support_size} eff={eff:.6f}")
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_design(out / "w_plus.csv", w_plus, cands)
        write_json(out / "w_plus_meta.json", {"eff": eff, "det": float(np.exp(summary.logdet)), "n": cfg.n})
    return 0


def _cmd_prune(args) -> int:
    cfg = _config_from_args(args)
    cands = _load(cfg)
    if args.approx_design:
        approx = solution_from_design(
            cands, read_design(args.approx_design, cands), delta_support=cfg.delta_support
        )
    else:
        approx = solve_approx(cands, tol=cfg.approx_tol, delta_support=cfg.delta_support)
    if args.w_plus:
        w_plus = read_design(args.w_plus, cands)
    else:
        w_plus = compute_w_plus(
            cands, approx, cfg.n, oracle_budget=cfg.oracle_budget, restarts=cfg.restarts, seed=cfg.seed
        )
    report = prune(cands, approx, w_plus, scan_mode=cfg.scan_mode, delta_support=cfg.delta_support)
    print(f"N={report.n_candidates} N1={report.n1} N2={report.n2} eff_plus={report.eff_plus:.6f}")
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "prune_report.json", report.to_dict())
        write_candidates(out / "survivors.csv", cands, subset=report.survivors_exch)
    return 0


def _cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    result = run_pipeline(cfg)
    print(
        f"N={result.n_candidates} N1={result.n1} N2={result.n2} "
        f"eff_plus={result.eff_plus:.6f} phi={result.final_phi:.6g} mode={result.solver_mode}"
    )
    return 0


def _cmd_verify(args) -> int:
    cfg = _config_from_args(args)
    payload = verify_safety(cfg)
    print(
        f"optimal support {payload['optimal_support']} contained in "
        f"{payload['survivors']}: {payload['contained']}"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    n_values = [int(x) for x in args.n_list.split(",")] if args.n_list else None
    seeds = [int(x) for x in args.seed_list.split(",")] if args.seed_list else None
    rows = sweep(cfg, n_values=n_values, seeds=seeds)
    for row in rows:
        print(
            f"seed={row['seed']} n={row['n']} N={row['N']} N1={row['N1']} "
            f"N2={row['N2']} eff={row['eff_plus']:.6f}"
        )
    return 0


def _load(cfg: PipelineConfig):
    if cfg.instance is not None:
        return cfg.instance.build()
    return read_candidates(cfg.candidates_csv)


_COMMANDS = {
    "gen": _cmd_gen,
    "approx": _cmd_approx,
    "exact": _cmd_exact,
    "prune": _cmd_prune,
    "pipeline": _cmd_pipeline,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except errors.SafetyViolation as exc:
        print(f"SAFETY VIOLATION: {exc}", file=sys.stderr)
        return 4
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
