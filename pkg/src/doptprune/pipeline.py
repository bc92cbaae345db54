"""End-to-end orchestration: approximate solve, reference exact design,
candidate pruning and the final exact search on the survivors.

A pipeline run is fully determined by its configuration (one seed feeds
every randomized component), writes machine-readable reports next to the
delimited outputs, and renders figures for instances with a planar view.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .approx import ApproxSolution, solve_approx
from .designs import CandidateSet, Design, info_matrix, summarize
from .errors import SafetyViolation
from .exact import DEFAULT_ORACLE_BUDGET, DEFAULT_RESTARTS, brute_force_exact, compute_w_plus, exact_search
from .generators import InstanceSpec
from .io import read_candidates, write_candidates, write_design, write_json, write_approx_solution
from .pruning import PruneReport, prune


@dataclass
class PipelineConfig:
    """Inputs of one pipeline run; JSON-serializable."""

    instance: Optional[InstanceSpec] = None
    candidates_csv: Optional[str] = None
    n: int = 0
    approx_tol: float = 1e-9
    delta_support: Optional[float] = None
    scan_mode: str = "full"
    oracle_budget: int = DEFAULT_ORACLE_BUDGET
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    out_dir: Optional[str] = None
    render_figures: bool = True

    def __post_init__(self):
        if (self.instance is None) == (self.candidates_csv is None):
            raise ValueError("exactly one of instance/candidates_csv must be set")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0.0 < self.approx_tol < 1.0:
            raise ValueError("approx_tol must lie in (0, 1)")
        if self.scan_mode not in ("full", "maxvar"):
            raise ValueError("scan_mode must be full or maxvar")

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "tol": self.approx_tol,
            "scan_mode": self.scan_mode,
            "oracle_budget": self.oracle_budget,
            "restarts": self.restarts,
            "seed": self.seed,
        }
        if self.delta_support is not None:
            out["delta_support"] = self.delta_support
        if self.instance is not None:
            out["instance"] = self.instance.to_dict()
        if self.candidates_csv is not None:
            out["candidates"] = self.candidates_csv
        if self.out_dir is not None:
            out["out"] = self.out_dir
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        instance = data.pop("instance", None)
        return cls(
            instance=None if instance is None else InstanceSpec.from_dict(instance),
            candidates_csv=data.pop("candidates", None),
            n=int(data.pop("n")),
            approx_tol=float(data.pop("tol", 1e-9)),
            delta_support=data.pop("delta_support", None),
            scan_mode=data.pop("scan_mode", "full"),
            oracle_budget=int(data.pop("oracle_budget", DEFAULT_ORACLE_BUDGET)),
            restarts=int(data.pop("restarts", DEFAULT_RESTARTS)),
            seed=int(data.pop("seed", 0)),
            out_dir=data.pop("out", None),
        )


@dataclass
class PipelineReport:
    """Quantities of one run: counts, per-phase times, final design."""

    n_candidates: int
    n1: int
    n2: int
    m: int
    n: int
    eff_plus: float
    timings: dict
    approx_meta: dict
    final_design: Design
    final_det: float
    final_phi: float
    solver_mode: str
    prune_report: PruneReport
    survivor_ids: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "N": self.n_candidates,
            "N1": self.n1,
            "N2": self.n2,
            "m": self.m,
            "n": self.n,
            "eff_plus": self.eff_plus,
            "timings": dict(self.timings),
            "approx": dict(self.approx_meta),
            "final": {
                # both determinant scalings are reported on purpose: tools
                # disagree about which one "the criterion value" means
                "det": self.final_det,
                "det_root_m": self.final_phi,
                "ids": self.final_design.indices.tolist(),
                "counts": self.final_design.counts.tolist(),
            },
            "solver_mode": self.solver_mode,
            "optimality_gap": "0 (exhaustive)" if self.solver_mode == "oracle" else "heuristic, no gap",
            "scan_mode": self.prune_report.scan_mode,
            "survivors": list(self.survivor_ids),
        }


def load_candidates(cfg: PipelineConfig) -> CandidateSet:
    if cfg.instance is not None:
        return cfg.instance.build()
    return read_candidates(cfg.candidates_csv)


@contextmanager
def _step(name: str):
    """Tag failures with the pipeline phase they came from."""
    try:
        yield
    except Exception as exc:
        exc.args = (f"[{name}] {exc}",) + exc.args[1:]
        raise


def run_pipeline(cfg: PipelineConfig, cands: Optional[CandidateSet] = None) -> PipelineReport:
    """Execute the five phases and (optionally) write reports and figures."""
    if cands is None:
        with _step("step 0: instance"):
            cands = load_candidates(cfg)
    if cfg.n < cands.m:
        raise ValueError(f"n={cfg.n} is below the parameter dimension m={cands.m}")

    with _step("step 1: approximate design"):
        tic = time.perf_counter()
        approx = solve_approx(cands, tol=cfg.approx_tol, delta_support=cfg.delta_support)
        t1 = time.perf_counter() - tic

    with _step("step 2: reference exact design"):
        tic = time.perf_counter()
        w_plus = compute_w_plus(
            cands, approx, cfg.n, oracle_budget=cfg.oracle_budget, restarts=cfg.restarts, seed=cfg.seed
        )
        t2 = time.perf_counter() - tic

    with _step("steps 3-4: pruning"):
        report = prune(cands, approx, w_plus, scan_mode=cfg.scan_mode, delta_support=cfg.delta_support)
        t3 = report.timings["augmentation_s"]
        t4 = report.timings["exchange_s"]

    with _step("step 5: final exact search"):
        tic = time.perf_counter()
        final, mode = exact_search(
            cands,
            report.survivors_exch,
            cfg.n,
            wstar=approx.design,
            start=w_plus if set(w_plus.indices.tolist()) <= set(report.survivors_exch.tolist()) else None,
            oracle_budget=cfg.oracle_budget,
            restarts=cfg.restarts,
            seed=cfg.seed,
        )
        t5 = time.perf_counter() - tic

    final_summary = summarize(info_matrix(cands, final))
    result = PipelineReport(
        n_candidates=cands.N,
        n1=report.n1,
        n2=report.n2,
        m=cands.m,
        n=cfg.n,
        eff_plus=report.eff_plus,
        timings={"t1": t1, "t2": t2, "t3": t3, "t4": t4, "t5": t5},
        approx_meta={
            "eff_lower_bound": approx.eff_lower_bound,
            "iterations": approx.iterations,
            "support_size": approx.design.support_size,
            "max_variance": approx.max_variance,
        },
        final_design=final,
        final_det=float(np.exp(final_summary.logdet)),
        final_phi=final_summary.phi,
        solver_mode=mode,
        prune_report=report,
        survivor_ids=cands.ids[report.survivors_exch].tolist(),
    )
    if cfg.out_dir is not None:
        _write_artifacts(cfg, cands, approx, w_plus, report, result)
    return result


def _write_artifacts(cfg, cands, approx, w_plus, prune_report, result: PipelineReport) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", result.to_dict())
    write_json(out / "prune_report.json", prune_report.to_dict())
    write_approx_solution(out, approx, cands)
    write_design(out / "w_plus.csv", w_plus, cands)
    write_design(out / "final_design.csv", result.final_design, cands)
    write_candidates(out / "survivors.csv", cands, subset=prune_report.survivors_exch)
    if cfg.render_figures:
        from . import plots

        plots.save_reduction_bars(out / "fig_reduction.png", cands.N, prune_report.n1, prune_report.n2)
        xy = plots.candidate_view(cands)
        if xy is not None:
            plots.save_candidate_map(out / "fig_candidates.png", xy, prune_report, result.final_design)


def verify_safety(cfg: PipelineConfig, cands: Optional[CandidateSet] = None) -> dict:
    """Oracle check of the pruning guarantee on a small instance.

    Enumerates every size-n design, forms the union of the supports of all
    optimal ones, runs the pipeline's pruning phases and checks containment
    in the survivors. Raises SafetyViolation if any optimal support index
    was removed (after writing the verification report, when requested).
    """
    if cands is None:
        cands = load_candidates(cfg)
    oracle = brute_force_exact(cands, cfg.n, budget=cfg.oracle_budget)
    approx = solve_approx(cands, tol=cfg.approx_tol, delta_support=cfg.delta_support)
    w_plus = compute_w_plus(
        cands, approx, cfg.n, oracle_budget=cfg.oracle_budget, restarts=cfg.restarts, seed=cfg.seed
    )
    report = prune(cands, approx, w_plus, scan_mode=cfg.scan_mode, delta_support=cfg.delta_support)
    sstar = set(oracle.sstar_n.tolist())
    contained = sstar <= set(report.survivors_exch.tolist())
    payload = {
        "n": cfg.n,
        "N": cands.N,
        "optimal_support": sorted(cands.ids[sorted(sstar)].tolist()),
        "survivors_aug": cands.ids[report.survivors_aug].tolist(),
        "survivors": cands.ids[report.survivors_exch].tolist(),
        "eff_plus": report.eff_plus,
        "contained": contained,
        "optimal_phi": oracle.phi,
        "optimal_design_count": len(oracle.optimal_designs),
    }
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "verify_report.json", payload)
    if not contained:
        missing = sorted(sstar - set(report.survivors_exch.tolist()))
        raise SafetyViolation(f"optimal support indices {missing} were removed")
    return payload


SWEEP_COLUMNS = [
    "instance", "seed", "n", "N", "N1", "N2", "eff_plus",
    "t1", "t2", "t3", "t4", "t5", "phi_final", "solver_mode",
]


def sweep(cfg: PipelineConfig, n_values=None, seeds=None) -> list[dict]:
    """Repeat the pipeline over design sizes and/or seeds; one row per run."""
    n_values = [cfg.n] if not n_values else list(n_values)
    seeds = [cfg.seed] if not seeds else list(seeds)
    rows = []
    for seed in seeds:
        for n in n_values:
            run_cfg = PipelineConfig(
                instance=cfg.instance,
                candidates_csv=cfg.candidates_csv,
                n=int(n),
                approx_tol=cfg.approx_tol,
                delta_support=cfg.delta_support,
                scan_mode=cfg.scan_mode,
                oracle_budget=cfg.oracle_budget,
                restarts=cfg.restarts,
                seed=int(seed),
                out_dir=None,
            )
            if run_cfg.instance is not None and run_cfg.instance.kind == "gaussian":
                params = dict(run_cfg.instance.params)
                params["seed"] = int(seed)
                run_cfg.instance = InstanceSpec("gaussian", params, run_cfg.instance.n)
            result = run_pipeline(run_cfg)
            label = (
                str(run_cfg.instance.to_dict()) if run_cfg.instance is not None else run_cfg.candidates_csv
            )
            rows.append(
                {
                    "instance": label,
                    "seed": int(seed),
                    "n": int(n),
                    "N": result.n_candidates,
                    "N1": result.n1,
                    "N2": result.n2,
                    "eff_plus": result.eff_plus,
                    "t1": result.timings["t1"],
                    "t2": result.timings["t2"],
                    "t3": result.timings["t3"],
                    "t4": result.timings["t4"],
                    "t5": result.timings["t5"],
                    "phi_final": result.final_phi,
                    "solver_mode": result.solver_mode,
                }
            )
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        import csv as _csv

        with (out / "sweep.csv").open("w", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        if cfg.render_figures and len(rows) > 1:
            from . import plots

            x_key = "n" if len(n_values) > 1 else "seed"
            plots.save_sweep_figure(out / "fig_sweep.png", rows, x_key)
    return rows
