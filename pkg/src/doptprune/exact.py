"""Exact (size-n) design construction.

Three layers:
  * efficient_rounding: quota apportionment of an approximate design;
  * kl_exchange: steepest-ascent single-trial exchanges, evaluated in
    O(m^2) per pair through the rank-two determinant update identity;
  * brute_force_exact: exhaustive enumeration oracle returning the global
    optimum, every optimal design (up to a tie tolerance) and the union of
    their supports; usable only at small scales, but an independent ground
    truth for everything else.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .approx import ApproxSolution, greedy_basis, max_variance_set
from .designs import CandidateSet, Design
from .errors import (
    BudgetExceeded,
    ConvergenceFailure,
    NotPositiveDefinite,
    RankDeficient,
    SingularStart,
    TooFewTrials,
)
from .linalg import _cholesky, _inverse_from_lower

REL_IMPROVE_TOL = 1e-10
# Enumerated designs within this relative log-det distance of the optimum
# count as optimal ties.
OPT_TIE_TOL = 1e-9

DEFAULT_ORACLE_BUDGET = 10**7
DEFAULT_RESTARTS = 5

_ENUM_BLOCK = 32768
_MAX_ACCEPTED_EXCHANGES = 200000


@dataclass
class ExactSearchResult:
    """Outcome of the enumeration oracle."""

    best: Design
    phi: float
    logdet: float
    optimal_designs: list[Design]
    sstar_n: np.ndarray

    def to_dict(self) -> dict:
        """JSON-ready payload listing every optimal design."""
        return {
            "phi": self.phi,
            "logdet": self.logdet,
            "best": {"ids": self.best.indices.tolist(), "counts": self.best.counts.tolist()},
            "optimal_designs": [
                {"ids": d.indices.tolist(), "counts": d.counts.tolist()} for d in self.optimal_designs
            ],
            "optimal_support_union": self.sstar_n.tolist(),
        }


def efficient_rounding(wstar: Design, n: int) -> Design:
    """Round an approximate design to n trials on the same support.

    Quota apportionment: start from counts ceil((n - l/2) * w_i) where l is
    the support size, then decrement the index maximizing (r_i - 1) / w_i
    while the total exceeds n, or increment the index minimizing r_i / w_i
    while it falls short. Ties go to the lowest index, and every support
    point keeps at least one trial.
    """
    support = wstar.indices
    weights = wstar.weights
    l = support.size
    if n < l:
        raise TooFewTrials(f"n={n} is below the support size {l}")
    counts = np.ceil((n - 0.5 * l) * weights).astype(np.int64)
    counts = np.maximum(counts, 1)
    while counts.sum() > n:
        counts[int(np.argmax((counts - 1) / weights))] -= 1
    while counts.sum() < n:
        counts[int(np.argmin(counts / weights))] += 1
    return Design.exact(support, counts, n)


def _moment_of_counts(vectors: np.ndarray, counts: np.ndarray, n: int) -> np.ndarray:
    return (vectors * (counts / n)[:, None]).T @ vectors


def kl_exchange(
    cands: CandidateSet,
    start: Design,
    scan: np.ndarray,
    rel_improve_tol: float = REL_IMPROVE_TOL,
) -> Design:
    """Improve an exact design by best single-trial exchanges until local optimality.

    Every accepted exchange removes one trial from a support point and adds
    one at a scan candidate; the determinant ratio of such a move is
    1 + (v_i - v_l)/n - (v_i*v_l - c^2)/n^2 with quadratic forms taken at
    the current inverse information matrix, so a full pass costs one matrix
    product. On return no exchange improves the criterion by more than
    rel_improve_tol (relative).
    """
    if start.n is None:
        raise ValueError("kl_exchange needs an exact design")
    n = start.n
    scan = np.unique(np.asarray(scan, dtype=np.int64))
    scan_vecs = cands.gather(scan)
    counts = dict(zip(start.indices.tolist(), start.counts.tolist()))
    accepted = 0
    while True:
        supp = np.asarray(sorted(counts), dtype=np.int64)
        reps = np.asarray([counts[i] for i in supp], dtype=np.int64)
        supp_vecs = cands.gather(supp)
        try:
            lower = _cholesky(_moment_of_counts(supp_vecs, reps, n))
        except NotPositiveDefinite as exc:
            if accepted:
                raise  # exchanges never make the design singular
            raise SingularStart("starting design has a singular information matrix") from exc
        minv = _inverse_from_lower(lower)
        v_supp = np.einsum("ij,ij->i", supp_vecs @ minv, supp_vecs)
        v_scan = np.einsum("ij,ij->i", scan_vecs @ minv, scan_vecs)
        cross = supp_vecs @ minv @ scan_vecs.T
        ratio = (
            1.0
            + (v_scan[None, :] - v_supp[:, None]) / n
            - (v_supp[:, None] * v_scan[None, :] - cross**2) / n**2
        )
        flat = int(np.argmax(ratio))
        li, si = divmod(flat, scan.size)
        if ratio[li, si] <= 1.0 + rel_improve_tol:
            break
        out_idx, in_idx = int(supp[li]), int(scan[si])
        counts[out_idx] -= 1
        if counts[out_idx] == 0:
            del counts[out_idx]
        counts[in_idx] = counts.get(in_idx, 0) + 1
        accepted += 1
        if accepted > _MAX_ACCEPTED_EXCHANGES:
            raise ConvergenceFailure("exchange heuristic exceeded its acceptance cap")
    supp = np.asarray(sorted(counts), dtype=np.int64)
    return Design.exact(supp, np.asarray([counts[i] for i in supp]), n)


def _enumerate_blocks(n_points: int, n: int):
    combos = itertools.combinations_with_replacement(range(n_points), n)
    while True:
        block = list(itertools.islice(combos, _ENUM_BLOCK))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64)


def _block_logdets(vectors: np.ndarray, combos: np.ndarray, n: int) -> np.ndarray:
    chosen = vectors[combos]  # (B, n, m)
    moments = chosen.transpose(0, 2, 1) @ chosen / n
    sign, logdet = np.linalg.slogdet(moments)
    logdet[sign <= 0] = -np.inf
    return logdet


def brute_force_exact(
    cands: CandidateSet,
    n: int,
    budget: int = DEFAULT_ORACLE_BUDGET,
    tie_tol: float = OPT_TIE_TOL,
) -> ExactSearchResult:
    """Enumerate every size-n design; return the optimum, all ties and S*_n.

    Two streamed passes over the multiset enumeration: the first finds the
    optimal log-determinant, the second collects every design within
    tie_tol (relative) of it. Raises BudgetExceeded when the enumeration
    count C(N+n-1, n) exceeds the budget.
    """
    n_points, m = cands.N, cands.m
    total = math.comb(n_points + n - 1, n)
    if total > budget:
        raise BudgetExceeded(f"{total} designs exceed the budget of {budget}")
    vectors = cands.toarray()
    best = -np.inf
    for combos in _enumerate_blocks(n_points, n):
        logdets = _block_logdets(vectors, combos, n)
        block_best = float(logdets.max())
        if block_best > best:
            best = block_best
    if not np.isfinite(best):
        raise RankDeficient(f"every size-{n} design on these candidates is singular")
    cutoff = best - tie_tol * max(1.0, abs(best))
    tie_designs: list[Design] = []
    tie_logdets: list[float] = []
    support_union: set[int] = set()
    for combos in _enumerate_blocks(n_points, n):
        logdets = _block_logdets(vectors, combos, n)
        for row in np.flatnonzero(logdets >= cutoff):
            chosen = combos[row]
            idx, reps = np.unique(chosen, return_counts=True)
            tie_designs.append(Design.exact(idx, reps, n))
            tie_logdets.append(float(logdets[row]))
            support_union.update(idx.tolist())
    best_pos = int(np.argmax(tie_logdets))
    return ExactSearchResult(
        best=tie_designs[best_pos],
        phi=float(np.exp(best / m)),
        logdet=best,
        optimal_designs=tie_designs,
        sstar_n=np.asarray(sorted(support_union), dtype=np.int64),
    )


def _greedy_exact_start(cands: CandidateSet, pool: np.ndarray, n: int) -> Design:
    """Nonsingular n-trial starting design on a candidate pool.

    The first m trials come from a rank-completing greedy subset, the rest
    go one by one to the pool candidate with the largest current variance.
    """
    sub = cands.subset(pool)
    basis_local = greedy_basis(sub)
    counts = {int(pool[i]): 1 for i in basis_local}
    pool_vecs = cands.gather(pool)
    for _ in range(n - len(counts)):
        supp = np.asarray(sorted(counts), dtype=np.int64)
        reps = np.asarray([counts[i] for i in supp], dtype=np.int64)
        vecs = cands.gather(supp)
        minv = _inverse_from_lower(_cholesky(_moment_of_counts(vecs, reps, int(reps.sum()))))
        v = np.einsum("ij,ij->i", pool_vecs @ minv, pool_vecs)
        pick = int(pool[int(np.argmax(v))])
        counts[pick] = counts.get(pick, 0) + 1
    supp = np.asarray(sorted(counts), dtype=np.int64)
    return Design.exact(supp, np.asarray([counts[i] for i in supp]), n)


def _perturbed_rounding(wstar: Design, n: int, rng: np.random.Generator) -> Design:
    noise = np.exp(0.3 * rng.standard_normal(wstar.weights.size))
    jittered = wstar.weights * noise
    perturbed = Design.approximate(wstar.indices, jittered / jittered.sum())
    return efficient_rounding(perturbed, n)


def exact_search(
    cands: CandidateSet,
    pool: np.ndarray,
    n: int,
    wstar: Optional[Design] = None,
    start: Optional[Design] = None,
    oracle_budget: int = DEFAULT_ORACLE_BUDGET,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
) -> tuple[Design, str]:
    """Best size-n design restricted to a candidate pool.

    Uses the enumeration oracle when the pool fits the budget, otherwise
    the exchange heuristic seeded from the rounding of wstar (with seeded
    perturbed-rounding restarts), an explicit start design, or a greedy
    construction. Returns (design, "oracle" | "heuristic").
    """
    pool = np.unique(np.asarray(pool, dtype=np.int64))
    if math.comb(pool.size + n - 1, n) <= oracle_budget:
        result = brute_force_exact(cands.subset(pool), n, budget=oracle_budget)
        mapped = Design.exact(pool[result.best.indices], result.best.counts, n)
        return mapped, "oracle"
    pool_set = set(pool.tolist())
    starts: list[Design] = []
    if start is not None and set(start.indices.tolist()) <= pool_set:
        starts.append(start)
    rng = np.random.default_rng(seed)
    if wstar is not None and set(wstar.indices.tolist()) <= pool_set and n >= wstar.support_size:
        starts.append(efficient_rounding(wstar, n))
        for _ in range(max(restarts - 1, 0)):
            starts.append(_perturbed_rounding(wstar, n, rng))
    if not starts:
        starts.append(_greedy_exact_start(cands, pool, n))
    best_design, best_logdet = None, -np.inf
    for candidate_start in starts:
        try:
            improved = kl_exchange(cands, candidate_start, scan=pool)
        except SingularStart:
            continue
        vecs = cands.gather(improved.indices)
        lower = _cholesky(_moment_of_counts(vecs, improved.counts, n))
        logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
        if logdet > best_logdet:
            best_design, best_logdet = improved, logdet
    if best_design is None:
        raise RankDeficient("no nonsingular size-n design found on the pool")
    return best_design, "heuristic"


def compute_w_plus(
    cands: CandidateSet,
    approx: ApproxSolution,
    n: int,
    oracle_budget: int = DEFAULT_ORACLE_BUDGET,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
) -> Design:
    """Reference exact design on the maximum-variance set of the approximate optimum.

    Small pools are solved exactly by enumeration; otherwise the rounding
    of the approximate design is polished by exchanges scanning the
    maximum-variance set. Falls back to a full-candidate scan if the
    restricted search cannot produce a nonsingular design.
    """
    if n < cands.m:
        raise TooFewTrials(f"n={n} is below the parameter dimension m={cands.m}")
    stilde = max_variance_set(approx.vstar, cands.m, approx.delta_support)
    pool = np.union1d(stilde, approx.design.indices)
    try:
        design, _ = exact_search(
            cands,
            pool,
            n,
            wstar=approx.design,
            oracle_budget=oracle_budget,
            restarts=restarts,
            seed=seed,
        )
    except RankDeficient:
        design, _ = exact_search(
            cands,
            np.arange(cands.N),
            n,
            wstar=approx.design,
            oracle_budget=oracle_budget,
            restarts=restarts,
            seed=seed,
        )
    return design
