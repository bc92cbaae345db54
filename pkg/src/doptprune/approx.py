"""Optimal approximate design solver with an optimality certificate.

The solver combines multiplicative weight updates with periodic
vertex-exchange steps (mass moved from the lowest-variance support point to
the globally highest-variance candidate, step length by exact line search).
Termination is certified through the variance function: a nonsingular
design is optimal exactly when its maximum variance equals m, so
m / max_i v_i lower-bounds the efficiency of the current iterate.

For large candidate sets the same updates run on a deterministic working
set, with streamed full-candidate passes deciding certificate checks and
candidate entry; results remain deterministic for a fixed candidate order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designs import SUPPORT_EPS, CandidateSet, Design, info_matrix, variance_function
from .errors import IterationCap, RankDeficient
from .linalg import _cholesky, _inverse_from_lower

# Candidate sets at most this large run the plain dense-weight algorithm;
# larger ones use the working-set variant.
WORKING_SET_MIN_N = 4096

DEFAULT_EXCHANGE_PERIOD = 20
DEFAULT_MAX_ITERS = 10**6


@dataclass
class ApproxSolution:
    """Certified approximate design with its optimum-side quantities."""

    design: Design
    mstar: SpdMatrix
    vstar: np.ndarray
    eff_lower_bound: float
    iterations: int
    logdet_history: np.ndarray
    delta_support: float

    @property
    def max_variance(self) -> float:
        return float(self.vstar.max())

    @property
    def support_size(self) -> int:
        return self.design.support_size


def default_delta_support(m: int) -> float:
    """Default slack for membership in the maximum-variance set."""
    return 1e-5 * m


def max_variance_set(vstar: np.ndarray, m: int, delta: float) -> np.ndarray:
    """Indices with variance within delta of the theoretical maximum m.

    Always contains the argmax of vstar, so the returned set is nonempty
    even when the supplied variances come from a suboptimal design.
    """
    vstar = np.asarray(vstar, dtype=np.float64)
    members = np.flatnonzero(vstar >= m - delta)
    top = int(np.argmax(vstar))
    if top not in members:
        members = np.union1d(members, np.array([top], dtype=np.int64))
    return members.astype(np.int64)


def solution_from_design(cands: CandidateSet, design: Design, delta_support: float | None = None) -> ApproxSolution:
    """Rebuild optimum-side quantities from a stored approximate design.

    Used when a design CSV is re-ingested: the matrix, variance function
    and certificate are recomputed rather than trusted from metadata.
    """
    if delta_support is None:
        delta_support = default_delta_support(cands.m)
    mstar = info_matrix(cands, design)
    vstar = variance_function(cands, mstar)
    return ApproxSolution(
        design=design,
        mstar=mstar,
        vstar=vstar,
        eff_lower_bound=cands.m / float(vstar.max()),
        iterations=0,
        logdet_history=np.zeros(0),
        delta_support=delta_support,
    )


def greedy_basis(cands: CandidateSet) -> np.ndarray:
    """m candidate indices spanning R^m, chosen by largest orthogonal residual.

    Raises RankDeficient when the candidates do not span R^m, i.e. when no
    nonsingular design exists.
    """
    m = cands.m
    basis = np.zeros((m, 0))
    chosen: list[int] = []
    max_norm2 = 0.0
    for k in range(m):
        best_idx, best_val = -1, -np.inf
        for start, block in cands.chunks():
            resid = np.einsum("ij,ij->i", block, block)
            if k:
                proj = block @ basis
                resid = resid - np.einsum("ij,ij->i", proj, proj)
            if k == 0:
                max_norm2 = max(max_norm2, float(resid.max()))
            local = int(np.argmax(resid))
            if resid[local] > best_val:
                best_idx, best_val = start + local, float(resid[local])
        if best_val <= 1e-12 * max(max_norm2, 1e-300):
            raise RankDeficient(f"candidates span only {k} of {m} dimensions")
        vec = cands.gather([best_idx])[0]
        if k:
            vec = vec - basis @ (basis.T @ vec)
        basis = np.column_stack([basis, vec / np.linalg.norm(vec)])
        chosen.append(best_idx)
    return np.asarray(chosen, dtype=np.int64)


def _line_search_alpha(vk: float, vj: float, cross: float, w_j: float) -> float:
    """Exact D-criterion line search for a pairwise mass transfer.

    Moving mass a from j to k scales the determinant by
    1 + a*(vk - vj) - a^2*(vk*vj - cross^2); the maximizer is clamped to
    [0, w_j] so the donor weight never goes negative.
    """
    den = vk * vj - cross * cross
    if den <= 0.0:
        alpha = w_j if vk > vj else 0.0
    else:
        alpha = (vk - vj) / (2.0 * den)
    return float(min(max(alpha, 0.0), w_j))


def _moment_quantities(vectors: np.ndarray, weights: np.ndarray):
    mom = (vectors * weights[:, None]).T @ vectors
    lower = _cholesky(mom)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    minv = _inverse_from_lower(lower)
    v = np.einsum("ij,ij->i", vectors @ minv, vectors)
    return logdet, minv, v


def _streamed_variances(cands: CandidateSet, minv: np.ndarray) -> np.ndarray:
    out = np.empty(cands.N)
    for start, block in cands.chunks():
        out[start : start + block.shape[0]] = np.einsum("ij,ij->i", block @ minv, block)
    return out


def _clean_weights(weights: np.ndarray, v: np.ndarray, m: int, delta_support: float):
    """Zero sub-threshold weights and converged-out stragglers, renormalize."""
    keep = (weights > SUPPORT_EPS) & (v >= m - 0.5 * delta_support)
    changed = bool(np.any(~keep & (weights > 0.0)))
    if not np.any(keep):
        return weights, False
    cleaned = np.where(keep, weights, 0.0)
    return cleaned / cleaned.sum(), changed


def solve_approx(
    cands: CandidateSet,
    tol: float = 1e-9,
    delta_support: float | None = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    exchange_period: int = DEFAULT_EXCHANGE_PERIOD,
    force_full: bool | None = None,
) -> ApproxSolution:
    """Compute a D-optimal approximate design with efficiency >= 1 - tol.

    Deterministic for a fixed candidate order. Raises RankDeficient when no
    nonsingular design exists and IterationCap when the certificate is not
    reached within max_iters iterations.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if delta_support is None:
        delta_support = default_delta_support(cands.m)
    full = cands.N <= WORKING_SET_MIN_N if force_full is None else force_full
    if full:
        return _solve_full(cands, tol, delta_support, max_iters, exchange_period)
    return _solve_working_set(cands, tol, delta_support, max_iters, exchange_period)


def _finalize(cands, indices, weights, tol, iterations, history, delta_support):
    """Rebuild the certificate from the cleaned design; None if it slipped."""
    keep = weights > 0.0
    design = Design.approximate(indices[keep], weights[keep])
    mstar = info_matrix(cands, design)
    vstar = variance_function(cands, mstar)
    eff_lb = cands.m / float(vstar.max())
    if eff_lb < 1.0 - tol:
        return None
    return ApproxSolution(
        design=design,
        mstar=mstar,
        vstar=vstar,
        eff_lower_bound=eff_lb,
        iterations=iterations,
        logdet_history=np.asarray(history),
        delta_support=delta_support,
    )


def _solve_full(cands, tol, delta_support, max_iters, exchange_period):
    m, n_points = cands.m, cands.N
    basis = greedy_basis(cands)
    weights = np.full(n_points, 0.5 / n_points)
    weights[basis] += 0.5 / m
    vectors = cands.toarray()
    indices = np.arange(n_points, dtype=np.int64)
    history: list[float] = []
    for it in range(1, max_iters + 1):
        logdet, minv, v = _moment_quantities(vectors, weights)
        history.append(logdet)
        if m / float(v.max()) >= 1.0 - tol:
            cleaned, changed = _clean_weights(weights, v, m, delta_support)
            if changed:
                weights = cleaned
                continue
            solution = _finalize(cands, indices, weights, tol, it, history, delta_support)
            if solution is not None:
                return solution
        if exchange_period and it % exchange_period == 0:
            support = np.flatnonzero(weights > SUPPORT_EPS)
            j = int(support[np.argmin(v[support])])
            k = int(np.argmax(v))
            if k != j:
                cross = float(vectors[k] @ minv @ vectors[j])
                alpha = _line_search_alpha(v[k], v[j], cross, weights[j])
                weights[j] -= alpha
                weights[k] += alpha
        else:
            weights = weights * (v / m)
            weights /= weights.sum()
    raise IterationCap(f"no certificate after {max_iters} iterations")


def _solve_working_set(cands, tol, delta_support, max_iters, exchange_period):
    """Working-set variant: identical updates, streamed certificate passes.

    Weights off the working set are exactly zero, so each inner update
    coincides with the corresponding full-candidate update; new candidates
    enter through exchange steps aimed at the globally largest variance.
    """
    m = cands.m
    active = list(greedy_basis(cands))
    positions = {idx: p for p, idx in enumerate(active)}
    vectors = cands.gather(active)
    weights = np.full(m, 1.0 / m)
    history: list[float] = []
    iterations = 0
    inner_budget = 400
    while iterations < max_iters:
        for _ in range(inner_budget):
            if iterations >= max_iters:
                break
            iterations += 1
            logdet, minv, v = _moment_quantities(vectors, weights)
            history.append(logdet)
            if m / float(v.max()) >= 1.0 - 0.25 * tol:
                break
            if exchange_period and iterations % exchange_period == 0:
                support = np.flatnonzero(weights > SUPPORT_EPS)
                j = int(support[np.argmin(v[support])])
                k = int(np.argmax(v))
                if k != j:
                    cross = float(vectors[k] @ minv @ vectors[j])
                    alpha = _line_search_alpha(v[k], v[j], cross, weights[j])
                    weights[j] -= alpha
                    weights[k] += alpha
            else:
                weights = weights * (v / m)
                weights /= weights.sum()
        _, minv, v_active = _moment_quantities(vectors, weights)
        v_all = _streamed_variances(cands, minv)
        if m / float(v_all.max()) >= 1.0 - tol:
            cleaned, changed = _clean_weights(weights, v_active, m, delta_support)
            if changed:
                weights = cleaned
                continue
            solution = _finalize(
                cands, np.asarray(active, dtype=np.int64), weights, tol, iterations, history, delta_support
            )
            if solution is not None:
                return solution
        entrant = int(np.argmax(v_all))
        if entrant not in positions:
            positions[entrant] = len(active)
            active.append(entrant)
            vectors = np.vstack([vectors, cands.gather([entrant])])
            weights = np.append(weights, 0.0)
            v_active = np.append(v_active, v_all[entrant])
        k = positions[entrant]
        support = np.flatnonzero(weights > SUPPORT_EPS)
        j = int(support[np.argmin(v_active[support])])
        if k != j:
            cross = float(vectors[k] @ minv @ vectors[j])
            alpha = _line_search_alpha(v_active[k], v_active[j], cross, weights[j])
            weights[j] -= alpha
            weights[k] += alpha
        iterations += 1
    raise IterationCap(f"no certificate after {max_iters} iterations")
